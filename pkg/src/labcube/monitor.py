"""Color-coded stack health and multiplexed live logs.

Health is a pure dominance aggregation over per-container colors: a single
RED service makes the stack RED, anything still coming up is YELLOW, and
GRAY appears only when no session is active. A finished one-shot helper
(UTIL role, exit 0) stays GREEN; a dead core function is RED even at exit
code 0.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Mapping

from .engine import Channel, ContainerStatus, EngineClient, LogEvent, StatusKind
from .errors import EngineError, NotFoundError, UnreachableError
from .orchestrator import ACTIVE_STATES, StackSession
from .stacks import Role


class HealthColor(str, Enum):
    GREEN = "green"
    YELLOW = "yellow"
    RED = "red"
    GRAY = "gray"


_DOMINANCE = {HealthColor.GRAY: 0, HealthColor.GREEN: 1, HealthColor.YELLOW: 2, HealthColor.RED: 3}


def dominance(color: HealthColor) -> int:
    return _DOMINANCE[color]


@dataclass(frozen=True)
class ServiceHealth:
    service: str
    status: ContainerStatus
    color: HealthColor

    def to_dict(self) -> dict:
        return {**self.status.to_dict(), "color": self.color.value}


@dataclass(frozen=True)
class HealthSnapshot:
    stack: str | None
    per_service: tuple[ServiceHealth, ...]
    aggregate: HealthColor
    taken_at: float

    def to_dict(self) -> dict:
        return {
            "stack": self.stack,
            "aggregate": self.aggregate.value,
            "taken_at": self.taken_at,
            "services": [entry.to_dict() for entry in self.per_service],
        }


def classify_service(status: ContainerStatus, role: Role = Role.CORE_NF) -> HealthColor:
    if status.state is StatusKind.RUNNING:
        return HealthColor.GREEN
    if status.state in (StatusKind.CREATING, StatusKind.STARTING):
        return HealthColor.YELLOW
    if status.state is StatusKind.EXITED:
        if status.exit_code == 0 and role is Role.UTIL:
            return HealthColor.GREEN
        return HealthColor.RED
    return HealthColor.RED  # MISSING


def aggregate_health(colors: list[HealthColor]) -> HealthColor:
    if not colors:
        return HealthColor.GRAY
    return max(colors, key=dominance)


def poll_snapshot(
    session: StackSession | None, endpoints: Mapping[str, EngineClient]
) -> HealthSnapshot:
    """One consistent health snapshot of the active session.

    Polling advances one simulated tick on every queried endpoint. An
    unreachable endpoint degrades its services to MISSING; the snapshot is
    still returned.
    """
    taken_at = time.time()
    if session is None or session.state not in ACTIVE_STATES:
        return HealthSnapshot(stack=None, per_service=(), aggregate=HealthColor.GRAY, taken_at=taken_at)

    # Insertion-ordered unique hosts: tick order stays deterministic.
    hosts = list(dict.fromkeys(p.host for p in session.plan.placements))
    statuses: dict[str, dict[str, ContainerStatus]] = {}
    for host in hosts:
        client = endpoints.get(host)
        if client is None:
            continue
        try:
            client.tick()
            statuses[host] = {st.service: st for st in client.query(session.stack)}
        except UnreachableError:
            continue

    entries = []
    colors = []
    for placement in session.plan.placements:
        status = statuses.get(placement.host, {}).get(placement.service)
        if status is None:
            status = ContainerStatus(
                service=placement.service, state=StatusKind.MISSING, host=placement.host
            )
        color = classify_service(status, placement.role)
        entries.append(ServiceHealth(service=placement.service, status=status, color=color))
        colors.append(color)
    return HealthSnapshot(
        stack=session.stack,
        per_service=tuple(entries),
        aggregate=aggregate_health(colors),
        taken_at=taken_at,
    )


# --- log multiplexing ----------------------------------------------------------

@dataclass(frozen=True)
class TaggedLogEvent:
    ts: int
    service: str
    line: str
    channel: Channel
    color: HealthColor

    def to_dict(self) -> dict:
        return {
            "ts": self.ts,
            "service": self.service,
            "line": self.line,
            "channel": self.channel.value,
            "color": self.color.value,
        }


def _service_colors(
    session: StackSession, endpoints: Mapping[str, EngineClient]
) -> dict[str, HealthColor]:
    colors: dict[str, HealthColor] = {}
    by_host: dict[str, dict[str, ContainerStatus]] = {}
    for placement in session.plan.placements:
        if placement.host not in by_host:
            client = endpoints.get(placement.host)
            try:
                by_host[placement.host] = (
                    {st.service: st for st in client.query(session.stack)} if client else {}
                )
            except EngineError:
                by_host[placement.host] = {}
        status = by_host[placement.host].get(placement.service)
        if status is None:
            status = ContainerStatus(
                service=placement.service, state=StatusKind.MISSING, host=placement.host
            )
        colors[placement.service] = classify_service(status, placement.role)
    return colors


def multiplex_logs(
    session: StackSession,
    endpoints: Mapping[str, EngineClient],
    services: list[str] | None = None,
    follow: bool = False,
    buffer_size: int = 256,
) -> Iterator[TaggedLogEvent]:
    """Merge per-service log streams into one ordered stream.

    Per-service ordering is always preserved. Without `follow` the merge is
    by timestamp; with `follow` events arrive live and a slow consumer
    drops oldest events behind an explicit GAP marker instead of stalling
    the source. An unknown name in the filter raises here, before any
    event is produced.
    """
    wanted = {p.service for p in session.plan.placements}
    if services:
        unknown = set(services) - wanted
        if unknown:
            raise NotFoundError(sorted(unknown)[0])
        wanted = set(services)
    placements = [p for p in session.plan.placements if p.service in wanted]
    return _merge_events(session, endpoints, placements, follow, buffer_size)


def _merge_events(
    session: StackSession,
    endpoints: Mapping[str, EngineClient],
    placements,
    follow: bool,
    buffer_size: int,
) -> Iterator[TaggedLogEvent]:
    colors = _service_colors(session, endpoints)
    colors_at = [time.monotonic()]

    def tag(event: LogEvent) -> TaggedLogEvent:
        # Live streams re-check health occasionally so a service that turns
        # RED tints its subsequent lines; snapshots keep one consistent view.
        if follow and time.monotonic() - colors_at[0] > 0.25:
            colors.update(_service_colors(session, endpoints))
            colors_at[0] = time.monotonic()
        return TaggedLogEvent(
            ts=event.ts,
            service=event.service,
            line=event.line,
            channel=event.channel,
            color=colors.get(event.service, HealthColor.GRAY),
        )

    if not follow:
        collected: list[tuple[int, int, int, LogEvent]] = []
        for order, placement in enumerate(placements):
            client = endpoints.get(placement.host)
            if client is None:
                continue
            try:
                events = list(client.logs(placement.service, follow=False))
            except EngineError:
                continue
            for position, event in enumerate(events):
                collected.append((event.ts, order, position, event))
        collected.sort(key=lambda item: (item[0], item[1], item[2]))
        for _, _, _, event in collected:
            yield tag(event)
        return

    lock = threading.Lock()
    queue: deque[LogEvent] = deque()
    gap_pending = [False]
    live = [0]
    closed = threading.Event()  # set when the consumer walks away

    def pump(placement):
        client = endpoints.get(placement.host)
        if client is None:
            return
        try:
            for event in client.logs(placement.service, follow=True, stop=closed):
                if closed.is_set():
                    return
                with lock:
                    if len(queue) >= buffer_size:
                        queue.popleft()
                        gap_pending[0] = True
                    queue.append(event)
        except EngineError:
            pass
        finally:
            with lock:
                live[0] -= 1

    workers = []
    for placement in placements:
        live[0] += 1
        worker = threading.Thread(target=pump, args=(placement,), daemon=True)
        workers.append(worker)
    for worker in workers:
        worker.start()

    try:
        while True:
            gap_ts = None
            event = None
            finished = False
            with lock:
                if gap_pending[0] and queue:
                    gap_pending[0] = False
                    gap_ts = queue[0].ts
                elif queue:
                    event = queue.popleft()
                else:
                    finished = live[0] == 0
            if gap_ts is not None:
                yield TaggedLogEvent(
                    ts=gap_ts, service="", line="", channel=Channel.GAP, color=HealthColor.GRAY
                )
                continue
            if event is not None:
                yield tag(event)
                continue
            if finished:
                return
            time.sleep(0.005)
    finally:
        closed.set()
