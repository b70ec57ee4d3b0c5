"""Deterministic in-memory container engine for desk-scale verification.

A `SimulatedHub` owns one endpoint per lab host. All endpoints share a
single monotonic event counter, so action logs across hosts have one global
order and identical action sequences always produce identical final states
and logs. Time is modeled as poll ticks: a started container is STARTING
until the next tick, then RUNNING.
"""

from __future__ import annotations

import ipaddress
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

from . import yamlish
from .engine import (
    DEFAULT_BRIDGE,
    Channel,
    ConnectNetwork,
    ContainerDescriptor,
    ContainerStatus,
    CreateContainer,
    CreateNetwork,
    DisconnectNetwork,
    EndpointKind,
    EngineAction,
    EngineEndpoint,
    EngineResult,
    Exec,
    FileRef,
    LogEvent,
    RemoteComposeUp,
    RemoveContainer,
    RemoveNetwork,
    StartContainer,
    StatusKind,
    StopContainer,
    TransferFiles,
    action_to_dict,
)
from .errors import ConflictError, NotFoundError, TransferFailedError, UnreachableError
from .netplan import NetworkSpec

SEED_EXEC_COMMAND = "subscriber-db"


@dataclass
class _Network:
    name: str
    spec: NetworkSpec | None
    stack: str | None


@dataclass
class _Container:
    descriptor: ContainerDescriptor
    state: StatusKind
    host: str
    since: int
    exit_code: int | None = None
    attachments: dict[str, tuple[str | None, str | None]] = field(default_factory=dict)
    log: list[LogEvent] = field(default_factory=list)
    log_closed: bool = False
    subscriber_db: str = ""


class SimulatedHub:
    """All simulated endpoints of one lab, sharing a clock and a lock."""

    def __init__(self, hosts: Iterable[str], log_lines: int = 3):
        self._lock = threading.RLock()
        self._counter = 0
        self.log_lines = max(1, log_lines)
        self.endpoints: dict[str, SimulatedEndpoint] = {}
        for host in hosts:
            self.endpoints[host] = SimulatedEndpoint(self, host)

    def next_seq(self) -> int:
        with self._lock:
            self._counter += 1
            return self._counter

    def endpoint(self, host: str) -> "SimulatedEndpoint":
        if host not in self.endpoints:
            raise UnreachableError(host)
        return self.endpoints[host]

    def dump_action_log(self) -> list[dict]:
        """Global, sequence-ordered action log across every endpoint."""
        with self._lock:
            entries = [e for ep in self.endpoints.values() for e in ep.action_log]
        return sorted(entries, key=lambda e: e["seq"])

    def total_containers(self, stack: str | None = None) -> int:
        return sum(len(ep.query(stack)) for ep in self.endpoints.values() if ep.reachable)

    def total_networks(self, stack: str | None = None) -> int:
        with self._lock:
            return sum(ep.network_count(stack) for ep in self.endpoints.values())


class SimulatedEndpoint:
    """One host's engine daemon: containers, networks, logs, action log."""

    def __init__(self, hub: SimulatedHub, host: str):
        self.hub = hub
        self.host = host
        self.endpoint = EngineEndpoint(host=host, address=f"sim://{host}", kind=EndpointKind.SIMULATED)
        self.reachable = True
        self.containers: dict[str, _Container] = {}
        self.networks: dict[str, _Network] = {DEFAULT_BRIDGE: _Network(DEFAULT_BRIDGE, None, None)}
        self.received_files: list[FileRef] = []
        self.action_log: list[dict] = []
        self._recording = True
        # Test hook: raise for any action this predicate matches.
        self.failure_injector: Callable[[EngineAction], Exception | None] | None = None

    # -- helpers ---------------------------------------------------------

    def _check_reachable(self) -> None:
        if not self.reachable:
            raise UnreachableError(self.endpoint.address)

    def _record(self, action: EngineAction, **extra) -> None:
        if not self._recording:
            return
        entry = action_to_dict(action)
        entry["seq"] = self.hub.next_seq()
        entry["host"] = self.host
        entry.update(extra)
        self.action_log.append(entry)

    def _container(self, name: str) -> _Container:
        if name not in self.containers:
            raise NotFoundError(name)
        return self.containers[name]

    def _emit(self, container: _Container, line: str, channel: Channel = Channel.OUT) -> None:
        container.log.append(
            LogEvent(ts=self.hub.next_seq(), service=container.descriptor.service, line=line, channel=channel)
        )

    def _scripted_corpus(self, container: _Container) -> None:
        svc = container.descriptor.service
        lines = [f"{svc}: starting up"]
        for ref in container.descriptor.config_files:
            lines.append(f"{svc}: loaded config {ref.path}")
        while len(lines) < self.hub.log_lines - 1:
            lines.append(f"{svc}: heartbeat {len(lines)}")
        lines.append(f"{svc}: ready")
        for line in lines[: self.hub.log_lines]:
            self._emit(container, line)

    # -- engine surface -----------------------------------------------------

    def apply(self, action: EngineAction) -> EngineResult:
        with self.hub._lock:
            self._check_reachable()
            if self.failure_injector is not None:
                failure = self.failure_injector(action)
                if failure is not None:
                    raise failure
            return self._apply(action)

    def _apply(self, action: EngineAction) -> EngineResult:
        if isinstance(action, CreateNetwork):
            if action.spec.name in self.networks:
                raise ConflictError(f"network {action.spec.name!r} already exists")
            self.networks[action.spec.name] = _Network(action.spec.name, action.spec, action.stack)
            self._record(action)
            return EngineResult()

        if isinstance(action, RemoveNetwork):
            if action.network == DEFAULT_BRIDGE:
                raise ConflictError("the default bridge cannot be removed")
            if action.network not in self.networks:
                raise NotFoundError(f"network {action.network}")
            for container in self.containers.values():
                if action.network in container.attachments:
                    raise ConflictError(
                        f"network {action.network!r} still has {container.descriptor.name!r} attached"
                    )
            del self.networks[action.network]
            self._record(action)
            return EngineResult()

        if isinstance(action, CreateContainer):
            d = action.descriptor
            if d.name in self.containers:
                raise ConflictError(f"container {d.name!r} already exists")
            self.containers[d.name] = _Container(
                descriptor=d, state=StatusKind.CREATING, host=self.host, since=self.hub.next_seq()
            )
            self._record(action)
            return EngineResult()

        if isinstance(action, ConnectNetwork):
            container = self._container(action.container)
            if action.network not in self.networks:
                raise NotFoundError(f"network {action.network}")
            if action.network in container.attachments:
                raise ConflictError(f"{action.container!r} already attached to {action.network!r}")
            if action.static_ip is not None:
                for other in self.containers.values():
                    ip, _ = other.attachments.get(action.network, (None, None))
                    if ip == action.static_ip:
                        raise ConflictError(
                            f"{action.static_ip} on {action.network!r} already held by "
                            f"{other.descriptor.name!r}"
                        )
                spec = self.networks[action.network].spec
                if spec is not None:
                    if ipaddress.IPv4Address(action.static_ip) not in spec.network():
                        raise ConflictError(
                            f"{action.static_ip} outside subnet {spec.subnet} of {action.network!r}"
                        )
            container.attachments[action.network] = (action.static_ip, action.mac)
            self._record(action)
            return EngineResult()

        if isinstance(action, DisconnectNetwork):
            container = self._container(action.container)
            if action.network not in container.attachments:
                raise NotFoundError(f"{action.container}@{action.network}")
            del container.attachments[action.network]
            self._record(action)
            return EngineResult()

        if isinstance(action, StartContainer):
            container = self._container(action.container)
            container.state = StatusKind.STARTING
            container.exit_code = None
            container.since = self.hub.next_seq()
            container.log_closed = False
            self._scripted_corpus(container)
            self._record(action)
            return EngineResult()

        if isinstance(action, StopContainer):
            container = self._container(action.container)
            if container.state is not StatusKind.EXITED:
                container.state = StatusKind.EXITED
                container.exit_code = 0
                container.since = self.hub.next_seq()
                container.log_closed = True
            self._record(action)
            return EngineResult()

        if isinstance(action, RemoveContainer):
            container = self._container(action.container)
            if container.state in (StatusKind.STARTING, StatusKind.RUNNING):
                raise ConflictError(f"container {action.container!r} is running; stop it first")
            del self.containers[action.container]
            self._record(action)
            return EngineResult()

        if isinstance(action, Exec):
            container = self._container(action.container)
            if container.state not in (StatusKind.STARTING, StatusKind.RUNNING):
                raise ConflictError(f"container {action.container!r} is not running")
            self._handle_exec(container, action.command)
            self._record(action)
            return EngineResult()

        if isinstance(action, TransferFiles):
            for ref in action.files:
                if not ref.path:
                    raise TransferFailedError(ref.path)
            self.received_files.extend(action.files)
            self._record(action)
            return EngineResult(detail={"files": [f.sha256 for f in action.files]})

        if isinstance(action, RemoteComposeUp):
            # Compose on the remote daemon is one opaque command from the
            # controller's view: its internal create/connect/start do not
            # appear in the action log, only the Up event does.
            self._recording = False
            try:
                result = self._compose_up(action.fragment)
            finally:
                self._recording = True
            self._record(action)
            return result

        raise TypeError(f"not an engine action: {action!r}")

    def _handle_exec(self, container: _Container, command: tuple[str, ...]) -> None:
        # The one command the simulation interprets: subscriber-db load/add.
        # Everything else is just logged, like a shell we cannot see into.
        if len(command) >= 2 and command[0] == SEED_EXEC_COMMAND:
            if command[1] == "load" and len(command) == 3:
                container.subscriber_db = command[2]
                self._emit(container, "subscriber database repopulated")
                return
            if command[1] == "add" and len(command) == 3:
                container.subscriber_db += command[2] + ("\n" if not command[2].endswith("\n") else "")
                self._emit(container, "subscriber added")
                return
        self._emit(container, "exec: " + " ".join(command))

    def _compose_up(self, fragment: str) -> EngineResult:
        doc = yamlish.load_mapping(fragment)
        for required in ("service", "image", "stack"):
            if required not in doc:
                raise ConflictError(f"compose fragment missing {required!r}")
        name = doc["service"]
        descriptor = ContainerDescriptor(
            name=name,
            image=doc["image"],
            stack=doc["stack"],
            service=name,
            role=doc.get("role", "ran"),
            command=doc.get("command"),
            config_files=tuple(FileRef(path=p, sha256=h) for p, h in doc.get("configs", [])),
        )
        created = []
        for att in doc.get("networks", []):
            net = att["network"]
            if net not in self.networks:
                self.networks[net] = _Network(net, None, descriptor.stack)
                created.append(net)
        self._apply(CreateContainer(descriptor=descriptor))
        for att in doc.get("networks", []):
            self._apply(
                ConnectNetwork(
                    container=name,
                    network=att["network"],
                    static_ip=att.get("ip"),
                    mac=att.get("mac"),
                )
            )
        self._apply(StartContainer(container=name))
        return EngineResult(detail={"service": name, "networks_created": created})

    def query(self, stack: str | None = None) -> list[ContainerStatus]:
        """Snapshot of container states, consistent at one clock instant."""
        with self.hub._lock:
            self._check_reachable()
            out = []
            for container in self.containers.values():
                if stack is not None and container.descriptor.stack != stack:
                    continue
                out.append(
                    ContainerStatus(
                        service=container.descriptor.service,
                        state=container.state,
                        host=self.host,
                        since=container.since,
                        exit_code=container.exit_code,
                    )
                )
            return out

    def logs(
        self,
        container: str,
        follow: bool = False,
        stop: threading.Event | None = None,
    ) -> Iterator[LogEvent]:
        """Stream a container's log; `stop` lets an abandoned follower exit."""
        with self.hub._lock:
            self._check_reachable()
            record = self._container(container)
        if not follow:
            with self.hub._lock:
                yield from list(record.log)
            return
        cursor = 0
        while True:
            if stop is not None and stop.is_set():
                return
            with self.hub._lock:
                events = record.log[cursor:]
                cursor = len(record.log)
                closed = record.log_closed
                gone = container not in self.containers
            yield from events
            if closed or gone:
                yield LogEvent(
                    ts=self.hub.next_seq(),
                    service=record.descriptor.service,
                    line="",
                    channel=Channel.EOF,
                )
                return
            time.sleep(0.01)

    def tick(self) -> None:
        """Advance one poll tick: every STARTING container becomes RUNNING."""
        with self.hub._lock:
            if not self.reachable:
                return
            for container in self.containers.values():
                if container.state is StatusKind.STARTING:
                    container.state = StatusKind.RUNNING
                    container.since = self.hub.next_seq()

    # -- inspection hooks for tests and the monitor ------------------------------

    def network_count(self, stack: str | None = None) -> int:
        return sum(
            1
            for net in self.networks.values()
            if net.name != DEFAULT_BRIDGE and (stack is None or net.stack == stack)
        )

    def container_attachments(self, name: str) -> dict[str, tuple[str | None, str | None]]:
        with self.hub._lock:
            return dict(self._container(name).attachments)

    def get_subscriber_db(self, container: str) -> str:
        with self.hub._lock:
            return self._container(container).subscriber_db

    def script_logs(self, container: str, lines: list[str]) -> None:
        """Install an explicit scripted corpus (appends to whatever exists)."""
        with self.hub._lock:
            record = self._container(container)
            for line in lines:
                self._emit(record, line)

    def stack_containers(self, stack: str) -> list[str]:
        with self.hub._lock:
            return [
                c.descriptor.name for c in self.containers.values() if c.descriptor.stack == stack
            ]

    def stack_networks(self, stack: str) -> list[str]:
        with self.hub._lock:
            return [n.name for n in self.networks.values() if n.stack == stack]
