import itertools
import random
import threading
import time

import pytest

from labcube.engine import Channel, ContainerStatus, StatusKind, StopContainer
from labcube.errors import NotFoundError
from labcube.monitor import (
    HealthColor,
    aggregate_health,
    classify_service,
    dominance,
    multiplex_logs,
    poll_snapshot,
)
from labcube.stacks import Role

from oracles import dominance_rank


def status(state, exit_code=None, service="svc", host="controller", since=1):
    return ContainerStatus(
        service=service,
        state=state,
        host=host,
        since=None if state is StatusKind.MISSING else since,
        exit_code=exit_code,
    )


class TestClassifyService:
    def test_running_is_green(self):
        assert classify_service(status(StatusKind.RUNNING)) is HealthColor.GREEN

    def test_starting_is_yellow(self):
        assert classify_service(status(StatusKind.STARTING)) is HealthColor.YELLOW
        assert classify_service(status(StatusKind.CREATING)) is HealthColor.YELLOW

    def test_exited_core_nf_is_red_even_at_zero(self):
        assert classify_service(status(StatusKind.EXITED, 0), Role.CORE_NF) is HealthColor.RED
        assert classify_service(status(StatusKind.EXITED, 1), Role.CORE_NF) is HealthColor.RED

    def test_exited_zero_util_is_green(self):
        assert classify_service(status(StatusKind.EXITED, 0), Role.UTIL) is HealthColor.GREEN
        assert classify_service(status(StatusKind.EXITED, 3), Role.UTIL) is HealthColor.RED

    def test_missing_is_red(self):
        assert classify_service(status(StatusKind.MISSING)) is HealthColor.RED


class TestAggregateHealth:
    def test_all_green(self):
        assert aggregate_health([HealthColor.GREEN, HealthColor.GREEN]) is HealthColor.GREEN

    def test_red_dominates(self):
        colors = [HealthColor.GREEN, HealthColor.YELLOW, HealthColor.RED]
        assert aggregate_health(colors) is HealthColor.RED

    def test_empty_is_gray(self):
        assert aggregate_health([]) is HealthColor.GRAY

    def test_exhaustive_agreement_with_max_dominance(self):
        states = [
            (StatusKind.CREATING, None),
            (StatusKind.STARTING, None),
            (StatusKind.RUNNING, None),
            (StatusKind.EXITED, 1),
            (StatusKind.MISSING, None),
        ]
        total = 0
        for n in range(0, 5):
            for combo in itertools.product(states, repeat=n):
                colors = [classify_service(status(s, code)) for s, code in combo]
                expected_rank = max((dominance_rank(c.value) for c in colors), default=0)
                assert dominance(aggregate_health(colors)) == expected_rank
                total += 1
        assert total >= 625

    def test_monotonic_under_insertion(self):
        rng = random.Random(11)
        palette = [HealthColor.GREEN, HealthColor.YELLOW, HealthColor.RED]
        for _ in range(2000):
            colors = [rng.choice(palette) for _ in range(rng.randint(0, 6))]
            before = dominance(aggregate_health(colors))
            assert dominance(aggregate_health(colors + [HealthColor.RED])) >= before


class TestPollSnapshot:
    def test_all_running_aggregate_green(self, ctx):
        orch = ctx.orchestrator
        orch.start_stack("srsran-open5gs-5gsa")
        snapshot = poll_snapshot(orch.active_session(), orch.endpoints)
        assert snapshot.aggregate is HealthColor.GREEN
        assert {e.service for e in snapshot.per_service} == {
            "webdb", "nrf", "amf", "smf", "upf", "ausf", "udm", "gnb",
        }

    def test_unreachable_ran_host_degrades_to_missing(self, ctx):
        orch = ctx.orchestrator
        orch.start_stack("srsran-open5gs-5gsa")
        poll_snapshot(orch.active_session(), orch.endpoints)
        ctx.hub.endpoint("ran-1").reachable = False
        snapshot = poll_snapshot(orch.active_session(), orch.endpoints)
        gnb = next(e for e in snapshot.per_service if e.service == "gnb")
        assert gnb.status.state is StatusKind.MISSING
        assert gnb.color is HealthColor.RED
        assert snapshot.aggregate is HealthColor.RED

    def test_no_session_is_gray_and_empty(self, ctx):
        snapshot = poll_snapshot(None, ctx.orchestrator.endpoints)
        assert snapshot.aggregate is HealthColor.GRAY
        assert snapshot.per_service == ()

    def test_stopped_session_is_gray(self, ctx):
        orch = ctx.orchestrator
        session = orch.start_stack("osmocom-2g")
        orch.stop_stack(session)
        snapshot = poll_snapshot(session, orch.endpoints)
        assert snapshot.aggregate is HealthColor.GRAY


class TestMultiplexLogs:
    def test_merged_length_and_per_service_order(self, ctx):
        orch = ctx.orchestrator
        session = orch.start_stack("srsran-open5gs-5gsa")
        per_service = {}
        for placement in session.plan.placements:
            client = orch.endpoints[placement.host]
            per_service[placement.service] = list(client.logs(placement.service))
        merged = list(multiplex_logs(session, orch.endpoints))
        assert len(merged) == sum(len(v) for v in per_service.values())
        assert [e.ts for e in merged] == sorted(e.ts for e in merged)
        for service, events in per_service.items():
            subsequence = [e.line for e in merged if e.service == service]
            assert subsequence == [e.line for e in events]

    def test_filter_to_single_service(self, ctx):
        orch = ctx.orchestrator
        session = orch.start_stack("osmocom-2g")
        merged = list(multiplex_logs(session, orch.endpoints, services=["hlr"]))
        assert merged and all(e.service == "hlr" for e in merged)

    def test_unknown_service_in_filter_rejected(self, ctx):
        orch = ctx.orchestrator
        session = orch.start_stack("osmocom-2g")
        with pytest.raises(NotFoundError):
            list(multiplex_logs(session, orch.endpoints, services=["ghost"]))

    def test_events_tagged_with_current_color(self, ctx):
        orch = ctx.orchestrator
        session = orch.start_stack("osmocom-2g")
        poll_snapshot(orch.active_session(), orch.endpoints)  # tick to RUNNING
        merged = list(multiplex_logs(session, orch.endpoints, services=["hlr"]))
        assert {e.color for e in merged} == {HealthColor.GREEN}

    def test_exited_service_ends_with_marker_and_stream_continues(self, ctx):
        orch = ctx.orchestrator
        session = orch.start_stack("osmocom-2g")
        controller = ctx.hub.endpoint("controller")
        controller.apply(StopContainer(container="hlr"))

        collected = []
        done = threading.Event()

        def consume():
            for event in multiplex_logs(
                session, orch.endpoints, services=["hlr", "stp"], follow=True
            ):
                collected.append(event)
            done.set()

        thread = threading.Thread(target=consume, daemon=True)
        thread.start()
        time.sleep(0.2)
        controller.apply(StopContainer(container="stp"))
        assert done.wait(timeout=5.0), "multiplexed stream did not terminate"

        hlr_events = [e for e in collected if e.service == "hlr"]
        assert hlr_events[-1].channel is Channel.EOF
        stp_lines = [e for e in collected if e.service == "stp" and e.channel is Channel.OUT]
        assert stp_lines  # the other service kept streaming

    def test_abandoned_follow_stream_releases_producers(self, ctx):
        orch = ctx.orchestrator
        session = orch.start_stack("osmocom-2g")
        poll_snapshot(orch.active_session(), orch.endpoints)
        baseline = threading.active_count()
        stream = multiplex_logs(session, orch.endpoints, follow=True)
        assert next(stream) is not None
        stream.close()  # consumer walks away mid-stream
        for _ in range(100):
            if threading.active_count() <= baseline:
                break
            time.sleep(0.02)
        assert threading.active_count() <= baseline

    def test_slow_consumer_gets_gap_marker_not_stall(self, ctx):
        orch = ctx.orchestrator
        session = orch.start_stack("srsran-open5gs-5gsa")
        controller = ctx.hub.endpoint("controller")
        controller.script_logs("amf", [f"flood {i}" for i in range(200)])
        controller.apply(StopContainer(container="amf"))

        events = []
        stream = multiplex_logs(session, orch.endpoints, services=["amf"], follow=True, buffer_size=8)
        for event in stream:
            time.sleep(0.002)  # slower than the producer
            events.append(event)
        channels = {e.channel for e in events}
        assert Channel.GAP in channels
        out_lines = [e.line for e in events if e.channel is Channel.OUT]
        flood = [line for line in out_lines if line.startswith("flood")]
        assert flood == sorted(flood, key=lambda s: int(s.split()[1]))
