import random
from dataclasses import replace
from pathlib import Path

import pytest

from labcube.context import build_context
from labcube.engine import (
    ConnectNetwork,
    DisconnectNetwork,
    RemoteComposeUp,
    StartContainer,
    TransferFiles,
)
from labcube.errors import (
    ConflictError,
    CycleError,
    EngineFailureError,
    StackAlreadyActiveError,
    UnknownHostError,
    UnknownStackError,
    ValidationFailedError,
)
from labcube.monitor import HealthColor, poll_snapshot
from labcube.orchestrator import (
    ACTIVE_STATES,
    Policy,
    SessionState,
    delegate_ran_service,
    delegation_matches_pattern,
    is_contiguous_slice,
    plan_deployment,
)
from labcube.settings import render_stack, resolve_settings
from labcube.stacks import Generation, Role, ServiceSpec, StackManifest
from labcube.subscribers import build_seed_set, plmn_from_settings


def prepare_fixture(ctx, name, target_host=None):
    manifest = ctx.catalog.get(name)
    if target_host is not None:
        manifest = replace(
            manifest,
            services=tuple(
                replace(s, target_host=target_host) if s.role is Role.RAN else s
                for s in manifest.services
            ),
        )
    resolved = resolve_settings(ctx.global_settings, manifest.overrides)
    rendered = render_stack(manifest, resolved, ctx.template_root)
    seed = build_seed_set(ctx.subscriber_records, plmn_from_settings(resolved))
    plan = plan_deployment(manifest, resolved, ctx.networks, ctx.registry, seed, rendered)
    return manifest, resolved, rendered, plan


class TestPlanDeployment:
    def test_no_ran_targets_means_all_controller(self, ctx):
        manifest, _, _, plan = prepare_fixture(ctx, "srsran-open5gs-5gsa", target_host="controller")
        assert all(host == "controller" for host, _ in plan.actions)

    def test_networks_created_first_then_services_in_topo_order(self, ctx):
        manifest, _, _, plan = prepare_fixture(ctx, "srsran-open5gs-5gsa")
        kinds = [type(action).__name__ for _, action in plan.actions]
        assert kinds[:3] == ["CreateNetwork"] * 3
        started = [
            a.container for _, a in plan.actions if isinstance(a, StartContainer)
        ]
        index = {name: i for i, name in enumerate(started)}
        for svc in manifest.services:
            if svc.name not in index:
                continue
            for dep in svc.depends_on:
                if dep in index:
                    assert index[dep] < index[svc.name]

    def test_delegation_subsequence_matches_pattern(self, ctx):
        manifest, _, _, plan = prepare_fixture(ctx, "srsran-open5gs-5gsa")
        gnb = manifest.service("gnb")
        sub = plan.delegations["gnb"]
        assert delegation_matches_pattern(sub, gnb, ctx.registry)
        assert is_contiguous_slice(plan, sub)
        assert plan.actions[-len(sub):] == list(sub)

    def test_seed_exec_follows_db_start(self, ctx):
        _, _, _, plan = prepare_fixture(ctx, "srsran-open5gs-5gsa")
        kinds = [(type(a).__name__, getattr(a, "container", None)) for _, a in plan.actions]
        start_idx = kinds.index(("StartContainer", "webdb"))
        assert kinds[start_idx + 1] == ("Exec", "webdb")

    def test_dependency_cycle_raises(self, ctx):
        services = (
            ServiceSpec(name="a", image="i", role=Role.CORE_NF, depends_on=("b",)),
            ServiceSpec(name="b", image="i", role=Role.CORE_NF, depends_on=("a",)),
        )
        manifest = StackManifest(
            name="loop", description="", generation=Generation.G5SA, services=services
        )
        resolved = resolve_settings(ctx.global_settings, manifest.overrides)
        seed = build_seed_set([], plmn_from_settings(resolved))
        with pytest.raises(CycleError):
            plan_deployment(manifest, resolved, ctx.networks, ctx.registry, seed, [])


class TestDelegateRanService:
    def test_controller_target_is_single_start(self, ctx):
        manifest, resolved, rendered, plan = prepare_fixture(
            ctx, "srsran-open5gs-5gsa", target_host="controller"
        )
        gnb = manifest.service("gnb")
        from labcube.netplan import build_address_plan

        sub = delegate_ran_service(
            gnb, ctx.registry, [], stack=manifest.name,
            address_plan=build_address_plan(manifest, resolved),
        )
        assert len(sub) == 1
        host, action = sub[0]
        assert host == "controller"
        assert isinstance(action, StartContainer)

    def test_remote_target_exact_sequence(self, ctx):
        manifest, resolved, rendered, plan = prepare_fixture(ctx, "srsran-open5gs-5gsa")
        sub = plan.delegations["gnb"]
        actions = [action for _, action in sub]
        # two attachments in manifest order: corenet then rfnet
        assert isinstance(actions[0], DisconnectNetwork) and actions[0].network == "corenet"
        assert isinstance(actions[1], DisconnectNetwork) and actions[1].network == "rfnet"
        assert isinstance(actions[2], ConnectNetwork) and actions[2].network == "bridge"
        assert isinstance(actions[3], TransferFiles) and actions[3].host == "ran-1"
        assert isinstance(actions[4], RemoteComposeUp) and actions[4].host == "ran-1"
        assert len(actions[3].files) == 1  # the rendered gnb.conf travels along

    def test_unregistered_host_rejected(self, ctx):
        manifest = ctx.catalog.get("srsran-open5gs-5gsa")
        gnb = replace(manifest.service("gnb"), target_host="ran-9")
        from labcube.netplan import AddressPlan

        with pytest.raises(UnknownHostError):
            delegate_ran_service(
                gnb, ctx.registry, [], stack=manifest.name, address_plan=AddressPlan(())
            )


class TestStartStack:
    def test_idle_start_reaches_running(self, ctx):
        orch = ctx.orchestrator
        session = orch.start_stack("srsran-open5gs-5gsa")
        assert session.state is SessionState.RUNNING
        for _ in range(len(session.plan.placements) + 2):
            snapshot = poll_snapshot(orch.active_session(), orch.endpoints)
            if all(e.status.state.value == "running" for e in snapshot.per_service):
                break
        assert snapshot.aggregate is HealthColor.GREEN
        remote = ctx.hub.endpoint("ran-1").query(session.stack)
        assert [s.service for s in remote] == ["gnb"]

    def test_unknown_stack(self, ctx):
        with pytest.raises(UnknownStackError):
            ctx.orchestrator.start_stack("nope")

    def test_reject_policy_refuses_second_start(self, ctx):
        orch = ctx.orchestrator
        orch.start_stack("osmocom-2g")
        with pytest.raises(StackAlreadyActiveError) as err:
            orch.start_stack("srsran-open5gs-5gsa")
        assert err.value.current == "osmocom-2g"

    def test_replace_policy_tears_down_predecessor_first(self, ctx):
        orch = ctx.orchestrator
        first = orch.start_stack("osmocom-2g")
        second = orch.start_stack("srsran-open5gs-5gsa", policy=Policy.REPLACE_ACTIVE)
        assert first.state is SessionState.STOPPED
        assert second.state is SessionState.RUNNING
        log = ctx.hub.dump_action_log()
        first_creates = [
            e for e in log if e["kind"] == "create_container" and e.get("stack") == "osmocom-2g"
        ]
        removes = {
            e["container"]: e["seq"] for e in log if e["kind"] == "remove_container"
        }
        successor_first_seq = min(
            e["seq"]
            for e in log
            if e.get("stack") == "srsran-open5gs-5gsa" or e.get("container", "") in ("webdb",)
        )
        for create in first_creates:
            assert create["container"] in removes
            assert removes[create["container"]] < successor_first_seq
        assert ctx.hub.total_containers("osmocom-2g") == 0

    def test_validation_gate_leaves_engine_untouched(self, ctx):
        # Force an address conflict: two services share one address.
        values = dict(ctx.global_settings.entries)
        values["SMF_IP"] = values["AMF_IP"]
        ctx.update_settings(values)
        with pytest.raises(ValidationFailedError) as err:
            ctx.orchestrator.start_stack("srsran-open5gs-5gsa")
        assert "DUPLICATE" in err.value.report.codes()
        assert ctx.hub.dump_action_log() == []

    def test_emulated_start_runs_on_controller_only(self, ctx):
        orch = ctx.orchestrator
        session = orch.start_stack("srsran-free5gc-5gsa", emulated=True)
        assert session.stack == "srsran-free5gc-5gsa-emulated"
        assert ctx.hub.endpoint("ran-1").query() == []
        poll_snapshot(orch.active_session(), orch.endpoints)
        states = {s.service: s.state.value for s in ctx.hub.endpoint("controller").query(session.stack)}
        assert states["gnb-sim"] == "running"
        assert states["ue-sim"] == "running"


class TestStopStack:
    def test_stop_empties_every_endpoint(self, ctx):
        orch = ctx.orchestrator
        session = orch.start_stack("srsran-open5gs-5gsa")
        orch.stop_stack(session)
        assert session.state is SessionState.STOPPED
        for host in ("controller", "ran-1", "ran-2"):
            assert ctx.hub.endpoint(host).query(session.stack) == []
        assert ctx.hub.total_networks() == 0

    def test_stop_twice_is_noop(self, ctx):
        orch = ctx.orchestrator
        session = orch.start_stack("osmocom-2g")
        orch.stop_stack(session)
        log_len = len(ctx.hub.dump_action_log())
        orch.stop_stack(session)
        assert len(ctx.hub.dump_action_log()) == log_len

    def test_failed_session_with_partial_remote_state_reaped(self, ctx, tmp_path):
        source = Path(ctx.catalog_dir) / "srsran-open5gs-5gsa.yaml"
        text = source.read_text() + (
            "  probe:\n"
            "    image: busybox:1.36\n"
            "    role: util\n"
            "    depends_on: [gnb]\n"
        )
        (tmp_path / "with-probe.yaml").write_text(text.replace("srsran-open5gs-5gsa", "with-probe"))
        custom = build_context(catalog_dir=tmp_path)
        controller = custom.hub.endpoint("controller")
        controller.failure_injector = lambda a: (
            ConflictError("injected") if isinstance(a, StartContainer) and a.container == "probe" else None
        )
        with pytest.raises(EngineFailureError):
            custom.orchestrator.start_stack("with-probe")
        session = custom.orchestrator.last_session()
        assert session.state is SessionState.FAILED
        ran_log_before = [e["kind"] for e in custom.hub.endpoint("ran-1").action_log]
        assert "remote_compose_up" in ran_log_before
        custom.orchestrator.stop_stack(session)
        ran_kinds = [
            (e["kind"], e.get("container")) for e in custom.hub.endpoint("ran-1").action_log
        ]
        assert ("stop_container", "gnb") in ran_kinds
        assert ("remove_container", "gnb") in ran_kinds
        assert custom.hub.total_containers() == 0


class TestCleanStateSeeding:
    def test_restart_resets_subscriber_db(self, ctx):
        orch = ctx.orchestrator
        session = orch.start_stack("srsran-open5gs-5gsa")
        canonical = session.plan.seed.canonical_document()
        controller = ctx.hub.endpoint("controller")
        assert controller.get_subscriber_db("webdb") == canonical

        from labcube.engine import Exec

        controller.apply(
            Exec(container="webdb", command=("subscriber-db", "add", "999990000000099,0,0,8000"))
        )
        assert controller.get_subscriber_db("webdb") != canonical
        orch.stop_stack(session)
        orch.start_stack("srsran-open5gs-5gsa")
        assert controller.get_subscriber_db("webdb") == canonical


class TestSingleActiveStack:
    def test_random_interleavings_hold_invariant(self, ctx):
        rng = random.Random(1234)
        orch = ctx.orchestrator
        stacks = ["osmocom-2g", "srsran-open5gs-5gsa", "srsran-free5gc-5gsa"]
        for _ in range(120):
            op = rng.random()
            if op < 0.45:
                try:
                    orch.start_stack(rng.choice(stacks))
                except StackAlreadyActiveError:
                    assert orch.active_session() is not None
            elif op < 0.7:
                orch.start_stack(rng.choice(stacks), policy=Policy.REPLACE_ACTIVE)
            else:
                orch.stop_stack()
            live = [s for s in orch.sessions if s.state in ACTIVE_STATES]
            assert len(live) <= 1
        orch.stop_stack()
        assert ctx.hub.total_containers() == 0
