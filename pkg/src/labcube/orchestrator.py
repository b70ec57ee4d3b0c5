"""Stack lifecycle: planning, RAN-host delegation, start/stop, seeding.

The controller host plans and executes everything. A RAN service whose
target host is not the controller gets the delegation sequence: its
controller-side container releases every static address, moves to the
default bridge, then the rendered files and a compose fragment travel to
the RAN host, which brings the service up on its own daemon. Exactly one
stack is active at a time; every start reseeds the subscriber database so
experiments always begin from a clean state.
"""

from __future__ import annotations

import hashlib
import itertools
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping

from . import yamlish
from .engine import (
    DEFAULT_BRIDGE,
    ConnectNetwork,
    ContainerDescriptor,
    CreateContainer,
    CreateNetwork,
    DisconnectNetwork,
    EngineAction,
    EngineClient,
    Exec,
    FileRef,
    RemoteComposeUp,
    RemoveContainer,
    RemoveNetwork,
    StartContainer,
    StopContainer,
    TransferFiles,
    action_to_dict,
)
from .errors import (
    DuplicateImsiError,
    EngineError,
    EngineFailureError,
    NotFoundError,
    PlanningError,
    RenderError,
    StackAlreadyActiveError,
    UnknownHostError,
    UnknownStackError,
    ValidationFailedError,
)
from .hosts import HostRegistry
from .netplan import AddressPlan, NetworkCatalog, build_address_plan, check_address_plan
from .settings import RenderedConfig, ResolvedSettings, SettingsMap, render_stack, resolve_settings
from .sim import SEED_EXEC_COMMAND
from .stacks import (
    LOCAL_HOST_NAME,
    Role,
    ServiceSpec,
    StackCatalog,
    StackManifest,
    emulated_variant,
    topological_order,
    validate_manifest,
)
from .subscribers import (
    SeedSet,
    SubscriberRecord,
    build_seed_set,
    plmn_from_settings,
    validate_subscriber,
)
from .validation import ValidationReport


class Policy(str, Enum):
    REJECT_IF_ACTIVE = "reject"
    REPLACE_ACTIVE = "replace"


class SessionState(str, Enum):
    STARTING = "starting"
    RUNNING = "running"
    STOPPING = "stopping"
    STOPPED = "stopped"
    FAILED = "failed"


ACTIVE_STATES = (SessionState.STARTING, SessionState.RUNNING, SessionState.STOPPING)


@dataclass(frozen=True)
class Placement:
    service: str
    role: Role
    host: str


@dataclass
class DeploymentPlan:
    stack: str
    actions: list[tuple[str, EngineAction]]
    seed: SeedSet
    placements: tuple[Placement, ...]
    # Delegation sub-sequences per RAN service, exactly as planned; each is
    # also a contiguous slice of `actions`.
    delegations: dict[str, tuple[tuple[str, EngineAction], ...]] = field(default_factory=dict)
    networks_by_host: dict[str, list[str]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "stack": self.stack,
            "actions": [{"host": host, **action_to_dict(action)} for host, action in self.actions],
        }


_session_ids = itertools.count(1)


@dataclass
class StackSession:
    id: int
    stack: str
    state: SessionState
    started_at: float
    plan: DeploymentPlan
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "stack": self.stack,
            "state": self.state.value,
            "started_at": self.started_at,
            "error": self.error,
        }


def _resolve_host(name: str, registry: HostRegistry) -> str:
    return registry.controller if name == LOCAL_HOST_NAME else name


def _rendered_by_service(manifest: StackManifest, rendered: list[RenderedConfig]) -> dict[str, list[RenderedConfig]]:
    # render_stack emits one entry per (service, template) pair in manifest
    # order, so pairing them back up is a plain zip.
    expected = [
        (svc.name, src) for svc in manifest.services for src, _ in svc.config_templates
    ]
    if len(expected) != len(rendered):
        raise ValueError("rendered configs do not match the manifest's template list")
    out: dict[str, list[RenderedConfig]] = {}
    for (service, _), config in zip(expected, rendered):
        out.setdefault(service, []).append(config)
    return out


def compose_fragment(
    svc: ServiceSpec,
    stack: str,
    rendered: list[RenderedConfig],
    plan: AddressPlan,
) -> tuple[str, str]:
    """Minimal compose document for one delegated RAN service.

    Returns (fragment text, fragment id); the id is the content hash the
    remote host's Up event will reference.
    """
    doc: dict = {
        "service": svc.name,
        "stack": stack,
        "image": svc.image,
        "role": svc.role.value,
    }
    if svc.command_override is not None:
        doc["command"] = svc.command_override
    if rendered:
        doc["configs"] = [
            [cfg.target_path, FileRef.from_content(cfg.target_path, cfg.content).sha256]
            for cfg in rendered
        ]
    networks = []
    assigned = {(a.service, a.network): a for a in plan.assignments}
    for att in svc.attachments:
        entry: dict = {"network": att.network}
        assignment = assigned.get((svc.name, att.network))
        if assignment is not None:
            entry["ip"] = assignment.address
            entry["mac"] = assignment.mac
        networks.append(entry)
    if networks:
        doc["networks"] = networks
    text = yamlish.dump(doc)
    return text, hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def delegate_ran_service(
    svc: ServiceSpec,
    registry: HostRegistry,
    rendered: list[RenderedConfig],
    *,
    stack: str,
    address_plan: AddressPlan,
) -> list[tuple[str, EngineAction]]:
    """Delegation sequence for one RAN service.

    Local target: a single start on the controller. Remote target: release
    each assigned static address in manifest order, re-home the container
    onto the default bridge, transfer the rendered files, and run compose
    on the remote daemon.
    """
    if svc.role is not Role.RAN:
        raise ValueError(f"service {svc.name!r} is not a RAN service")
    controller = registry.controller
    if svc.target_host in (LOCAL_HOST_NAME, controller):
        return [(controller, StartContainer(container=svc.name))]
    if registry.get(svc.target_host) is None:
        raise UnknownHostError(svc.target_host)

    actions: list[tuple[str, EngineAction]] = []
    for att in svc.attachments:
        actions.append((controller, DisconnectNetwork(container=svc.name, network=att.network)))
    actions.append((controller, ConnectNetwork(container=svc.name, network=DEFAULT_BRIDGE)))
    files = tuple(FileRef.from_content(cfg.target_path, cfg.content) for cfg in rendered)
    actions.append((svc.target_host, TransferFiles(host=svc.target_host, files=files)))
    fragment, fragment_id = compose_fragment(svc, stack, rendered, address_plan)
    actions.append(
        (svc.target_host, RemoteComposeUp(host=svc.target_host, fragment=fragment, fragment_id=fragment_id))
    )
    return actions


def plan_deployment(
    manifest: StackManifest,
    settings: ResolvedSettings,
    networks: NetworkCatalog,
    registry: HostRegistry,
    seeds: SeedSet,
    rendered: list[RenderedConfig],
) -> DeploymentPlan:
    """Order every engine action needed to bring a validated stack up.

    Networks first, then each service (create, connect, start or delegate)
    in dependency order, with the subscriber seed exec right after the
    database service starts.
    """
    controller = registry.controller
    address_plan = build_address_plan(manifest, settings)
    assigned = {(a.service, a.network): a for a in address_plan.assignments}
    by_service = _rendered_by_service(manifest, rendered)

    actions: list[tuple[str, EngineAction]] = []
    delegations: dict[str, tuple[tuple[str, EngineAction], ...]] = {}
    networks_by_host: dict[str, list[str]] = {controller: []}

    for net_name in manifest.networks:
        spec = networks.get(net_name)
        if spec is None:
            raise PlanningError(f"network {net_name!r} not in the catalog")
        actions.append((controller, CreateNetwork(spec=spec, stack=manifest.name)))
        networks_by_host[controller].append(net_name)

    placements = []
    for svc in topological_order(manifest.services):
        svc_rendered = by_service.get(svc.name, [])
        descriptor = ContainerDescriptor(
            name=svc.name,
            image=svc.image,
            stack=manifest.name,
            service=svc.name,
            role=svc.role.value,
            command=svc.command_override,
            config_files=tuple(
                FileRef.from_content(cfg.target_path, cfg.content) for cfg in svc_rendered
            ),
        )
        actions.append((controller, CreateContainer(descriptor=descriptor)))
        for att in svc.attachments:
            assignment = assigned.get((svc.name, att.network))
            actions.append(
                (
                    controller,
                    ConnectNetwork(
                        container=svc.name,
                        network=att.network,
                        static_ip=assignment.address if assignment else None,
                        mac=assignment.mac if assignment else None,
                    ),
                )
            )
        if svc.role is Role.RAN:
            sub = delegate_ran_service(
                svc, registry, svc_rendered, stack=manifest.name, address_plan=address_plan
            )
            actions.extend(sub)
            delegations[svc.name] = tuple(sub)
            placement_host = _resolve_host(svc.target_host, registry)
            if placement_host != controller:
                nets = networks_by_host.setdefault(placement_host, [])
                for att in svc.attachments:
                    if att.network not in nets:
                        nets.append(att.network)
        else:
            actions.append((controller, StartContainer(container=svc.name)))
            placement_host = controller
        if svc.role is Role.DB:
            actions.append(
                (
                    controller,
                    Exec(
                        container=svc.name,
                        command=(SEED_EXEC_COMMAND, "load", seeds.canonical_document()),
                    ),
                )
            )
        placements.append(Placement(service=svc.name, role=svc.role, host=placement_host))

    return DeploymentPlan(
        stack=manifest.name,
        actions=actions,
        seed=seeds,
        placements=tuple(placements),
        delegations=delegations,
        networks_by_host=networks_by_host,
    )


# --- conformance helpers (used by tests and the validate surface) -----------------

def delegation_matches_pattern(
    sub: tuple[tuple[str, EngineAction], ...], svc: ServiceSpec, registry: HostRegistry
) -> bool:
    """True iff a delegation sub-sequence has the exact required shape."""
    if svc.target_host in (LOCAL_HOST_NAME, registry.controller):
        return len(sub) == 1 and isinstance(sub[0][1], StartContainer)
    expected_nets = [att.network for att in svc.attachments]
    if len(sub) != len(expected_nets) + 3:
        return False
    for (_, action), net in zip(sub, expected_nets):
        if not isinstance(action, DisconnectNetwork) or action.network != net:
            return False
    bridge = sub[len(expected_nets)][1]
    if not isinstance(bridge, ConnectNetwork) or bridge.network != DEFAULT_BRIDGE:
        return False
    transfer = sub[len(expected_nets) + 1][1]
    if not isinstance(transfer, TransferFiles) or transfer.host != svc.target_host:
        return False
    up = sub[len(expected_nets) + 2][1]
    return isinstance(up, RemoteComposeUp) and up.host == svc.target_host


def is_contiguous_slice(plan: DeploymentPlan, sub: tuple[tuple[str, EngineAction], ...]) -> bool:
    n = len(sub)
    for i in range(len(plan.actions) - n + 1):
        if tuple(plan.actions[i : i + n]) == sub:
            return True
    return False


# --- lifecycle ------------------------------------------------------------------------


class Orchestrator:
    """Single mutation owner: all lifecycle transitions run serialized."""

    def __init__(
        self,
        *,
        catalog: StackCatalog,
        networks: NetworkCatalog,
        registry: HostRegistry,
        global_settings: SettingsMap,
        subscriber_records: list[SubscriberRecord],
        endpoints: Mapping[str, EngineClient],
        template_root: Path,
    ):
        self.catalog = catalog
        self.networks = networks
        self.registry = registry
        self.global_settings = global_settings
        self.subscriber_records = subscriber_records
        self.endpoints = dict(endpoints)
        self.template_root = Path(template_root)
        self.sessions: list[StackSession] = []
        self._lock = threading.RLock()

    # -- queries -----------------------------------------------------------

    def active_session(self) -> StackSession | None:
        with self._lock:
            for session in reversed(self.sessions):
                if session.state in ACTIVE_STATES:
                    return session
        return None

    def last_session(self) -> StackSession | None:
        with self._lock:
            return self.sessions[-1] if self.sessions else None

    def endpoint_for(self, host: str) -> EngineClient:
        name = _resolve_host(host, self.registry)
        if name not in self.endpoints:
            raise UnknownHostError(name)
        return self.endpoints[name]

    # -- validation pipeline shared by start and the validate surface ------------

    def prepare(
        self, name: str, emulated: bool = False
    ) -> tuple[StackManifest, ResolvedSettings, ValidationReport, list]:
        manifest = self.catalog.get(name)
        if manifest is None:
            raise UnknownStackError(name)
        if emulated:
            manifest = emulated_variant(manifest)
        resolved = resolve_settings(self.global_settings, manifest.overrides)
        report = validate_manifest(manifest, self.networks, self.registry, resolved)
        plmn = plmn_from_settings(resolved)
        for record in self.subscriber_records:
            report.extend(validate_subscriber(record, plmn))
        conflicts = []
        if report.ok:
            conflicts = check_address_plan(build_address_plan(manifest, resolved), self.networks)
            for conflict in conflicts:
                report.error(conflict.code, conflict.network, conflict.message)
        return manifest, resolved, report, conflicts

    # -- lifecycle ----------------------------------------------------------------

    def start_stack(
        self, name: str, policy: Policy = Policy.REJECT_IF_ACTIVE, emulated: bool = False
    ) -> StackSession:
        with self._lock:
            active = self.active_session()
            if active is not None and policy is Policy.REJECT_IF_ACTIVE:
                raise StackAlreadyActiveError(active.stack)

            manifest, resolved, report, _ = self.prepare(name, emulated=emulated)
            try:
                rendered = render_stack(manifest, resolved, self.template_root)
            except RenderError as exc:
                report.error("RENDER_ERROR", exc.service, str(exc))
                rendered = []
            seed = None
            if report.ok:
                try:
                    seed = build_seed_set(self.subscriber_records, plmn_from_settings(resolved))
                except DuplicateImsiError as exc:
                    report.error("DUPLICATE_IMSI", exc.imsi, str(exc))
            if not report.ok:
                raise ValidationFailedError(report)

            plan = plan_deployment(
                manifest, resolved, self.networks, self.registry, seed, rendered
            )

            # Only now, with the successor fully validated, replace the
            # predecessor: it must be completely gone before the first action.
            if active is not None:
                self.stop_stack(active)
            if policy is Policy.REPLACE_ACTIVE:
                # FAILED sessions hold partial engine state; reap them too.
                for previous in list(self.sessions):
                    if previous.state is SessionState.FAILED:
                        self.stop_stack(previous)

            session = StackSession(
                id=next(_session_ids),
                stack=manifest.name,
                state=SessionState.STARTING,
                started_at=time.time(),
                plan=plan,
            )
            self.sessions.append(session)
            for host, action in plan.actions:
                try:
                    self.endpoint_for(host).apply(action)
                except EngineError as exc:
                    session.state = SessionState.FAILED
                    session.error = f"{type(action).__name__}: {exc}"
                    raise EngineFailureError(action, exc) from exc
            session.state = SessionState.RUNNING
            return session

    def stop_stack(self, session: StackSession | None = None) -> None:
        """Stop and remove every container and network of a session's stack.

        Best-effort: failures are collected and reported at the end.
        Idempotent: stopping a STOPPED session does nothing.
        """
        with self._lock:
            if session is None:
                session = self.active_session() or self.last_session()
            if session is None or session.state in (SessionState.STOPPED, SessionState.STOPPING):
                return
            session.state = SessionState.STOPPING
            failures: list[tuple[EngineAction, Exception]] = []
            controller = self.registry.controller
            stack = session.stack

            # Dependents stop before their dependencies: reverse plan order.
            for placement in reversed(session.plan.placements):
                hosts = [placement.host]
                if placement.host != controller:
                    hosts.append(controller)  # the delegated service's controller-side container
                for host in hosts:
                    self._reap_container(host, placement.service, failures)

            # Anything the plan does not know about (defensive sweep).
            for host in self._involved_hosts(session):
                client = self.endpoints.get(host)
                if client is None:
                    continue
                try:
                    leftovers = client.query(stack)
                except EngineError:
                    continue
                for status in leftovers:
                    self._reap_container(host, status.service, failures)

            for host, nets in session.plan.networks_by_host.items():
                client = self.endpoints.get(host)
                if client is None:
                    continue
                for net in nets:
                    action = RemoveNetwork(network=net)
                    try:
                        client.apply(action)
                    except NotFoundError:
                        pass  # never created (failed start) or already gone
                    except EngineError as exc:
                        failures.append((action, exc))

            session.state = SessionState.STOPPED
            if failures:
                action, cause = failures[0]
                raise EngineFailureError(action, cause)

    def _involved_hosts(self, session: StackSession) -> list[str]:
        hosts = [self.registry.controller]
        for placement in session.plan.placements:
            if placement.host not in hosts:
                hosts.append(placement.host)
        return hosts

    def _reap_container(self, host: str, name: str, failures: list) -> None:
        try:
            client = self.endpoint_for(host)
        except UnknownHostError:
            return
        for action in (StopContainer(container=name), RemoveContainer(container=name)):
            try:
                client.apply(action)
            except NotFoundError:
                return  # already gone; nothing left to remove
            except EngineError as exc:
                failures.append((action, exc))
                return
