"""Wiring: load config files, build engine endpoints and the orchestrator.

One AppContext backs both the CLI and the HTTP API, so `start` through
either surface reaches the identical orchestrator entry point.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from . import defaults
from .engine import EngineClient
from .errors import StackAlreadyActiveError, ValidationFailedError
from .hosts import HostRegistry, parse_host_registry
from .netplan import NetworkCatalog, parse_network_catalog, validate_networks
from .orchestrator import Orchestrator
from .settings import SettingsMap, parse_env_file, serialize_env, validate_setting_values
from .sim import SimulatedHub
from .stacks import StackCatalog, load_catalog
from .subscribers import SubscriberRecord, subscribers_from_settings
from .validation import Finding


@dataclass
class AppContext:
    catalog: StackCatalog
    catalog_findings: list[Finding]
    networks: NetworkCatalog
    registry: HostRegistry
    global_settings: SettingsMap
    subscriber_records: list[SubscriberRecord]
    template_root: Path
    hub: SimulatedHub
    orchestrator: Orchestrator
    catalog_dir: Path
    settings_path: Path | None = None
    endpoints: dict[str, EngineClient] = field(default_factory=dict)

    def update_settings(self, values: dict[str, str], require_idle: bool = False) -> SettingsMap:
        """Replace the global settings; persists when a file path is configured.

        Runs under the orchestrator's lock so an update can never interleave
        with an in-flight start; `require_idle` additionally refuses the
        update while a session is active.
        """
        new_map = SettingsMap.from_pairs(tuple(values.items()))
        report = validate_setting_values(new_map)
        if not report.ok:
            raise ValidationFailedError(report)
        with self.orchestrator._lock:
            if require_idle and self.orchestrator.active_session() is not None:
                raise StackAlreadyActiveError(self.orchestrator.active_session().stack)
            self.global_settings = new_map
            self.orchestrator.global_settings = new_map
            if self.settings_path is not None:
                self.settings_path.write_text(serialize_env(new_map), encoding="utf-8")
        return new_map


def build_context(
    catalog_dir: Path | None = None,
    settings_path: Path | None = None,
    networks_path: Path | None = None,
    hosts_path: Path | None = None,
    subscribers_path: Path | None = None,
    template_root: Path | None = None,
    sim_log_lines: int | None = None,
) -> AppContext:
    """Assemble a context from files, falling back to the shipped defaults.

    Settings edits persist only to an explicitly configured settings file;
    the packaged defaults stay read-only and edits on top of them live in
    memory for the session.
    """
    catalog_dir = Path(catalog_dir or defaults.default_catalog_dir())
    explicit_settings = settings_path is not None
    settings_path = Path(settings_path) if settings_path else defaults.default_settings_path()
    networks_path = Path(networks_path) if networks_path else defaults.default_networks_path()
    hosts_path = Path(hosts_path) if hosts_path else defaults.default_hosts_path()
    subscribers_path = (
        Path(subscribers_path) if subscribers_path else defaults.default_subscribers_path()
    )
    template_root = Path(template_root) if template_root else defaults.default_template_root()
    if sim_log_lines is None:
        sim_log_lines = int(os.environ.get("CUBE_SIM_LOG_LINES", "3"))

    catalog, findings = load_catalog(catalog_dir)
    networks = parse_network_catalog(networks_path.read_text(encoding="utf-8"))
    network_report = validate_networks(networks)
    if not network_report.ok:
        raise ValidationFailedError(network_report)
    registry = parse_host_registry(hosts_path.read_text(encoding="utf-8"))
    global_settings = parse_env_file(settings_path.read_text(encoding="utf-8"))
    subscriber_records = subscribers_from_settings(
        parse_env_file(subscribers_path.read_text(encoding="utf-8"))
    )

    hub = SimulatedHub(hosts=registry.names(), log_lines=sim_log_lines)
    endpoints: dict[str, EngineClient] = dict(hub.endpoints)
    orchestrator = Orchestrator(
        catalog=catalog,
        networks=networks,
        registry=registry,
        global_settings=global_settings,
        subscriber_records=subscriber_records,
        endpoints=endpoints,
        template_root=template_root,
    )
    return AppContext(
        catalog=catalog,
        catalog_findings=findings,
        networks=networks,
        registry=registry,
        global_settings=global_settings,
        subscriber_records=subscriber_records,
        template_root=template_root,
        hub=hub,
        orchestrator=orchestrator,
        catalog_dir=catalog_dir,
        settings_path=settings_path if explicit_settings else None,
        endpoints=endpoints,
    )


def context_from_env(env: dict[str, str] | None = None) -> AppContext:
    """Context from `CUBE_*` environment variables (unset means defaults)."""
    env = dict(os.environ if env is None else env)
    return build_context(
        catalog_dir=env.get("CUBE_CATALOG"),
        settings_path=env.get("CUBE_SETTINGS"),
        networks_path=env.get("CUBE_NETWORKS"),
        hosts_path=env.get("CUBE_HOSTS"),
        subscribers_path=env.get("CUBE_SUBSCRIBERS"),
        sim_log_lines=int(env["CUBE_SIM_LOG_LINES"]) if "CUBE_SIM_LOG_LINES" in env else None,
    )
