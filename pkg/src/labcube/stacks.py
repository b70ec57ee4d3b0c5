"""Stack manifests: parsing, validation, and the shipped catalog.

A stack is a named composition of containerized mobile-network services
realizing one lab scenario. Manifests are YAML-subset documents; unknown
keys are errors, not warnings, so a typo in a lab config never slips
through silently.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from . import yamlish
from .errors import CycleError, DuplicateServiceError, SchemaError
from .hosts import HostRegistry
from .netplan import NetworkCatalog, build_address_plan
from .settings import KEY_RE, ResolvedSettings, SettingsMap
from .validation import Finding, Severity, ValidationReport

NAME_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9_.-]*")

LOCAL_HOST_NAME = "controller"


class Generation(str, Enum):
    G2 = "2g"
    G4 = "4g"
    G5SA = "5g-sa"
    EMULATED = "emulated"


class Role(str, Enum):
    CORE_NF = "core"
    RAN = "ran"
    IMS = "ims"
    DB = "db"
    UTIL = "util"


@dataclass(frozen=True)
class NetworkAttachment:
    network: str
    static_ip: str | None = None
    ip_setting_key: str | None = None

    def __post_init__(self):
        if self.static_ip is not None and self.ip_setting_key is not None:
            raise SchemaError(self.network, "static_ip and ip_key are mutually exclusive")


@dataclass(frozen=True)
class ServiceSpec:
    name: str
    image: str
    role: Role
    attachments: tuple[NetworkAttachment, ...] = ()
    config_templates: tuple[tuple[str, str], ...] = ()
    target_host: str = LOCAL_HOST_NAME
    depends_on: tuple[str, ...] = ()
    command_override: str | None = None


@dataclass(frozen=True)
class StackManifest:
    name: str
    description: str
    generation: Generation
    services: tuple[ServiceSpec, ...]
    networks: tuple[str, ...] = ()
    overrides: SettingsMap = field(default_factory=SettingsMap)

    def service(self, name: str) -> ServiceSpec | None:
        for svc in self.services:
            if svc.name == name:
                return svc
        return None


@dataclass(frozen=True)
class CatalogItem:
    manifest: StackManifest
    source_path: str


@dataclass(frozen=True)
class StackCatalog:
    entries: tuple[CatalogItem, ...]

    def get(self, name: str) -> StackManifest | None:
        for item in self.entries:
            if item.manifest.name == name:
                return item.manifest
        return None

    def names(self) -> list[str]:
        return [item.manifest.name for item in self.entries]


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    generation: Generation
    description: str
    service_count: int
    source_path: str


@dataclass
class CatalogListing:
    entries: list[CatalogEntry]
    findings: list[Finding]


# --- parsing -----------------------------------------------------------------

_TOP_KEYS = {"name", "description", "generation", "networks", "overrides", "services"}
_SERVICE_KEYS = {"image", "role", "target_host", "depends_on", "attachments", "templates", "command"}
_ATTACHMENT_KEYS = {"network", "static_ip", "ip_key"}


def _expect_str(value, field_name: str) -> str:
    if not isinstance(value, str):
        raise SchemaError(field_name, "expected a string")
    return value


def _expect_name(value, field_name: str) -> str:
    text = _expect_str(value, field_name)
    if not NAME_RE.fullmatch(text):
        raise SchemaError(field_name, f"{text!r} is not a valid identifier")
    return text


def _expect_list(value, field_name: str) -> list:
    if value is None:
        return []
    if not isinstance(value, list):
        raise SchemaError(field_name, "expected a sequence")
    return value


def _parse_attachment(raw, where: str) -> NetworkAttachment:
    if not isinstance(raw, dict):
        raise SchemaError(where, "expected a mapping")
    extra = set(raw) - _ATTACHMENT_KEYS
    if extra:
        raise SchemaError(f"{where}.{sorted(extra)[0]}", "unknown key")
    network = _expect_name(raw.get("network"), f"{where}.network")
    static_ip = raw.get("static_ip")
    ip_key = raw.get("ip_key")
    if static_ip is not None and ip_key is not None:
        raise SchemaError(where, "static_ip and ip_key are mutually exclusive")
    if ip_key is not None and not KEY_RE.fullmatch(ip_key):
        raise SchemaError(f"{where}.ip_key", f"{ip_key!r} is not a valid settings key")
    return NetworkAttachment(network=network, static_ip=static_ip, ip_setting_key=ip_key)


def _parse_service(name: str, raw, networks: tuple[str, ...]) -> ServiceSpec:
    where = f"services.{name}"
    _expect_name(name, where)
    if not isinstance(raw, dict):
        raise SchemaError(where, "expected a mapping")
    extra = set(raw) - _SERVICE_KEYS
    if extra:
        raise SchemaError(f"{where}.{sorted(extra)[0]}", "unknown key")
    image = _expect_str(raw.get("image"), f"{where}.image")
    try:
        role = Role(raw.get("role", ""))
    except ValueError:
        raise SchemaError(f"{where}.role", f"unknown role {raw.get('role')!r}")
    target_host = raw.get("target_host", LOCAL_HOST_NAME)
    _expect_name(target_host, f"{where}.target_host")
    if target_host != LOCAL_HOST_NAME and role is not Role.RAN:
        raise SchemaError(f"{where}.target_host", "only RAN services may target another host")

    depends = tuple(
        _expect_name(dep, f"{where}.depends_on") for dep in _expect_list(raw.get("depends_on"), f"{where}.depends_on")
    )

    attachments = []
    seen_networks: set[str] = set()
    for idx, entry in enumerate(_expect_list(raw.get("attachments"), f"{where}.attachments")):
        att = _parse_attachment(entry, f"{where}.attachments[{idx}]")
        if att.network in seen_networks:
            raise SchemaError(f"{where}.attachments", f"network {att.network!r} attached twice")
        seen_networks.add(att.network)
        if att.network not in networks:
            raise SchemaError(
                f"{where}.attachments",
                f"network {att.network!r} is not listed under the stack's networks",
            )
        attachments.append(att)

    templates = []
    for idx, entry in enumerate(_expect_list(raw.get("templates"), f"{where}.templates")):
        if not isinstance(entry, list) or len(entry) != 2:
            raise SchemaError(f"{where}.templates[{idx}]", "expected a [source, target] pair")
        templates.append((_expect_str(entry[0], "src"), _expect_str(entry[1], "dst")))

    command = raw.get("command")
    if command is not None:
        command = _expect_str(command, f"{where}.command")

    return ServiceSpec(
        name=name,
        image=image,
        role=role,
        attachments=tuple(attachments),
        config_templates=tuple(templates),
        target_host=target_host,
        depends_on=depends,
        command_override=command,
    )


def parse_manifest(text: str) -> StackManifest:
    """Parse one manifest document; values come back byte-identical.

    Raises DocumentSyntaxError for malformed documents, SchemaError for
    schema violations, DuplicateServiceError for a repeated service name.
    """
    try:
        doc = yamlish.load_mapping(text)
    except yamlish.DuplicateKeyError as exc:
        if exc.path == ("services",):
            raise DuplicateServiceError(exc.key) from exc
        raise SchemaError("/".join(exc.path) or "document", f"duplicate key {exc.key!r}") from exc

    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise SchemaError(sorted(unknown)[0], "unknown top-level key")
    name = _expect_name(doc.get("name"), "name")
    description = doc.get("description", "")
    if not isinstance(description, str):
        raise SchemaError("description", "expected a string")
    try:
        generation = Generation(doc.get("generation", ""))
    except ValueError:
        raise SchemaError("generation", f"unknown generation {doc.get('generation')!r}")

    networks = []
    for net in _expect_list(doc.get("networks"), "networks"):
        net = _expect_name(net, "networks")
        if net in networks:
            raise SchemaError("networks", f"network {net!r} listed twice")
        networks.append(net)
    networks = tuple(networks)

    overrides_raw = doc.get("overrides") or {}
    if not isinstance(overrides_raw, dict):
        raise SchemaError("overrides", "expected a mapping")
    for key, value in overrides_raw.items():
        if not KEY_RE.fullmatch(key):
            raise SchemaError(f"overrides.{key}", "invalid settings key")
        if not isinstance(value, str):
            raise SchemaError(f"overrides.{key}", "expected a string value")
    overrides = SettingsMap(entries=tuple(overrides_raw.items()))

    services_raw = doc.get("services")
    if not isinstance(services_raw, dict) or not services_raw:
        raise SchemaError("services", "at least one service is required")
    services = tuple(
        _parse_service(svc_name, raw, networks) for svc_name, raw in services_raw.items()
    )

    known = {svc.name for svc in services}
    for svc in services:
        for dep in svc.depends_on:
            if dep not in known:
                raise SchemaError(f"services.{svc.name}.depends_on", f"unknown service {dep!r}")

    manifest = StackManifest(
        name=name,
        description=description,
        generation=generation,
        services=services,
        networks=networks,
        overrides=overrides,
    )
    try:
        topological_order(manifest.services)
    except CycleError as exc:
        raise SchemaError("services", str(exc)) from exc
    return manifest


def serialize_manifest(manifest: StackManifest) -> str:
    """Emit the canonical document form; parse(serialize(m)) == m."""
    doc: dict = {
        "name": manifest.name,
        "description": manifest.description,
        "generation": manifest.generation.value,
    }
    if manifest.networks:
        doc["networks"] = list(manifest.networks)
    if manifest.overrides.entries:
        doc["overrides"] = dict(manifest.overrides.entries)
    services: dict = {}
    for svc in manifest.services:
        body: dict = {"image": svc.image, "role": svc.role.value}
        if svc.target_host != LOCAL_HOST_NAME:
            body["target_host"] = svc.target_host
        if svc.depends_on:
            body["depends_on"] = list(svc.depends_on)
        if svc.attachments:
            atts = []
            for att in svc.attachments:
                entry = {"network": att.network}
                if att.static_ip is not None:
                    entry["static_ip"] = att.static_ip
                if att.ip_setting_key is not None:
                    entry["ip_key"] = att.ip_setting_key
                atts.append(entry)
            body["attachments"] = atts
        if svc.config_templates:
            body["templates"] = [list(pair) for pair in svc.config_templates]
        if svc.command_override is not None:
            body["command"] = svc.command_override
        services[svc.name] = body
    doc["services"] = services
    return yamlish.dump(doc)


def manifest_to_dict(manifest: StackManifest) -> dict:
    """JSON-friendly view used by the HTTP API."""
    return {
        "name": manifest.name,
        "description": manifest.description,
        "generation": manifest.generation.value,
        "networks": list(manifest.networks),
        "overrides": dict(manifest.overrides.entries),
        "services": [
            {
                "name": svc.name,
                "image": svc.image,
                "role": svc.role.value,
                "target_host": svc.target_host,
                "depends_on": list(svc.depends_on),
                "attachments": [
                    {
                        "network": att.network,
                        "static_ip": att.static_ip,
                        "ip_key": att.ip_setting_key,
                    }
                    for att in svc.attachments
                ],
                "templates": [list(pair) for pair in svc.config_templates],
                "command": svc.command_override,
            }
            for svc in manifest.services
        ],
    }


# --- dependency order -----------------------------------------------------------

def topological_order(services: tuple[ServiceSpec, ...]) -> list[ServiceSpec]:
    """Stable topological order: ties resolve to manifest order."""
    index = {svc.name: i for i, svc in enumerate(services)}
    remaining = {svc.name: set(svc.depends_on) for svc in services}
    ordered: list[ServiceSpec] = []
    done: set[str] = set()
    while remaining:
        ready = sorted(
            (name for name, deps in remaining.items() if deps <= done),
            key=lambda name: index[name],
        )
        if not ready:
            chain = _find_cycle(remaining)
            raise CycleError(chain)
        for name in ready:
            ordered.append(services[index[name]])
            done.add(name)
            del remaining[name]
    return ordered


def _find_cycle(remaining: dict[str, set[str]]) -> list[str]:
    start = sorted(remaining)[0]
    seen: list[str] = []
    node = start
    while node not in seen:
        seen.append(node)
        successors = sorted(dep for dep in remaining.get(node, ()) if dep in remaining)
        if not successors:
            break
        node = successors[0]
    if node in seen:
        return seen[seen.index(node) :] + [node]
    return seen


# --- validation --------------------------------------------------------------------

def validate_manifest(
    manifest: StackManifest,
    networks: NetworkCatalog,
    hosts: HostRegistry,
    settings: ResolvedSettings,
) -> ValidationReport:
    """Check a manifest against the network catalog, host registry, and settings.

    Findings are data; an empty report means the stack is deployable.
    """
    report = ValidationReport()
    for net in manifest.networks:
        if networks.get(net) is None:
            report.error("UNKNOWN_NETWORK", net, f"network {net!r} not in the catalog")
    for svc in manifest.services:
        # The literal "controller" is always an alias for the registry's
        # controller host, whatever it is actually named.
        local = svc.target_host == LOCAL_HOST_NAME or svc.target_host == hosts.controller
        if not local and hosts.get(svc.target_host) is None:
            report.error(
                "UNKNOWN_HOST", svc.name, f"target host {svc.target_host!r} not registered"
            )
        if not local and svc.role is not Role.RAN:
            report.error(
                "REMOTE_REQUIRES_RAN", svc.name, "only RAN services may run on a RAN host"
            )
        for att in svc.attachments:
            if att.network not in manifest.networks:
                report.error(
                    "UNLISTED_NETWORK",
                    svc.name,
                    f"attachment references {att.network!r}, not listed by the stack",
                )
            if att.ip_setting_key is not None and att.ip_setting_key not in settings.effective:
                report.error(
                    "UNRESOLVED_ADDRESS_KEY",
                    svc.name,
                    f"settings key {att.ip_setting_key!r} is not defined",
                )
            if att.static_ip is None and att.ip_setting_key is None and svc.role is not Role.UTIL:
                report.error(
                    "DYNAMIC_ADDRESS_FORBIDDEN",
                    svc.name,
                    f"{svc.role.value} service needs a static address on {att.network!r}",
                )
    try:
        build_address_plan(manifest, settings)
    except Exception as exc:  # address errors already reported above or malformed values
        if not report.findings:
            report.error("BAD_ADDRESS", manifest.name, str(exc))
    return report


# --- catalog --------------------------------------------------------------------------

def load_catalog(catalog_root: Path) -> tuple[StackCatalog, list[Finding]]:
    """Load every manifest under a directory.

    Unparseable files become findings, never silent omissions. A duplicate
    stack name across files is a SchemaError: the catalog would be ambiguous.
    """
    catalog_root = Path(catalog_root)
    if not catalog_root.is_dir():
        raise FileNotFoundError(str(catalog_root))
    items: list[CatalogItem] = []
    findings: list[Finding] = []
    for path in sorted(catalog_root.glob("*.yaml")) + sorted(catalog_root.glob("*.yml")):
        try:
            manifest = parse_manifest(path.read_text(encoding="utf-8"))
        except Exception as exc:
            findings.append(
                Finding(Severity.ERROR, "PARSE_ERROR", path.name, str(exc))
            )
            continue
        items.append(CatalogItem(manifest=manifest, source_path=str(path)))
    names = [item.manifest.name for item in items]
    for name in names:
        if names.count(name) > 1:
            raise SchemaError("catalog", f"stack name {name!r} appears in multiple files")
    items.sort(key=lambda item: item.manifest.name)
    return StackCatalog(entries=tuple(items)), findings


def list_catalog(catalog_root: Path) -> CatalogListing:
    """One entry per manifest file, sorted by name, plus parse findings."""
    catalog, findings = load_catalog(catalog_root)
    entries = [
        CatalogEntry(
            name=item.manifest.name,
            generation=item.manifest.generation,
            description=item.manifest.description,
            service_count=len(item.manifest.services),
            source_path=item.source_path,
        )
        for item in catalog.entries
    ]
    return CatalogListing(entries=entries, findings=findings)


# --- emulated variant --------------------------------------------------------------------

EMULATED_RAN_IMAGE = "ueransim:3.2.6"


def emulated_variant(manifest: StackManifest) -> StackManifest:
    """Swap the RAN service for a software UE+RAN pair (5G SA stacks only).

    The software gNB inherits the hardware gNB's non-SDR attachments and
    runs on the controller; a software UE joins it with an engine-assigned
    address.
    """
    if manifest.generation is not Generation.G5SA:
        raise SchemaError("generation", "emulated variant exists for 5g-sa stacks only")
    ran_services = [svc for svc in manifest.services if svc.role is Role.RAN]
    if not ran_services:
        raise SchemaError("services", "stack has no RAN service to swap")
    taken = {svc.name for svc in manifest.services}
    if "gnb-sim" in taken or "ue-sim" in taken:
        raise SchemaError("services", "service names gnb-sim/ue-sim are reserved")

    ran_names = {svc.name for svc in ran_services}
    sdr_networks = {"rfnet"}
    first = ran_services[0]
    inherited = tuple(att for att in first.attachments if att.network not in sdr_networks)
    gnb_sim = ServiceSpec(
        name="gnb-sim",
        image=EMULATED_RAN_IMAGE,
        role=Role.RAN,
        attachments=inherited,
        config_templates=(("ueransim/gnb.yaml", "/etc/ueransim/gnb.yaml"),),
        target_host=LOCAL_HOST_NAME,
        depends_on=tuple(dep for dep in first.depends_on if dep not in ran_names),
    )
    ue_networks = tuple(
        NetworkAttachment(network=att.network) for att in inherited[:1]
    )
    ue_sim = ServiceSpec(
        name="ue-sim",
        image=EMULATED_RAN_IMAGE,
        role=Role.UTIL,
        attachments=ue_networks,
        config_templates=(("ueransim/ue.yaml", "/etc/ueransim/ue.yaml"),),
        depends_on=("gnb-sim",),
    )
    services = []
    for svc in manifest.services:
        if svc.role is Role.RAN:
            continue
        if any(dep in ran_names for dep in svc.depends_on):
            deps = tuple(dep if dep not in ran_names else "gnb-sim" for dep in svc.depends_on)
            svc = ServiceSpec(
                name=svc.name,
                image=svc.image,
                role=svc.role,
                attachments=svc.attachments,
                config_templates=svc.config_templates,
                target_host=svc.target_host,
                depends_on=deps,
                command_override=svc.command_override,
            )
        services.append(svc)
    services.extend([gnb_sim, ue_sim])
    used_networks = {att.network for svc in services for att in svc.attachments}
    return StackManifest(
        name=manifest.name + "-emulated",
        description=manifest.description + " (software UE+RAN)",
        generation=Generation.EMULATED,
        services=tuple(services),
        networks=tuple(net for net in manifest.networks if net in used_networks),
        overrides=manifest.overrides,
    )
