"""The lab's virtual networks and the static address plan.

The lab runs three networks: a macvlan 802.1q trunk carrying the core
functions with fixed IPs, a WAN-bridged network for egress, and an isolated
network for SDR transport. Services pin their addresses through settings
keys so a whole stack's addressing lives in one file.
"""

from __future__ import annotations

import hashlib
import ipaddress
from dataclasses import dataclass
from enum import Enum

from . import yamlish
from .errors import SchemaError, UnparsableAddressError, UnresolvedAddressKeyError
from .settings import ResolvedSettings
from .validation import ValidationReport


class NetworkKind(str, Enum):
    MACVLAN_TRUNK = "macvlan-trunk"
    BRIDGE_WAN = "bridge-wan"
    ISOLATED = "isolated"


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    kind: NetworkKind
    subnet: str
    gateway: str | None = None
    vlan_id: int | None = None

    def network(self) -> ipaddress.IPv4Network:
        return ipaddress.IPv4Network(self.subnet)


@dataclass(frozen=True)
class NetworkCatalog:
    networks: tuple[NetworkSpec, ...]

    def get(self, name: str) -> NetworkSpec | None:
        for spec in self.networks:
            if spec.name == name:
                return spec
        return None

    def names(self) -> list[str]:
        return [spec.name for spec in self.networks]


@dataclass(frozen=True)
class Assignment:
    service: str
    network: str
    address: str
    mac: str


@dataclass(frozen=True)
class AddressPlan:
    assignments: tuple[Assignment, ...]


@dataclass(frozen=True)
class Conflict:
    code: str  # DUPLICATE | OUT_OF_SUBNET | GATEWAY_COLLISION
    network: str
    address: str
    services: tuple[str, ...]
    message: str

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "network": self.network,
            "address": self.address,
            "services": list(self.services),
            "message": self.message,
        }


def derive_mac(service: str, network: str) -> str:
    """Deterministic locally-administered unicast MAC for one attachment."""
    digest = hashlib.sha256(f"{service}\x00{network}".encode("utf-8")).digest()
    return "02:" + ":".join(f"{b:02x}" for b in digest[:5])


def parse_network_catalog(text: str) -> NetworkCatalog:
    doc = yamlish.load_mapping(text)
    unknown = set(doc) - {"networks"}
    if unknown:
        raise SchemaError(sorted(unknown)[0], "unknown top-level key")
    body = doc.get("networks")
    if not isinstance(body, dict):
        raise SchemaError("networks", "expected a mapping of network name to spec")
    specs = []
    for name, raw in body.items():
        if not isinstance(raw, dict):
            raise SchemaError(f"networks.{name}", "expected a mapping")
        extra = set(raw) - {"kind", "subnet", "gateway", "vlan_id"}
        if extra:
            raise SchemaError(f"networks.{name}.{sorted(extra)[0]}", "unknown key")
        try:
            kind = NetworkKind(raw.get("kind", ""))
        except ValueError:
            raise SchemaError(f"networks.{name}.kind", f"unknown kind {raw.get('kind')!r}")
        subnet = raw.get("subnet")
        if not isinstance(subnet, str):
            raise SchemaError(f"networks.{name}.subnet", "subnet is required")
        try:
            ipaddress.IPv4Network(subnet)
        except ValueError as exc:
            raise SchemaError(f"networks.{name}.subnet", str(exc))
        vlan_raw = raw.get("vlan_id")
        vlan_id: int | None = None
        if vlan_raw is not None:
            if not isinstance(vlan_raw, str) or not vlan_raw.isdigit():
                raise SchemaError(f"networks.{name}.vlan_id", "vlan_id must be an integer")
            vlan_id = int(vlan_raw)
        specs.append(
            NetworkSpec(
                name=name,
                kind=kind,
                subnet=subnet,
                gateway=raw.get("gateway"),
                vlan_id=vlan_id,
            )
        )
    return NetworkCatalog(networks=tuple(specs))


def validate_networks(catalog: NetworkCatalog) -> ValidationReport:
    """Check names, subnet overlap, gateway placement, and vlan usage."""
    report = ValidationReport()
    seen: set[str] = set()
    for spec in catalog.networks:
        if spec.name in seen:
            report.error("DUPLICATE_NAME", spec.name, "network name used twice")
        seen.add(spec.name)

        net = spec.network()
        if spec.gateway is not None:
            try:
                gw = ipaddress.IPv4Address(spec.gateway)
            except ValueError:
                report.error("BAD_GATEWAY", spec.name, f"{spec.gateway!r} is not an IPv4 address")
            else:
                if gw not in net:
                    report.error(
                        "GATEWAY_OUTSIDE_SUBNET",
                        spec.name,
                        f"gateway {spec.gateway} outside {spec.subnet}",
                    )
        has_vlan = spec.vlan_id is not None
        if has_vlan and spec.kind is not NetworkKind.MACVLAN_TRUNK:
            report.error("VLAN_MISUSE", spec.name, "vlan_id is only valid on a macvlan trunk")
        if not has_vlan and spec.kind is NetworkKind.MACVLAN_TRUNK:
            report.error("VLAN_MISUSE", spec.name, "macvlan trunk requires a vlan_id")
        if has_vlan and not 1 <= spec.vlan_id <= 4094:
            report.error("VLAN_RANGE", spec.name, f"vlan_id {spec.vlan_id} outside 1..4094")

    for i, a in enumerate(catalog.networks):
        for b in catalog.networks[i + 1 :]:
            if a.network().overlaps(b.network()):
                report.error(
                    "OVERLAP", f"{a.name}/{b.name}", f"{a.subnet} overlaps {b.subnet}"
                )
    return report


def build_address_plan(manifest, settings: ResolvedSettings) -> AddressPlan:
    """Collect each attachment's static address, from the manifest or settings.

    Attachments with neither a literal address nor a settings key get no
    entry; the engine assigns those dynamically.
    """
    assignments = []
    for service in manifest.services:
        for att in service.attachments:
            if att.static_ip is not None:
                value = att.static_ip
            elif att.ip_setting_key is not None:
                if att.ip_setting_key not in settings.effective:
                    raise UnresolvedAddressKeyError(service.name, att.ip_setting_key)
                value = settings.effective[att.ip_setting_key]
            else:
                continue
            try:
                ipaddress.IPv4Address(value)
            except ValueError:
                raise UnparsableAddressError(service.name, value)
            assignments.append(
                Assignment(
                    service=service.name,
                    network=att.network,
                    address=value,
                    mac=derive_mac(service.name, att.network),
                )
            )
    return AddressPlan(assignments=tuple(assignments))


def check_address_plan(plan: AddressPlan, catalog: NetworkCatalog) -> list[Conflict]:
    """Enumerate duplicate addresses, out-of-subnet addresses, and gateway hits.

    An empty list means the plan is deployable. Subnet and gateway checks
    apply only to networks present in the catalog; duplicates are checked
    regardless.
    """
    conflicts: list[Conflict] = []
    by_slot: dict[tuple[str, str], list[str]] = {}
    for a in plan.assignments:
        by_slot.setdefault((a.network, a.address), []).append(a.service)
    for (network, address), services in by_slot.items():
        if len(services) > 1:
            conflicts.append(
                Conflict(
                    code="DUPLICATE",
                    network=network,
                    address=address,
                    services=tuple(services),
                    message=f"{address} on {network} assigned to {', '.join(services)}",
                )
            )
    for a in plan.assignments:
        spec = catalog.get(a.network)
        if spec is None:
            continue
        if ipaddress.IPv4Address(a.address) not in spec.network():
            conflicts.append(
                Conflict(
                    code="OUT_OF_SUBNET",
                    network=a.network,
                    address=a.address,
                    services=(a.service,),
                    message=f"{a.address} outside {spec.subnet} ({a.network})",
                )
            )
        elif spec.gateway is not None and a.address == spec.gateway:
            conflicts.append(
                Conflict(
                    code="GATEWAY_COLLISION",
                    network=a.network,
                    address=a.address,
                    services=(a.service,),
                    message=f"{a.address} is the {a.network} gateway",
                )
            )
    return conflicts
