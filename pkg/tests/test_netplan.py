import ipaddress
import random

import pytest

from labcube.errors import UnparsableAddressError, UnresolvedAddressKeyError
from labcube.netplan import (
    AddressPlan,
    Assignment,
    NetworkCatalog,
    NetworkKind,
    NetworkSpec,
    build_address_plan,
    check_address_plan,
    derive_mac,
    parse_network_catalog,
    validate_networks,
)
from labcube.settings import SettingsMap, resolve_settings
from labcube.stacks import parse_manifest

from oracles import brute_force_plan_conflicts, interval_overlap


def net(name, kind, subnet, gateway=None, vlan_id=None):
    return NetworkSpec(name=name, kind=kind, subnet=subnet, gateway=gateway, vlan_id=vlan_id)


DEFAULTS = NetworkCatalog(
    networks=(
        net("corenet", NetworkKind.MACVLAN_TRUNK, "10.5.0.0/24", "10.5.0.1", 5),
        net("extnet", NetworkKind.BRIDGE_WAN, "10.6.0.0/24", "10.6.0.1"),
        net("rfnet", NetworkKind.ISOLATED, "192.168.40.0/24"),
    )
)


class TestValidateNetworks:
    def test_default_catalog_is_clean(self):
        report = validate_networks(DEFAULTS)
        assert report.ok
        # agreement with the interval oracle
        subnets = [spec.subnet for spec in DEFAULTS.networks]
        for i, a in enumerate(subnets):
            for b in subnets[i + 1 :]:
                assert not interval_overlap(a, b)

    def test_same_subnet_twice_overlaps(self):
        catalog = NetworkCatalog(
            networks=(
                net("a", NetworkKind.ISOLATED, "10.5.0.0/24"),
                net("b", NetworkKind.ISOLATED, "10.5.0.0/24"),
            )
        )
        assert "OVERLAP" in validate_networks(catalog).codes()

    def test_vlan_on_bridge_is_misuse(self):
        catalog = NetworkCatalog(networks=(net("x", NetworkKind.BRIDGE_WAN, "10.7.0.0/24", vlan_id=7),))
        assert "VLAN_MISUSE" in validate_networks(catalog).codes()

    def test_trunk_without_vlan_is_misuse(self):
        catalog = NetworkCatalog(networks=(net("x", NetworkKind.MACVLAN_TRUNK, "10.7.0.0/24"),))
        assert "VLAN_MISUSE" in validate_networks(catalog).codes()

    def test_gateway_outside_subnet(self):
        catalog = NetworkCatalog(
            networks=(net("x", NetworkKind.ISOLATED, "10.7.0.0/24", gateway="10.8.0.1"),)
        )
        assert "GATEWAY_OUTSIDE_SUBNET" in validate_networks(catalog).codes()

    def test_duplicate_name(self):
        catalog = NetworkCatalog(
            networks=(
                net("x", NetworkKind.ISOLATED, "10.7.0.0/24"),
                net("x", NetworkKind.ISOLATED, "10.9.0.0/24"),
            )
        )
        assert "DUPLICATE_NAME" in validate_networks(catalog).codes()

    def test_overlap_agrees_with_interval_oracle(self):
        rng = random.Random(99)
        for _ in range(400):
            prefix_a, prefix_b = rng.randint(16, 30), rng.randint(16, 30)
            base_a = ipaddress.IPv4Address(rng.randint(0, 2**32 - 1))
            base_b = ipaddress.IPv4Address(rng.randint(0, 2**32 - 1))
            sub_a = str(ipaddress.IPv4Network((base_a, prefix_a), strict=False))
            sub_b = str(ipaddress.IPv4Network((base_b, prefix_b), strict=False))
            catalog = NetworkCatalog(
                networks=(net("a", NetworkKind.ISOLATED, sub_a), net("b", NetworkKind.ISOLATED, sub_b))
            )
            ours = "OVERLAP" in validate_networks(catalog).codes()
            assert ours == interval_overlap(sub_a, sub_b), (sub_a, sub_b)


class TestDeriveMac:
    def test_deterministic_across_calls(self):
        assert derive_mac("amf", "corenet") == derive_mac("amf", "corenet")

    def test_distinct_per_attachment(self):
        assert derive_mac("amf", "corenet") != derive_mac("smf", "corenet")
        assert derive_mac("amf", "corenet") != derive_mac("amf", "extnet")

    def test_locally_administered_unicast(self):
        mac = derive_mac("upf", "corenet")
        assert mac.startswith("02:")
        assert len(mac.split(":")) == 6


MANIFEST = """
name: tiny
description: probe
generation: 5g-sa
networks: [corenet]
services:
  amf:
    image: x:1
    role: core
    attachments:
      - {network: corenet, ip_key: AMF_IP}
  probe:
    image: x:1
    role: util
    attachments:
      - {network: corenet}
"""


class TestBuildAddressPlan:
    def test_static_ip_assignment(self):
        text = MANIFEST.replace("ip_key: AMF_IP", "static_ip: 10.5.0.10")
        plan = build_address_plan(parse_manifest(text), resolve_settings(SettingsMap(), SettingsMap()))
        assert [(a.service, a.network, a.address) for a in plan.assignments] == [
            ("amf", "corenet", "10.5.0.10")
        ]

    def test_settings_key_lookup(self):
        settings = resolve_settings(SettingsMap.from_pairs([("AMF_IP", "10.5.0.12")]), SettingsMap())
        plan = build_address_plan(parse_manifest(MANIFEST), settings)
        assert plan.assignments[0].address == "10.5.0.12"
        assert plan.assignments[0].mac == derive_mac("amf", "corenet")

    def test_missing_key_is_error(self):
        with pytest.raises(UnresolvedAddressKeyError) as err:
            build_address_plan(parse_manifest(MANIFEST), resolve_settings(SettingsMap(), SettingsMap()))
        assert err.value.key == "AMF_IP"

    def test_unparsable_value_is_error(self):
        settings = resolve_settings(SettingsMap.from_pairs([("AMF_IP", "banana")]), SettingsMap())
        with pytest.raises(UnparsableAddressError):
            build_address_plan(parse_manifest(MANIFEST), settings)

    def test_dynamic_attachment_gets_no_entry(self):
        settings = resolve_settings(SettingsMap.from_pairs([("AMF_IP", "10.5.0.12")]), SettingsMap())
        plan = build_address_plan(parse_manifest(MANIFEST), settings)
        assert [a.service for a in plan.assignments] == ["amf"]


def assignment(service, network, address):
    return Assignment(service=service, network=network, address=address, mac=derive_mac(service, network))


def conflicts_as_set(conflicts):
    return {(c.code, c.network, c.address, frozenset(c.services)) for c in conflicts}


class TestCheckAddressPlan:
    def test_duplicate_names_both_services(self):
        plan = AddressPlan(
            assignments=(assignment("a", "corenet", "10.5.0.10"), assignment("b", "corenet", "10.5.0.10"))
        )
        out = check_address_plan(plan, DEFAULTS)
        assert len(out) == 1
        assert out[0].code == "DUPLICATE"
        assert set(out[0].services) == {"a", "b"}

    def test_out_of_subnet(self):
        plan = AddressPlan(assignments=(assignment("a", "corenet", "10.9.9.9"),))
        out = check_address_plan(plan, DEFAULTS)
        assert [c.code for c in out] == ["OUT_OF_SUBNET"]

    def test_gateway_collision(self):
        plan = AddressPlan(assignments=(assignment("a", "corenet", "10.5.0.1"),))
        assert [c.code for c in check_address_plan(plan, DEFAULTS)] == ["GATEWAY_COLLISION"]

    def test_every_fixture_plan_is_clean(self, ctx):
        networks = {s.name: (s.subnet, s.gateway) for s in ctx.networks.networks}
        for item in ctx.catalog.entries:
            manifest = item.manifest
            merged = resolve_settings(ctx.global_settings, manifest.overrides)
            plan = build_address_plan(manifest, merged)
            assert check_address_plan(plan, ctx.networks) == []
            assert brute_force_plan_conflicts(plan.assignments, networks) == set()

    def test_agrees_with_brute_force_oracle(self):
        rng = random.Random(7)
        networks = {s.name: (s.subnet, s.gateway) for s in DEFAULTS.networks}
        names = list(networks) + ["ghostnet"]
        pool = ["10.5.0.1", "10.5.0.10", "10.5.0.11", "10.6.0.1", "10.6.0.9", "10.9.9.9", "192.168.40.5"]
        for _ in range(400):
            assignments = tuple(
                assignment(f"s{i}", rng.choice(names), rng.choice(pool))
                for i in range(rng.randint(0, 8))
            )
            ours = conflicts_as_set(check_address_plan(AddressPlan(assignments=assignments), DEFAULTS))
            assert ours == brute_force_plan_conflicts(assignments, networks)


class TestParseNetworkCatalog:
    def test_default_file_parses(self, ctx):
        assert ctx.networks.names() == ["corenet", "extnet", "rfnet"]
        corenet = ctx.networks.get("corenet")
        assert corenet.kind is NetworkKind.MACVLAN_TRUNK
        assert corenet.vlan_id == 5

    def test_unknown_kind_rejected(self):
        from labcube.errors import SchemaError

        with pytest.raises(SchemaError):
            parse_network_catalog("networks:\n  x:\n    kind: warp\n    subnet: 10.0.0.0/24\n")
