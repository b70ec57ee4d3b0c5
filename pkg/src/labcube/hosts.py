"""Controller and RAN host registry."""

from __future__ import annotations

from dataclasses import dataclass

from . import yamlish
from .errors import SchemaError


@dataclass(frozen=True)
class RanHost:
    name: str
    engine_address: str
    channel_address: str


@dataclass(frozen=True)
class HostRegistry:
    controller: str
    ran_hosts: tuple[RanHost, ...] = ()

    def get(self, name: str) -> RanHost | None:
        for host in self.ran_hosts:
            if host.name == name:
                return host
        return None

    def names(self) -> list[str]:
        return [self.controller] + [h.name for h in self.ran_hosts]

    def knows(self, name: str) -> bool:
        return name == self.controller or self.get(name) is not None


def parse_host_registry(text: str) -> HostRegistry:
    doc = yamlish.load_mapping(text)
    unknown = set(doc) - {"controller", "ran_hosts"}
    if unknown:
        raise SchemaError(sorted(unknown)[0], "unknown top-level key")
    controller = doc.get("controller")
    if not isinstance(controller, str) or not controller:
        raise SchemaError("controller", "controller host name is required")
    hosts = []
    seen = {controller}
    for name, raw in (doc.get("ran_hosts") or {}).items():
        if name in seen:
            raise SchemaError(f"ran_hosts.{name}", "host name used twice")
        seen.add(name)
        if not isinstance(raw, dict):
            raise SchemaError(f"ran_hosts.{name}", "expected a mapping")
        extra = set(raw) - {"engine", "channel"}
        if extra:
            raise SchemaError(f"ran_hosts.{name}.{sorted(extra)[0]}", "unknown key")
        engine = raw.get("engine")
        channel = raw.get("channel")
        if not isinstance(engine, str) or not isinstance(channel, str):
            raise SchemaError(f"ran_hosts.{name}", "engine and channel addresses are required")
        hosts.append(RanHost(name=name, engine_address=engine, channel_address=channel))
    return HostRegistry(controller=controller, ran_hosts=tuple(hosts))
