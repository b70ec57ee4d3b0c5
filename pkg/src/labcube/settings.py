"""Central environment files, merged settings, and template rendering.

Stacks are configured from one global env file plus per-stack overrides.
The merged result drives `${KEY}` substitution in project configuration
templates. Substitution is single-pass and non-recursive: values are never
re-scanned, an undefined variable is a hard error, never an empty string,
and `$${` escapes to a literal `${`.
"""

from __future__ import annotations

import ipaddress
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from .errors import (
    BadVariableSyntaxError,
    MalformedLineError,
    RenderError,
    UnresolvedVariableError,
)
from .validation import ValidationReport

KEY_RE = re.compile(r"[A-Z][A-Z0-9_]*")


class Provenance(str, Enum):
    GLOBAL = "global"
    STACK = "stack"


@dataclass(frozen=True)
class SettingsMap:
    """Ordered KEY=VALUE entries plus any warnings collected while parsing."""

    entries: tuple[tuple[str, str], ...] = ()
    warnings: tuple[str, ...] = ()

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "SettingsMap":
        pairs = tuple(pairs)
        for key, _ in pairs:
            if not KEY_RE.fullmatch(key):
                raise ValueError(f"invalid settings key {key!r}")
        return cls(entries=pairs)

    def as_dict(self) -> dict[str, str]:
        return dict(self.entries)

    def get(self, key: str, default: str | None = None) -> str | None:
        return self.as_dict().get(key, default)

    def keys(self) -> list[str]:
        return [k for k, _ in self.entries]

    def __contains__(self, key: str) -> bool:
        return any(k == key for k, _ in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class ResolvedSettings:
    """Global settings with stack overrides applied, provenance per key."""

    effective: Mapping[str, str]
    provenance: Mapping[str, Provenance]


@dataclass(frozen=True)
class RenderedConfig:
    template_path: str
    target_path: str
    content: str
    variables_used: frozenset[str]


def parse_env_file(text: str) -> SettingsMap:
    """Parse `KEY=VALUE` lines.

    Blank lines and comment lines (first non-space character `#`) are
    ignored. The value is everything after the first `=`, untrimmed. On a
    duplicate key the last occurrence wins and a warning is recorded.
    """
    entries: dict[str, str] = {}
    warnings: list[str] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        body = raw.lstrip()
        if not body or body.startswith("#"):
            continue
        if "=" not in body:
            raise MalformedLineError(line_no, "expected KEY=VALUE")
        key, _, value = body.partition("=")
        if not KEY_RE.fullmatch(key):
            raise MalformedLineError(line_no, f"invalid key {key!r}")
        if key in entries:
            warnings.append(f"line {line_no}: duplicate key {key}; last occurrence wins")
        entries[key] = value
    return SettingsMap(entries=tuple(entries.items()), warnings=tuple(warnings))


def serialize_env(settings: SettingsMap) -> str:
    return "".join(f"{key}={value}\n" for key, value in settings.entries)


def resolve_settings(global_map: SettingsMap, stack_overrides: SettingsMap) -> ResolvedSettings:
    """Merge global and stack settings; stack entries shadow global ones."""
    effective: dict[str, str] = {}
    provenance: dict[str, Provenance] = {}
    for key, value in global_map.entries:
        effective[key] = value
        provenance[key] = Provenance.GLOBAL
    for key, value in stack_overrides.entries:
        effective[key] = value
        provenance[key] = Provenance.STACK
    return ResolvedSettings(effective=effective, provenance=provenance)


def render_template(template_text: str, settings: ResolvedSettings) -> tuple[str, frozenset[str]]:
    """Replace each `${KEY}` with its effective value in one left-to-right pass.

    `$${` emits a literal `${`. Returns the rendered content and the set of
    keys that were substituted.
    """
    effective = settings.effective
    out: list[str] = []
    used: set[str] = set()
    i = 0
    n = len(template_text)
    while i < n:
        if template_text.startswith("$${", i):
            out.append("${")
            i += 3
            continue
        if template_text.startswith("${", i):
            end = template_text.find("}", i + 2)
            if end == -1:
                raise BadVariableSyntaxError(i, "unterminated ${ reference")
            key = template_text[i + 2 : end]
            if not KEY_RE.fullmatch(key):
                raise BadVariableSyntaxError(i, f"invalid variable name {key!r}")
            if key not in effective:
                raise UnresolvedVariableError(key, i)
            out.append(effective[key])
            used.add(key)
            i = end + 1
            continue
        out.append(template_text[i])
        i += 1
    return "".join(out), frozenset(used)


def render_stack(manifest, settings: ResolvedSettings, template_root: Path) -> list[RenderedConfig]:
    """Render every (service, template) pair of a manifest, in manifest order.

    All-or-nothing: the first failure raises with service context and
    nothing is returned.
    """
    template_root = Path(template_root)
    rendered: list[RenderedConfig] = []
    seen_targets: dict[str, str] = {}
    for service in manifest.services:
        for src, dst in service.config_templates:
            source = template_root / src
            try:
                if not source.resolve().is_relative_to(template_root.resolve()):
                    raise ValueError("template path escapes the template root")
                text = source.read_text(encoding="utf-8")
                content, used = render_template(text, settings)
            except (OSError, ValueError, BadVariableSyntaxError, UnresolvedVariableError) as exc:
                raise RenderError(service.name, src, exc) from exc
            if dst in seen_targets:
                raise RenderError(
                    service.name, src,
                    ValueError(f"target {dst!r} already rendered by {seen_targets[dst]!r}"),
                )
            seen_targets[dst] = service.name
            rendered.append(
                RenderedConfig(
                    template_path=src, target_path=dst, content=content, variables_used=used
                )
            )
    return rendered


# Semantic checks for the handful of well-known keys; used by the settings
# API so an operator hears about a bad PLMN before a stack start fails.
def validate_setting_values(settings: SettingsMap) -> ValidationReport:
    report = ValidationReport()
    values = settings.as_dict()
    mcc = values.get("MCC")
    if mcc is not None and not re.fullmatch(r"[0-9]{3}", mcc):
        report.error("BAD_MCC", "MCC", "MCC must be exactly 3 digits")
    mnc = values.get("MNC")
    if mnc is not None and not re.fullmatch(r"[0-9]{2,3}", mnc):
        report.error("BAD_MNC", "MNC", "MNC must be 2 or 3 digits")
    for key, value in values.items():
        if key.endswith("_IP"):
            try:
                ipaddress.IPv4Address(value)
            except ValueError:
                report.error("BAD_ADDRESS", key, f"{value!r} is not an IPv4 address")
    return report
