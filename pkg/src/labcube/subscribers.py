"""Subscriber identities and the seed set applied on every stack start.

SIM identities live in an env file (`UE1_IMSI=...`, `UE1_KI=...`, ...) and
the subscriber database is repopulated from them on each start so every
experiment begins from the same clean state.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import DuplicateImsiError, IncompleteRecordError
from .settings import ResolvedSettings, SettingsMap, parse_env_file
from .validation import ValidationReport

IMSI_RE = re.compile(r"[0-9]{15}")
HEX32_RE = re.compile(r"[0-9a-fA-F]{32}")
HEX4_RE = re.compile(r"[0-9a-fA-F]{4}")
_UE_KEY_RE = re.compile(r"UE([0-9]+)_(IMSI|KI|OPC|AMF|MSISDN)")


@dataclass(frozen=True)
class Plmn:
    mcc: str
    mnc: str


@dataclass(frozen=True)
class SubscriberRecord:
    imsi: str
    ki: str
    opc: str
    amf_field: str = "8000"
    msisdn: str | None = None


@dataclass(frozen=True)
class SeedSet:
    records: tuple[SubscriberRecord, ...]
    plmn: Plmn

    def canonical_document(self) -> str:
        """One `imsi,ki,opc,amf[,msisdn]` line per record, in input order."""
        lines = []
        for r in self.records:
            fields = [r.imsi, r.ki, r.opc, r.amf_field]
            if r.msisdn is not None:
                fields.append(r.msisdn)
            lines.append(",".join(fields))
        return "".join(line + "\n" for line in lines)


def plmn_from_settings(settings: ResolvedSettings) -> Plmn:
    # MNC length (2 vs 3) comes from the settings value, never from an IMSI.
    return Plmn(mcc=settings.effective.get("MCC", ""), mnc=settings.effective.get("MNC", ""))


def parse_subscribers(text: str) -> list[SubscriberRecord]:
    """Assemble records from `UE<n>_*` entries of an env-format document.

    Keys that do not match the `UE<n>_` convention are ignored, so global
    settings may share the file. A group with an IMSI but no KI or OPC (or
    the reverse) is an error.
    """
    return subscribers_from_settings(parse_env_file(text))


def subscribers_from_settings(settings: SettingsMap) -> list[SubscriberRecord]:
    groups: dict[int, dict[str, str]] = {}
    for key, value in settings.entries:
        m = _UE_KEY_RE.fullmatch(key)
        if m is None:
            continue
        groups.setdefault(int(m.group(1)), {})[m.group(2)] = value
    records = []
    for index in sorted(groups):
        fields = groups[index]
        for required in ("IMSI", "KI", "OPC"):
            if required not in fields:
                raise IncompleteRecordError(index, required)
        records.append(
            SubscriberRecord(
                imsi=fields["IMSI"],
                ki=fields["KI"],
                opc=fields["OPC"],
                amf_field=fields.get("AMF", "8000"),
                msisdn=fields.get("MSISDN"),
            )
        )
    return records


def validate_subscriber(record: SubscriberRecord, plmn: Plmn) -> ValidationReport:
    """Structural checks: lengths, charsets, and the PLMN prefix."""
    report = ValidationReport()
    if len(record.imsi) != 15:
        report.error("LENGTH", record.imsi, "IMSI must be exactly 15 digits")
    elif not IMSI_RE.fullmatch(record.imsi):
        report.error("CHARSET", record.imsi, "IMSI must be decimal digits")
    else:
        prefix = plmn.mcc + plmn.mnc
        if not record.imsi.startswith(prefix):
            report.error(
                "PLMN_MISMATCH",
                record.imsi,
                f"IMSI does not begin with PLMN {plmn.mcc}/{plmn.mnc}",
            )
    for label, value in (("KI", record.ki), ("OPC", record.opc)):
        if len(value) != 32:
            report.error("LENGTH", f"{record.imsi}:{label}", f"{label} must be 32 hex characters")
        elif not HEX32_RE.fullmatch(value):
            report.error("CHARSET", f"{record.imsi}:{label}", f"{label} must be hexadecimal")
    if not HEX4_RE.fullmatch(record.amf_field):
        report.error("CHARSET", f"{record.imsi}:AMF", "AMF field must be 4 hex characters")
    if record.msisdn is not None and not record.msisdn.isdigit():
        report.error("CHARSET", f"{record.imsi}:MSISDN", "MSISDN must be decimal digits")
    return report


def build_seed_set(records: list[SubscriberRecord], plmn: Plmn) -> SeedSet:
    """Bundle records into a seed set; a duplicate IMSI is an error, not a merge."""
    seen: set[str] = set()
    for record in records:
        if record.imsi in seen:
            raise DuplicateImsiError(record.imsi)
        seen.add(record.imsi)
    return SeedSet(records=tuple(records), plmn=plmn)
