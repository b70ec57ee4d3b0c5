"""Exception types raised across the framework.

Validation problems that are *data* (findings, conflicts) never raise;
these classes cover hard failures only.
"""

from __future__ import annotations


class LabError(Exception):
    """Base class for all framework errors."""


# --- document / manifest parsing ------------------------------------------

class DocumentSyntaxError(LabError):
    """Document is not well-formed in the YAML subset."""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class SchemaError(LabError):
    """Document parsed but violates the schema."""

    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


class DuplicateServiceError(SchemaError):
    def __init__(self, name: str):
        self.name = name
        super().__init__("services", f"service {name!r} defined twice")


# --- settings / rendering ---------------------------------------------------

class MalformedLineError(LabError):
    def __init__(self, line_no: int, reason: str = "expected KEY=VALUE"):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


class UnresolvedVariableError(LabError):
    def __init__(self, key: str, position: int):
        self.key = key
        self.position = position
        super().__init__(f"undefined variable ${{{key}}} at offset {position}")


class BadVariableSyntaxError(LabError):
    def __init__(self, position: int, reason: str = "malformed ${...} reference"):
        self.position = position
        super().__init__(f"offset {position}: {reason}")


class RenderError(LabError):
    """Template rendering failed for a service; nothing was rendered."""

    def __init__(self, service: str, template: str, cause: Exception):
        self.service = service
        self.template = template
        self.cause = cause
        super().__init__(f"service {service!r}, template {template!r}: {cause}")


# --- address planning -------------------------------------------------------

class UnresolvedAddressKeyError(LabError):
    def __init__(self, service: str, key: str):
        self.service = service
        self.key = key
        super().__init__(f"service {service!r}: settings key {key!r} not defined")


class UnparsableAddressError(LabError):
    def __init__(self, service: str, value: str):
        self.service = service
        self.value = value
        super().__init__(f"service {service!r}: {value!r} is not an IPv4 address")


# --- subscribers -------------------------------------------------------------

class IncompleteRecordError(LabError):
    def __init__(self, index: int, missing_field: str):
        self.index = index
        self.missing_field = missing_field
        super().__init__(f"subscriber UE{index}: missing {missing_field}")


class DuplicateImsiError(LabError):
    def __init__(self, imsi: str):
        self.imsi = imsi
        super().__init__(f"duplicate IMSI {imsi}")


# --- engine -------------------------------------------------------------------

class EngineError(LabError):
    """Base for failures reported by a container engine endpoint."""


class NotFoundError(EngineError):
    def __init__(self, ref: str):
        self.ref = ref
        super().__init__(f"not found: {ref}")


class ConflictError(EngineError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


class UnreachableError(EngineError):
    def __init__(self, endpoint: str):
        self.endpoint = endpoint
        super().__init__(f"endpoint unreachable: {endpoint}")


class TransferFailedError(EngineError):
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"transfer failed: {path}")


# --- orchestration --------------------------------------------------------------

class CycleError(LabError):
    def __init__(self, chain: list[str]):
        self.chain = chain
        super().__init__("dependency cycle: " + " -> ".join(chain))


class PlanningError(LabError):
    pass


class UnknownHostError(LabError):
    def __init__(self, host: str):
        self.host = host
        super().__init__(f"host {host!r} not registered")


class UnknownStackError(LabError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"stack {name!r} not in catalog")


class StackAlreadyActiveError(LabError):
    def __init__(self, current: str):
        self.current = current
        super().__init__(f"stack {current!r} is already active")


class ValidationFailedError(LabError):
    """Start refused because pre-deployment validation produced findings."""

    def __init__(self, report):
        self.report = report
        super().__init__(
            "validation failed: " + "; ".join(f.code for f in report.findings)
        )


class EngineFailureError(LabError):
    def __init__(self, action, cause: Exception):
        self.action = action
        self.cause = cause
        super().__init__(f"engine action {type(action).__name__} failed: {cause}")
