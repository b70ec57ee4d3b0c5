"""Container-engine action vocabulary and runtime contracts.

Every mutation the framework performs on any host is one of the actions
below; deployment plans are ordered lists of them. An engine client
executes actions, answers status queries, and streams logs. Two clients
exist: the deterministic in-memory simulation (`labcube.sim`) used for
desk-scale verification, and a real adapter (`labcube.real`) speaking the
container engine's HTTP API plus a secure-shell channel for remote hosts.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Protocol, Union

from .netplan import NetworkSpec

# Every engine ships a default bridge network; delegated RAN containers are
# re-homed onto it after their static addresses are released.
DEFAULT_BRIDGE = "bridge"


@dataclass(frozen=True)
class FileRef:
    """A file identified by target path and content hash."""

    path: str
    sha256: str

    @classmethod
    def from_content(cls, path: str, content: str) -> "FileRef":
        return cls(path=path, sha256=hashlib.sha256(content.encode("utf-8")).hexdigest())


@dataclass(frozen=True)
class ContainerDescriptor:
    name: str
    image: str
    stack: str
    service: str
    role: str
    command: str | None = None
    config_files: tuple[FileRef, ...] = ()


@dataclass(frozen=True)
class CreateNetwork:
    spec: NetworkSpec
    stack: str


@dataclass(frozen=True)
class RemoveNetwork:
    network: str


@dataclass(frozen=True)
class CreateContainer:
    descriptor: ContainerDescriptor


@dataclass(frozen=True)
class ConnectNetwork:
    container: str
    network: str
    static_ip: str | None = None
    mac: str | None = None


@dataclass(frozen=True)
class DisconnectNetwork:
    container: str
    network: str


@dataclass(frozen=True)
class StartContainer:
    container: str


@dataclass(frozen=True)
class StopContainer:
    container: str


@dataclass(frozen=True)
class RemoveContainer:
    container: str


@dataclass(frozen=True)
class Exec:
    container: str
    command: tuple[str, ...]


@dataclass(frozen=True)
class TransferFiles:
    host: str
    files: tuple[FileRef, ...]


@dataclass(frozen=True)
class RemoteComposeUp:
    host: str
    fragment: str
    fragment_id: str


EngineAction = Union[
    CreateNetwork,
    RemoveNetwork,
    CreateContainer,
    ConnectNetwork,
    DisconnectNetwork,
    StartContainer,
    StopContainer,
    RemoveContainer,
    Exec,
    TransferFiles,
    RemoteComposeUp,
]


def action_to_dict(action: EngineAction) -> dict:
    if isinstance(action, CreateNetwork):
        return {"kind": "create_network", "network": action.spec.name, "stack": action.stack}
    if isinstance(action, RemoveNetwork):
        return {"kind": "remove_network", "network": action.network}
    if isinstance(action, CreateContainer):
        d = action.descriptor
        return {
            "kind": "create_container",
            "container": d.name,
            "image": d.image,
            "stack": d.stack,
            "service": d.service,
            "role": d.role,
            "files": [f.sha256 for f in d.config_files],
        }
    if isinstance(action, ConnectNetwork):
        return {
            "kind": "connect_network",
            "container": action.container,
            "network": action.network,
            "static_ip": action.static_ip,
            "mac": action.mac,
        }
    if isinstance(action, DisconnectNetwork):
        return {"kind": "disconnect_network", "container": action.container, "network": action.network}
    if isinstance(action, StartContainer):
        return {"kind": "start_container", "container": action.container}
    if isinstance(action, StopContainer):
        return {"kind": "stop_container", "container": action.container}
    if isinstance(action, RemoveContainer):
        return {"kind": "remove_container", "container": action.container}
    if isinstance(action, Exec):
        return {"kind": "exec", "container": action.container, "command": list(action.command)}
    if isinstance(action, TransferFiles):
        return {"kind": "transfer_files", "host": action.host, "files": [f.sha256 for f in action.files]}
    if isinstance(action, RemoteComposeUp):
        return {"kind": "remote_compose_up", "host": action.host, "fragment_id": action.fragment_id}
    raise TypeError(f"not an engine action: {action!r}")


# --- runtime status -----------------------------------------------------------

class StatusKind(str, Enum):
    CREATING = "creating"
    STARTING = "starting"
    RUNNING = "running"
    EXITED = "exited"
    MISSING = "missing"


@dataclass(frozen=True)
class ContainerStatus:
    service: str
    state: StatusKind
    host: str
    since: int | None = None
    exit_code: int | None = None

    def __post_init__(self):
        if self.state is StatusKind.EXITED and self.exit_code is None:
            raise ValueError("EXITED status requires an exit code")
        if self.state is not StatusKind.EXITED and self.exit_code is not None:
            raise ValueError("only EXITED status carries an exit code")
        if self.state is StatusKind.MISSING and self.since is not None:
            raise ValueError("MISSING status carries no timestamp")

    def to_dict(self) -> dict:
        return {
            "service": self.service,
            "state": self.state.value,
            "host": self.host,
            "since": self.since,
            "exit_code": self.exit_code,
        }


class Channel(str, Enum):
    OUT = "out"
    ERR = "err"
    # Stream-control markers, not log lines: end-of-stream and dropped-events.
    EOF = "eof"
    GAP = "gap"


@dataclass(frozen=True)
class LogEvent:
    ts: int
    service: str
    line: str
    channel: Channel

    def to_dict(self) -> dict:
        return {"ts": self.ts, "service": self.service, "line": self.line, "channel": self.channel.value}


class EndpointKind(str, Enum):
    SIMULATED = "simulated"
    REAL = "real"


@dataclass(frozen=True)
class EngineEndpoint:
    host: str
    address: str
    kind: EndpointKind


@dataclass(frozen=True)
class EngineResult:
    """Outcome record for actions that produce evidence (transfers, ups)."""

    detail: dict = field(default_factory=dict)


class EngineClient(Protocol):
    """Uniform engine command surface every adapter implements."""

    endpoint: EngineEndpoint

    def apply(self, action: EngineAction) -> EngineResult: ...

    def query(self, stack: str | None = None) -> list[ContainerStatus]: ...

    # `stop` lets an abandoned follow-stream consumer release the producer.
    def logs(
        self, container: str, follow: bool = False, stop: "threading.Event | None" = None
    ) -> Iterator[LogEvent]: ...

    def tick(self) -> None: ...
