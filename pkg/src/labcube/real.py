"""Real engine adapter: container engine HTTP API plus a secure-shell channel.

Desk-scale verification runs entirely on the simulation; this adapter
exists so the same plans drive real daemons. It speaks the engine's
versioned HTTP API over the local socket (the controller's socket is
mounted into our container in a real deployment) and uses `scp`/`ssh` for
the RAN-host file transfer and remote compose execution.
"""

from __future__ import annotations

import json
import subprocess
import tempfile
from pathlib import Path
from typing import Iterator

import httpx

from .engine import (
    Channel,
    ConnectNetwork,
    ContainerStatus,
    CreateContainer,
    CreateNetwork,
    DisconnectNetwork,
    EndpointKind,
    EngineAction,
    EngineEndpoint,
    EngineResult,
    Exec,
    LogEvent,
    RemoteComposeUp,
    RemoveContainer,
    RemoveNetwork,
    StartContainer,
    StatusKind,
    StopContainer,
    TransferFiles,
)
from .errors import ConflictError, NotFoundError, UnreachableError

API_VERSION = "v1.43"

# Engine state string -> our status enum. Fixed table; anything unknown is
# treated as still coming up rather than silently healthy.
ENGINE_STATE_TABLE = {
    "created": StatusKind.CREATING,
    "restarting": StatusKind.STARTING,
    "running": StatusKind.RUNNING,
    "removing": StatusKind.STARTING,
    "paused": StatusKind.STARTING,
    "exited": StatusKind.EXITED,
    "dead": StatusKind.EXITED,
}


def map_engine_state(state: str, exit_code: int | None = None) -> tuple[StatusKind, int | None]:
    kind = ENGINE_STATE_TABLE.get(state, StatusKind.STARTING)
    if kind is StatusKind.EXITED:
        return kind, exit_code if exit_code is not None else -1
    return kind, None


class RealEngineClient:
    """Engine adapter for one host's daemon reached over a unix socket."""

    def __init__(self, host: str, socket_path: str = "/var/run/docker.sock", channel: str | None = None):
        self.endpoint = EngineEndpoint(host=host, address=f"unix://{socket_path}", kind=EndpointKind.REAL)
        self._channel = channel  # ssh://user@host for delegated actions
        transport = httpx.HTTPTransport(uds=socket_path)
        self._client = httpx.Client(transport=transport, base_url=f"http://engine/{API_VERSION}")

    # -- helpers -------------------------------------------------------------

    def _request(self, method: str, path: str, **kwargs) -> httpx.Response:
        try:
            response = self._client.request(method, path, **kwargs)
        except httpx.TransportError as exc:
            raise UnreachableError(self.endpoint.address) from exc
        if response.status_code == 404:
            raise NotFoundError(path)
        if response.status_code == 409:
            raise ConflictError(response.text)
        response.raise_for_status()
        return response

    def _ssh_target(self) -> str:
        if not self._channel or not self._channel.startswith("ssh://"):
            raise UnreachableError(f"no ssh channel for {self.endpoint.host}")
        return self._channel[len("ssh://") :]

    # -- engine surface ------------------------------------------------------

    def apply(self, action: EngineAction) -> EngineResult:
        if isinstance(action, CreateNetwork):
            body: dict = {"Name": action.spec.name, "Labels": {"labcube.stack": action.stack}}
            if action.spec.kind.value == "macvlan-trunk":
                body["Driver"] = "macvlan"
            self._request("POST", "/networks/create", json=body)
            return EngineResult()
        if isinstance(action, RemoveNetwork):
            self._request("DELETE", f"/networks/{action.network}")
            return EngineResult()
        if isinstance(action, CreateContainer):
            d = action.descriptor
            body = {
                "Image": d.image,
                "Labels": {"labcube.stack": d.stack, "labcube.service": d.service, "labcube.role": d.role},
            }
            if d.command:
                body["Cmd"] = d.command.split()
            self._request("POST", "/containers/create", params={"name": d.name}, json=body)
            return EngineResult()
        if isinstance(action, ConnectNetwork):
            body = {"Container": action.container, "EndpointConfig": {}}
            if action.static_ip:
                body["EndpointConfig"]["IPAMConfig"] = {"IPv4Address": action.static_ip}
            if action.mac:
                body["EndpointConfig"]["MacAddress"] = action.mac
            self._request("POST", f"/networks/{action.network}/connect", json=body)
            return EngineResult()
        if isinstance(action, DisconnectNetwork):
            self._request(
                "POST", f"/networks/{action.network}/disconnect", json={"Container": action.container}
            )
            return EngineResult()
        if isinstance(action, StartContainer):
            self._request("POST", f"/containers/{action.container}/start")
            return EngineResult()
        if isinstance(action, StopContainer):
            self._request("POST", f"/containers/{action.container}/stop")
            return EngineResult()
        if isinstance(action, RemoveContainer):
            self._request("DELETE", f"/containers/{action.container}")
            return EngineResult()
        if isinstance(action, Exec):
            created = self._request(
                "POST", f"/containers/{action.container}/exec", json={"Cmd": list(action.command)}
            ).json()
            self._request("POST", f"/exec/{created['Id']}/start", json={"Detach": True})
            return EngineResult()
        if isinstance(action, TransferFiles):
            target = self._ssh_target()
            with tempfile.TemporaryDirectory() as tmp:
                for ref in action.files:
                    staged = Path(tmp) / ref.sha256
                    staged.write_text(ref.path, encoding="utf-8")
                    subprocess.run(
                        ["scp", "-q", str(staged), f"{target}:{ref.path}"], check=True
                    )
            return EngineResult(detail={"files": [f.sha256 for f in action.files]})
        if isinstance(action, RemoteComposeUp):
            target = self._ssh_target()
            subprocess.run(
                ["ssh", target, "docker", "compose", "-f", "-", "up", "-d"],
                input=action.fragment.encode("utf-8"),
                check=True,
            )
            return EngineResult(detail={"fragment_id": action.fragment_id})
        raise TypeError(f"not an engine action: {action!r}")

    def query(self, stack: str | None = None) -> list[ContainerStatus]:
        filters = {"label": [f"labcube.stack={stack}"]} if stack else {}
        response = self._request(
            "GET", "/containers/json", params={"all": "true", "filters": json.dumps(filters)}
        )
        statuses = []
        for item in response.json():
            state, exit_code = map_engine_state(item.get("State", ""), item.get("ExitCode"))
            statuses.append(
                ContainerStatus(
                    service=item.get("Labels", {}).get("labcube.service", item["Names"][0].lstrip("/")),
                    state=state,
                    host=self.endpoint.host,
                    since=item.get("Created") if state is not StatusKind.MISSING else None,
                    exit_code=exit_code,
                )
            )
        return statuses

    def logs(self, container: str, follow: bool = False, stop=None) -> Iterator[LogEvent]:
        response = self._request(
            "GET",
            f"/containers/{container}/logs",
            params={"stdout": "true", "stderr": "true", "timestamps": "false", "follow": str(follow).lower()},
        )
        for seq, line in enumerate(response.text.splitlines()):
            yield LogEvent(ts=seq, service=container, line=line, channel=Channel.OUT)
        yield LogEvent(ts=-1, service=container, line="", channel=Channel.EOF)

    def tick(self) -> None:
        # Real daemons advance on wall-clock time; nothing to do.
        return None
