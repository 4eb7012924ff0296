"""Line-oriented echo client/server over TCP or UDP.

ONESHOT: the client asks one fixed question and the server answers with one
fixed line. CONTINUOUS: every client line is echoed back until the client
sends ``bye``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ..fabric.sim import SECOND
from ..hoststack.host import Host
from ..wire.addr import ip

QUESTION = "anyone there?"
ANSWER = "echo server here"
FAREWELL = "bye"
DEFAULT_PORT = 5555


class EchoMode(enum.Enum):
    ONESHOT = "oneshot"
    CONTINUOUS = "continuous"


@dataclass
class EchoLog:
    sent: list[str] = field(default_factory=list)
    received: list[str] = field(default_factory=list)
    error: str | None = None


class EchoServer:
    def __init__(self, host: Host, *, port: int = DEFAULT_PORT, mode: EchoMode = EchoMode.ONESHOT,
                 udp: bool = False):
        self.host = host
        self.port = port
        self.mode = mode
        self.udp = udp
        self.log = EchoLog()
        self.finished = False
        if udp:
            self.sock = host.udp.socket()
            self.sock.bind(port=port)
            self.task = host.sim.spawn(self._serve_udp(), f"echo-server:{host.name}")
        else:
            self.sock = host.tcp.socket()
            self.sock.bind(port=port)
            self.sock.listen(1)
            self.task = host.sim.spawn(self._serve_tcp(), f"echo-server:{host.name}")

    def _reply_to(self, line: str) -> str | None:
        if self.mode is EchoMode.ONESHOT:
            return ANSWER
        return None if line == FAREWELL else line

    def _got(self, line: str) -> None:
        self.log.received.append(line)
        self.host.print(f"server received: {line}")

    async def _serve_tcp(self) -> None:
        conn = await self.sock.accept()
        self.sock.close()
        while True:
            raw = await conn.recv_line()
            if not raw:
                break
            line = raw.decode().rstrip("\n")
            self._got(line)
            reply = self._reply_to(line)
            if reply is None:
                break
            conn.send(f"{reply}\n".encode())
            self.log.sent.append(reply)
            if self.mode is EchoMode.ONESHOT:
                break
        conn.close()
        self.finished = True

    async def _serve_udp(self) -> None:
        while True:
            dgram = await self.sock.recvfrom()
            line = dgram.payload.decode().rstrip("\n")
            self._got(line)
            reply = self._reply_to(line)
            if reply is None:
                break
            self.sock.sendto(f"{reply}\n".encode(), dgram.src, dgram.src_port)
            self.log.sent.append(reply)
            if self.mode is EchoMode.ONESHOT:
                break
        self.sock.close()
        self.finished = True


async def echo_client(host: Host, dst, *, port: int = DEFAULT_PORT, mode: EchoMode = EchoMode.ONESHOT,
                      udp: bool = False, lines: list[str] | None = None,
                      timeout: int = 5 * SECOND) -> EchoLog:
    dst = ip(dst)
    log = EchoLog()
    if mode is EchoMode.ONESHOT:
        lines = [QUESTION]
    elif not lines or lines[-1] != FAREWELL:
        lines = list(lines or []) + [FAREWELL]

    def got(line: str) -> None:
        log.received.append(line)
        host.print(f"client received: {line}")

    if udp:
        sock = host.udp.socket()
        sock.bind()
        try:
            for line in lines:
                sock.sendto(f"{line}\n".encode(), dst, port)
                log.sent.append(line)
                if line == FAREWELL and mode is EchoMode.CONTINUOUS:
                    break
                try:
                    dgram = await sock.recvfrom(timeout)
                except TimeoutError:
                    log.error = "no reply"
                    host.print("client: no reply")
                    break
                got(dgram.payload.decode().rstrip("\n"))
        finally:
            sock.close()
        return log

    sock = host.tcp.socket()
    try:
        await sock.connect(dst, port)
    except (ConnectionRefusedError, TimeoutError) as exc:
        log.error = str(exc)
        host.print(f"client: {exc}")
        return log
    try:
        for line in lines:
            sock.send(f"{line}\n".encode())
            log.sent.append(line)
            if line == FAREWELL and mode is EchoMode.CONTINUOUS:
                break
            raw = await sock.recv_line(timeout)
            if not raw:
                break
            got(raw.decode().rstrip("\n"))
        if mode is EchoMode.ONESHOT:
            # wait for the server's close before closing our side
            while await sock.recv(timeout=timeout):
                pass
    except (ConnectionResetError, TimeoutError) as exc:
        log.error = str(exc)
    finally:
        sock.close()
    return log
