"""TCP: connection state machine, retransmission, flow control and sockets.

Sequence numbers are kept as unbounded integers inside a connection and only
reduced modulo 2**32 on the wire. There is no congestion control and no
delayed ACK: the sender is limited by the peer's window alone and every
segment that occupies sequence space is acknowledged at once.
"""

from __future__ import annotations

import enum
from collections import Counter
from typing import TYPE_CHECKING

from ..fabric.sim import SECOND, Event, Future
from ..hoststack.host import FragmentationNeeded
from ..routing import NetworkUnreachable
from ..wire.addr import Ipv4Addr, ip
from ..wire.ethernet import DecodeError
from ..wire.ipv4 import PROTO_TCP, Ipv4Packet
from ..wire.tcp import TcpFlags, TcpSegment
from .ports import AddressInUse, PortAllocator

if TYPE_CHECKING:
    from ..hoststack.host import Host
    from ..hoststack.interface import Interface

ANY = Ipv4Addr("0.0.0.0")
RCV_BUFFER = 65535
SND_BUFFER = 65536
DEFAULT_MSS = 536
INITIAL_RTO = 1 * SECOND
MAX_RETRIES = 5
PERSIST_MAX = 60 * SECOND
TIME_WAIT = 120 * SECOND
MOD = 1 << 32

F = TcpFlags


class TcpState(enum.Enum):
    CLOSED = "CLOSED"
    LISTEN = "LISTEN"
    SYN_SENT = "SYN_SENT"
    SYN_RCVD = "SYN_RCVD"
    ESTABLISHED = "ESTABLISHED"
    FIN_WAIT_1 = "FIN_WAIT_1"
    FIN_WAIT_2 = "FIN_WAIT_2"
    CLOSE_WAIT = "CLOSE_WAIT"
    LAST_ACK = "LAST_ACK"
    CLOSING = "CLOSING"
    TIME_WAIT = "TIME_WAIT"


S = TcpState
SYNCHRONIZED = {S.ESTABLISHED, S.FIN_WAIT_1, S.FIN_WAIT_2, S.CLOSE_WAIT, S.LAST_ACK, S.CLOSING, S.TIME_WAIT}
CAN_RECEIVE = {S.ESTABLISHED, S.FIN_WAIT_1, S.FIN_WAIT_2}


def unwrap(value: int, reference: int) -> int:
    """The integer congruent to ``value`` mod 2**32 closest to ``reference``."""
    return reference + ((value - reference + (MOD >> 1)) % MOD) - (MOD >> 1)


class ConnectionRefused(ConnectionRefusedError):
    pass


class TcpConnection:
    def __init__(self, stack: TcpStack, local: tuple[Ipv4Addr, int], remote: tuple[Ipv4Addr, int]):
        self.stack = stack
        self.sim = stack.host.sim
        self.local = local
        self.remote = remote
        self.state = S.CLOSED
        self.listener: TcpListener | None = None
        self.iss = stack.next_iss()
        self.irs = 0
        self.snd_una = self.iss
        self.snd_nxt = self.iss
        self.snd_wnd = 0
        self.snd_wl1 = 0
        self.snd_wl2 = 0
        self.rcv_nxt = 0
        try:
            self.local_mss = min(stack.host.route_mtu(remote[0]), 0xFFFF) - 40
        except NetworkUnreachable:
            self.local_mss = DEFAULT_MSS
        self.peer_mss: int | None = None
        self.mss = DEFAULT_MSS
        # send side: bytes from data index ``_sndbuf_base`` onwards, not yet acknowledged
        self._sndbuf = bytearray()
        self._sndbuf_base = 0
        self._written = 0
        self._push_marks: list[int] = []
        self._fin_queued = False
        self._fin_sent = False
        # receive side
        self.rcv_capacity = RCV_BUFFER
        self._rcvbuf = bytearray()
        self._ooo: dict[int, bytes] = {}
        self._ooo_fin: int | None = None
        self._last_adv_wnd = RCV_BUFFER
        self.fin_received = False
        # timers
        self._rto_timer: Event | None = None
        self._persist_timer: Event | None = None
        self._tw_timer: Event | None = None
        self.retries = 0
        self._persist_backoff = 0
        # notification
        self._readers: list[Future] = []
        self._writers: list[Future] = []
        self._open_waiter: Future | None = None
        self.error: BaseException | None = None
        self.stats: Counter[str] = Counter()
        self.history: list[tuple[int, str]] = [(self.sim.now, S.CLOSED.value)]

    def __repr__(self) -> str:
        return f"TcpConnection({self.local[0]}:{self.local[1]}->{self.remote[0]}:{self.remote[1]} {self.state.value})"

    @property
    def key(self) -> tuple:
        return (self.local[0], self.local[1], self.remote[0], self.remote[1])

    def _set_state(self, state: TcpState) -> None:
        if state is not self.state:
            self.state = state
            self.history.append((self.sim.now, state.value))

    # -- sequence helpers ---------------------------------------------------------

    @property
    def data_start(self) -> int:
        """Sequence number of the first data byte (SYN consumes iss)."""
        return self.iss + 1

    @property
    def data_end(self) -> int:
        return self.data_start + self._written

    @property
    def fin_seq(self) -> int:
        return self.data_end

    @property
    def in_flight(self) -> int:
        return self.snd_nxt - self.snd_una

    @property
    def unread(self) -> int:
        return len(self._rcvbuf)

    @property
    def rcv_wnd(self) -> int:
        return max(self.rcv_capacity - len(self._rcvbuf), 0)

    @property
    def send_buffered(self) -> int:
        return len(self._sndbuf)

    # -- opening ------------------------------------------------------------------

    def open_active(self) -> Future:
        self._open_waiter = self.sim.future()
        self._set_state(S.SYN_SENT)
        self._send_syn()
        return self._open_waiter

    def open_passive(self, syn: TcpSegment, listener: TcpListener) -> None:
        self.listener = listener
        self.irs = syn.seq
        self.rcv_nxt = syn.seq + 1
        self._take_peer_mss(syn.mss)
        self.snd_wnd = syn.window
        self.snd_wl1, self.snd_wl2 = syn.seq, self.iss
        self._set_state(S.SYN_RCVD)
        self._send_syn()

    def _take_peer_mss(self, mss: int | None) -> None:
        self.peer_mss = mss
        self.mss = min(self.local_mss, mss if mss is not None else DEFAULT_MSS)

    def _send_syn(self) -> None:
        flags = F.SYN | (F.ACK if self.state is S.SYN_RCVD else 0)
        self._emit(self.iss, flags, mss=self.local_mss)
        self.snd_nxt = max(self.snd_nxt, self.iss + 1)
        self._arm_rto()

    # -- application interface -------------------------------------------------------

    def write(self, data: bytes) -> int:
        if self.error is not None:
            raise ConnectionResetError(str(self.error))
        if self._fin_queued or self.state not in (S.ESTABLISHED, S.CLOSE_WAIT, S.SYN_SENT, S.SYN_RCVD):
            raise BrokenPipeError("send on a closed connection")
        if not data:
            return 0
        self._sndbuf += data
        self._written += len(data)
        self._push_marks.append(self.data_end)
        if self.state in SYNCHRONIZED:
            self._output()
        return len(data)

    def read(self, limit: int) -> bytes:
        """Take up to ``limit`` in-order bytes and advertise any opened window."""
        if not self._rcvbuf:
            return b""
        chunk = bytes(self._rcvbuf[:limit])
        del self._rcvbuf[:limit]
        self._maybe_window_update()
        return chunk

    def close(self) -> None:
        if self.state in (S.CLOSED, S.SYN_SENT):
            self._teardown(None)
            return
        if self._fin_queued:
            return
        self._fin_queued = True
        if self.state in (S.SYN_RCVD, S.ESTABLISHED):
            self._set_state(S.FIN_WAIT_1)
        elif self.state is S.CLOSE_WAIT:
            self._set_state(S.LAST_ACK)
        self._output()

    def abort(self) -> None:
        if self.state in SYNCHRONIZED or self.state is S.SYN_RCVD:
            self._emit(self.snd_nxt, F.RST | F.ACK)
        self._teardown(ConnectionResetError("connection aborted"))

    # -- output -------------------------------------------------------------------------

    def _emit(self, seq: int, flags: TcpFlags, payload: bytes = b"", mss: int | None = None) -> None:
        ack = self.rcv_nxt if flags & F.ACK else 0
        wnd = min(self.rcv_wnd, 0xFFFF)
        seg = TcpSegment(self.local[1], self.remote[1], seq % MOD, ack % MOD, flags, wnd, payload, mss=mss)
        if flags & F.ACK:
            self._last_adv_wnd = wnd
        self.stats["segments_sent"] += 1
        if payload:
            self.stats["data_segments_sent"] += 1
            self.stats["bytes_sent"] += len(payload)
        self.stack.send(self, seg)

    def _send_ack(self) -> None:
        self.stats["acks_sent"] += 1
        self._emit(self.snd_nxt, F.ACK)

    def _segment_flags(self, start: int, end: int) -> TcpFlags:
        flags = F.ACK
        if any(start < mark <= end for mark in self._push_marks):
            flags |= F.PSH
        return flags

    def _payload(self, start: int, end: int) -> bytes:
        lo = start - self.data_start - self._sndbuf_base
        return bytes(self._sndbuf[lo:lo + (end - start)])

    def _output(self) -> None:
        if self.state not in SYNCHRONIZED:
            return
        edge = self.snd_una + self.snd_wnd
        while self.snd_nxt < self.data_end:
            size = min(self.data_end - self.snd_nxt, self.mss, edge - self.snd_nxt)
            if size <= 0:
                break
            start, end = self.snd_nxt, self.snd_nxt + size
            self._emit(start, self._segment_flags(start, end), self._payload(start, end))
            self.snd_nxt = end
            if self.in_flight > self.snd_wnd:
                self.stats["window_violations"] += 1
        if self._fin_queued and not self._fin_sent and self.snd_nxt == self.data_end:
            self._emit(self.fin_seq, F.FIN | F.ACK)
            self._fin_sent = True
            self.snd_nxt = self.fin_seq + 1
        if self.snd_nxt > self.snd_una:
            if self._rto_timer is None:
                self._arm_rto()
        elif self.snd_nxt < self.data_end and self.snd_wnd == 0:
            self._arm_persist()

    def _maybe_window_update(self) -> None:
        if self.state not in CAN_RECEIVE:
            return
        new = self.rcv_wnd
        old = self._last_adv_wnd
        if (old < self.mss <= new) or new - old >= self.rcv_capacity // 2:
            self.stats["window_updates"] += 1
            self._send_ack()

    # -- timers ---------------------------------------------------------------------------

    def _arm_rto(self) -> None:
        if self._rto_timer is not None:
            self._rto_timer.cancel()
        self._rto_timer = self.sim.call_later(INITIAL_RTO << self.retries, self._on_rto)

    def _stop_rto(self) -> None:
        if self._rto_timer is not None:
            self._rto_timer.cancel()
            self._rto_timer = None

    def _on_rto(self) -> None:
        self._rto_timer = None
        if self.snd_una >= self.snd_nxt or self.state in (S.CLOSED, S.TIME_WAIT):
            return
        if self.retries >= MAX_RETRIES:
            self.stats["timeouts"] += 1
            self._teardown(TimeoutError("connection timed out"))
            return
        self.retries += 1
        self.stats["retransmissions"] += 1
        self._retransmit()
        self._arm_rto()

    def _retransmit(self) -> None:
        """Resend the first unacknowledged segment only."""
        if self.snd_una == self.iss:
            flags = F.SYN | (F.ACK if self.state is not S.SYN_SENT else 0)
            self._emit(self.iss, flags, mss=self.local_mss)
        elif self.snd_una < self.data_end:
            end = min(self.snd_una + self.mss, self.data_end, self.snd_nxt)
            self._emit(self.snd_una, self._segment_flags(self.snd_una, end), self._payload(self.snd_una, end))
        elif self._fin_sent:
            self._emit(self.fin_seq, F.FIN | F.ACK)

    def _arm_persist(self) -> None:
        if self._persist_timer is not None:
            return
        delay = min(INITIAL_RTO << self._persist_backoff, PERSIST_MAX)
        self._persist_timer = self.sim.call_later(delay, self._on_persist)

    def _on_persist(self) -> None:
        self._persist_timer = None
        if self.state not in SYNCHRONIZED or self.snd_wnd > 0 or self.snd_nxt >= self.data_end:
            self._persist_backoff = 0
            return
        # a pure ACK just below snd_nxt is outside the peer's window, so it
        # draws an ACK carrying the current window without sending any data
        self.stats["window_probes"] += 1
        self._emit(self.snd_nxt - 1, F.ACK)
        self._persist_backoff += 1
        self._arm_persist()

    def _enter_time_wait(self) -> None:
        self._set_state(S.TIME_WAIT)
        self._stop_rto()
        if self._tw_timer is not None:
            self._tw_timer.cancel()
        self._tw_timer = self.sim.call_later(TIME_WAIT, self._teardown, None)
        self._wake_all()

    def _teardown(self, error: BaseException | None) -> None:
        self._stop_rto()
        for timer in (self._persist_timer, self._tw_timer):
            if timer is not None:
                timer.cancel()
        self._persist_timer = self._tw_timer = None
        if error is not None and self.error is None:
            self.error = error
        self._set_state(S.CLOSED)
        self.stack.forget(self)
        if self._open_waiter is not None and not self._open_waiter.done():
            self._open_waiter.set_exception(error or ConnectionResetError("connection closed"))
        self._wake_all()

    def _wake_all(self) -> None:
        for group in (self._readers, self._writers):
            waiters, group[:] = list(group), []
            for fut in waiters:
                fut.set_result(None)

    # -- input ---------------------------------------------------------------------------

    def input(self, seg: TcpSegment) -> None:
        self.stats["segments_received"] += 1
        if seg.payload:
            self.stats["data_segments_received"] += 1
        if self.state is S.SYN_SENT:
            self._input_syn_sent(seg)
            return
        seq = unwrap(seg.seq, self.rcv_nxt)
        ack = unwrap(seg.ack, self.snd_una)
        seg_len = seg.seg_len
        wnd = self.rcv_wnd
        if seg_len == 0:
            acceptable = self.rcv_nxt <= seq <= self.rcv_nxt + wnd
        else:
            acceptable = wnd > 0 and seq < self.rcv_nxt + wnd and seq + seg_len > self.rcv_nxt
        if seg.flags & F.RST:
            if self.rcv_nxt <= seq <= self.rcv_nxt + max(wnd, 1):
                self.stats["resets_received"] += 1
                self._teardown(ConnectionResetError("connection reset by peer"))
            return
        if seg.flags & F.SYN and self.state is S.SYN_RCVD and seq == self.irs:
            self._retransmit()  # peer lost our SYN+ACK
            return
        if seg.flags & F.ACK:
            if not self._process_ack(seg, seq, ack):
                return
        elif self.state is S.SYN_RCVD:
            return
        if not acceptable:
            self._send_ack()
            return
        if self.state is S.CLOSED:
            return
        consumed = False
        if seg.payload and self.state in CAN_RECEIVE:
            self._accept_data(seq, seg.payload)
            consumed = True
        if seg.flags & F.FIN:
            fin_at = seq + len(seg.payload)
            if fin_at == self.rcv_nxt:
                self._accept_fin()
            elif fin_at > self.rcv_nxt:
                self._ooo_fin = fin_at
            consumed = True
        if consumed:
            self._send_ack()
        self._output()

    def _input_syn_sent(self, seg: TcpSegment) -> None:
        ack = unwrap(seg.ack, self.snd_una)
        ack_ok = bool(seg.flags & F.ACK) and ack == self.iss + 1
        if seg.flags & F.ACK and not ack_ok:
            if not seg.flags & F.RST:
                self.stack.send_reset_for(self.local, self.remote, seg)
            return
        if seg.flags & F.RST:
            if ack_ok:
                self._teardown(ConnectionRefused("connect: Connection refused"))
            return
        if not seg.flags & F.SYN:
            return
        self.irs = seg.seq
        self.rcv_nxt = seg.seq + 1
        self._take_peer_mss(seg.mss)
        if ack_ok:
            self.snd_una = ack
            self.retries = 0
            self._stop_rto()
            self.snd_wnd = seg.window
            self.snd_wl1, self.snd_wl2 = self.irs, ack
            self._set_state(S.ESTABLISHED)
            self._send_ack()
            if self._open_waiter is not None:
                self._open_waiter.set_result(self)
            self._output()
        else:
            # simultaneous open
            self._set_state(S.SYN_RCVD)
            self._emit(self.iss, F.SYN | F.ACK, mss=self.local_mss)

    def _process_ack(self, seg: TcpSegment, seq: int, ack: int) -> bool:
        """Apply the acknowledgment field; False means drop the segment."""
        if self.state is S.SYN_RCVD:
            if not self.snd_una < ack <= self.snd_nxt:
                self.stack.send_reset_for(self.local, self.remote, seg)
                return False
            self.snd_una = ack
            self.retries = 0
            self._stop_rto()
            self.snd_wnd = seg.window
            self.snd_wl1, self.snd_wl2 = seq, ack
            self._set_state(S.ESTABLISHED)
            if self.listener is not None:
                self.listener.established(self)
            if self._open_waiter is not None and not self._open_waiter.done():
                self._open_waiter.set_result(self)
        if ack > self.snd_nxt:
            self._send_ack()
            return False
        if ack > self.snd_una:
            data_acked = min(ack, self.data_end) - max(self.snd_una, self.data_start)
            if data_acked > 0:
                del self._sndbuf[:data_acked]
                self._sndbuf_base += data_acked
                self.stats["bytes_acked"] += data_acked
            self._push_marks = [m for m in self._push_marks if m > ack]
            self.snd_una = ack
            self.retries = 0
            self._stop_rto()
            if self.snd_nxt > self.snd_una:
                self._arm_rto()
            self.stats["acks_advancing"] += 1
            self._wake(self._writers)
        if seq > self.snd_wl1 or (seq == self.snd_wl1 and ack >= self.snd_wl2):
            if self.snd_wnd == 0 and seg.window > 0:
                self._persist_backoff = 0
            self.snd_wnd = seg.window
            self.snd_wl1, self.snd_wl2 = seq, ack
        if self._fin_sent and self.snd_una == self.fin_seq + 1:
            if self.state is S.FIN_WAIT_1:
                self._set_state(S.FIN_WAIT_2)
            elif self.state is S.CLOSING:
                self._enter_time_wait()
            elif self.state is S.LAST_ACK:
                self._teardown(None)
                return False
        return True

    def _accept_data(self, seq: int, payload: bytes) -> None:
        edge = self.rcv_nxt + self.rcv_wnd
        if seq < self.rcv_nxt:
            payload = payload[self.rcv_nxt - seq:]
            seq = self.rcv_nxt
        payload = payload[:max(edge - seq, 0)]
        if not payload:
            return
        if seq > self.rcv_nxt:
            self.stats["out_of_order"] += 1
            if len(payload) > len(self._ooo.get(seq, b"")):
                self._ooo[seq] = payload
            return
        self._rcvbuf += payload
        self.rcv_nxt += len(payload)
        self.stats["bytes_received"] += len(payload)
        while self._ooo:
            first = min(self._ooo)
            if first > self.rcv_nxt:
                break
            chunk = self._ooo.pop(first)[self.rcv_nxt - first:]
            if chunk:
                self._rcvbuf += chunk
                self.rcv_nxt += len(chunk)
                self.stats["bytes_received"] += len(chunk)
        if self._ooo_fin is not None and self._ooo_fin == self.rcv_nxt:
            self._ooo_fin = None
            self._accept_fin()
        self._wake(self._readers)

    def _accept_fin(self) -> None:
        if self.fin_received:
            return
        self.fin_received = True
        self.rcv_nxt += 1
        if self.state is S.ESTABLISHED:
            self._set_state(S.CLOSE_WAIT)
        elif self.state is S.FIN_WAIT_1:
            self._set_state(S.CLOSING)
        elif self.state is S.FIN_WAIT_2:
            self._enter_time_wait()
        self._wake(self._readers)

    def _wake(self, group: list[Future]) -> None:
        waiters, group[:] = list(group), []
        for fut in waiters:
            fut.set_result(None)

    # -- awaitables -----------------------------------------------------------------------

    def readable(self) -> Future:
        fut = self.sim.future()
        if self._rcvbuf or self.fin_received or self.state is S.CLOSED:
            fut.set_result(None)
        else:
            self._readers.append(fut)
        return fut

    def writable(self, capacity: int = SND_BUFFER) -> Future:
        fut = self.sim.future()
        if len(self._sndbuf) < capacity or self.state is S.CLOSED:
            fut.set_result(None)
        else:
            self._writers.append(fut)
        return fut

    def drained(self) -> Future:
        """Resolves once everything written has been acknowledged."""
        fut = self.sim.future()

        def check(_=None):
            if self.snd_una >= self.data_end or self.state is S.CLOSED:
                fut.set_result(None)
            else:
                w = self.sim.future()
                w.add_done_callback(check)
                self._writers.append(w)
        check()
        return fut


class TcpListener:
    def __init__(self, stack: TcpStack, local: tuple[Ipv4Addr, int], backlog: int):
        self.stack = stack
        self.local = local
        self.backlog = max(backlog, 1)
        self.pending: list[TcpConnection] = []
        self.ready: list[TcpConnection] = []
        self._waiters: list[Future] = []
        self.closed = False
        self.dropped_syns = 0

    def syn(self, seg: TcpSegment, packet: Ipv4Packet) -> None:
        if len(self.pending) + len(self.ready) >= self.backlog:
            self.dropped_syns += 1
            return
        conn = TcpConnection(self.stack, (packet.dst, self.local[1]), (packet.src, seg.src_port))
        self.stack.connections[conn.key] = conn
        self.pending.append(conn)
        conn.open_passive(seg, self)

    def established(self, conn: TcpConnection) -> None:
        if conn in self.pending:
            self.pending.remove(conn)
        while self._waiters:
            fut = self._waiters.pop(0)
            if not fut.done():
                fut.set_result(conn)
                return
        self.ready.append(conn)

    def forget(self, conn: TcpConnection) -> None:
        if conn in self.pending:
            self.pending.remove(conn)

    async def accept(self, timeout: int | None = None) -> TcpConnection:
        if self.ready:
            return self.ready.pop(0)
        fut = self.stack.host.sim.future()
        self._waiters.append(fut)
        if timeout is None:
            return await fut
        return await self.stack.host.sim.wait_for(fut, timeout)

    def close(self) -> None:
        self.closed = True
        self.stack.listeners.pop(self.local, None)
        for conn in self.ready + self.pending:
            conn.abort()


class TcpStack:
    def __init__(self, host: Host, ports: PortAllocator):
        self.host = host
        self.ports = ports
        self.connections: dict[tuple, TcpConnection] = {}
        self.listeners: dict[tuple[Ipv4Addr, int], TcpListener] = {}
        self.bound: set[tuple[Ipv4Addr, int]] = set()
        self._iss_rng = host.sim.rng(f"tcp-iss:{host.name}")
        self.resets_sent = 0
        self.closed_connections: list[TcpConnection] = []
        host.handlers[PROTO_TCP] = self.input

    def socket(self) -> TcpSocket:
        return TcpSocket(self)

    def next_iss(self) -> int:
        return self._iss_rng.getrandbits(32)

    def port_in_use(self, port: int) -> bool:
        return any(p == port for _, p in self.bound) or any(c.local[1] == port for c in self.connections.values())

    def reserve(self, addr: Ipv4Addr, port: int) -> tuple[Ipv4Addr, int]:
        if port == 0:
            port = self.ports.allocate(self.port_in_use)
        elif (addr, port) in self.bound or (ANY, port) in self.bound or (
                addr == ANY and any(p == port for _, p in self.bound)):
            raise AddressInUse(port)
        self.bound.add((addr, port))
        return addr, port

    def release(self, local: tuple[Ipv4Addr, int]) -> None:
        self.bound.discard(local)

    def forget(self, conn: TcpConnection) -> None:
        if self.connections.get(conn.key) is conn:
            del self.connections[conn.key]
            self.closed_connections.append(conn)
        if conn.listener is not None:
            conn.listener.forget(conn)

    def send(self, conn: TcpConnection, seg: TcpSegment) -> None:
        src, dst = conn.local[0], conn.remote[0]
        try:
            self.host.ip_send(dst, PROTO_TCP, seg.encode(src, dst), src=src)
        except (NetworkUnreachable, FragmentationNeeded):
            conn.stats["send_errors"] += 1

    def send_reset_for(self, local, remote, seg: TcpSegment) -> None:
        if seg.flags & F.RST:
            return
        if seg.flags & F.ACK:
            reply = TcpSegment(local[1], remote[1], seg.ack, 0, F.RST, 0)
        else:
            reply = TcpSegment(local[1], remote[1], 0, (seg.seq + seg.seg_len) % MOD, F.RST | F.ACK, 0)
        self.resets_sent += 1
        try:
            self.host.ip_send(remote[0], PROTO_TCP, reply.encode(local[0], remote[0]), src=local[0])
        except (NetworkUnreachable, FragmentationNeeded):
            pass

    def input(self, packet: Ipv4Packet, iface: Interface | None) -> None:
        try:
            seg = TcpSegment.decode(packet.payload, packet.src, packet.dst)
        except DecodeError:
            self.host.counters["malformed"] += 1
            return
        if not seg.checksum_ok:
            self.host.counters["checksum_drops"] += 1
            return
        if self.host.is_broadcast(packet.dst):
            return
        key = (packet.dst, seg.dst_port, packet.src, seg.src_port)
        conn = self.connections.get(key)
        if conn is not None:
            conn.input(seg)
            return
        listener = self.listeners.get((packet.dst, seg.dst_port)) or self.listeners.get((ANY, seg.dst_port))
        if listener is not None and seg.flags & F.SYN and not seg.flags & (F.ACK | F.RST):
            listener.syn(seg, packet)
            return
        self.host.counters["tcp_no_connection"] += 1
        self.send_reset_for((packet.dst, seg.dst_port), (packet.src, seg.src_port), seg)


class TcpSocket:
    """BSD-flavoured wrapper; blocking calls are coroutines."""

    def __init__(self, stack: TcpStack, conn: TcpConnection | None = None):
        self.stack = stack
        self.local: tuple[Ipv4Addr, int] | None = conn.local if conn else None
        self.conn = conn
        self.listener: TcpListener | None = None
        self._reserved = False

    @property
    def state(self) -> TcpState:
        if self.listener is not None and not self.listener.closed:
            return S.LISTEN
        return self.conn.state if self.conn is not None else S.CLOSED

    def bind(self, addr=ANY, port: int = 0) -> None:
        if self.conn is not None:
            raise OSError("bind: socket is already connected")
        if self.local is not None:
            raise OSError("bind: socket already bound")
        self.local = self.stack.reserve(ip(addr), port)
        self._reserved = True

    def listen(self, backlog: int = 5) -> None:
        if self.local is None:
            self.bind()
        self.listener = TcpListener(self.stack, self.local, backlog)
        self.stack.listeners[self.local] = self.listener

    async def accept(self, timeout: int | None = None) -> TcpSocket:
        if self.listener is None:
            raise OSError("accept: socket is not listening")
        conn = await self.listener.accept(timeout)
        return TcpSocket(self.stack, conn)

    async def connect(self, addr, port: int, timeout: int | None = None) -> None:
        if self.conn is not None:
            raise OSError("connect: socket is already connected")
        remote = (ip(addr), port)
        src = self.stack.host.source_for(remote[0])
        if self.local is None:
            self.local = self.stack.reserve(ANY, 0)
            self._reserved = True
        local = (src if self.local[0] == ANY else self.local[0], self.local[1])
        conn = TcpConnection(self.stack, local, remote)
        self.conn = conn
        self.stack.connections[conn.key] = conn
        waiter = conn.open_active()
        if timeout is None:
            await waiter
        else:
            await self.stack.host.sim.wait_for(waiter, timeout)

    def _connected(self) -> TcpConnection:
        if self.conn is None:
            raise OSError("socket is not connected")
        return self.conn

    def send(self, data: bytes) -> int:
        return self._connected().write(bytes(data))

    async def sendall(self, data: bytes, chunk: int = SND_BUFFER) -> None:
        """Write ``data`` while keeping at most ``chunk`` bytes buffered."""
        conn = self._connected()
        view = memoryview(bytes(data))
        while view:
            await conn.writable(chunk)
            if conn.error is not None:
                raise ConnectionResetError(str(conn.error))
            room = max(chunk - conn.send_buffered, 0)
            if room == 0:
                continue
            conn.write(bytes(view[:room]))
            view = view[room:]

    async def recv(self, limit: int = 65536, timeout: int | None = None) -> bytes:
        """Up to ``limit`` bytes; b"" at end of stream."""
        conn = self._connected()
        while True:
            if conn.unread:
                return conn.read(limit)
            if conn.fin_received or conn.state is S.CLOSED:
                if conn.error is not None and not conn.fin_received:
                    raise ConnectionResetError(str(conn.error))
                return b""
            fut = conn.readable()
            if timeout is None:
                await fut
            else:
                await self.stack.host.sim.wait_for(fut, timeout)

    async def recv_line(self, timeout: int | None = None) -> bytes:
        buf = bytearray()
        while b"\n" not in buf:
            chunk = await self.recv(1, timeout)
            if not chunk:
                break
            buf += chunk
        return bytes(buf)

    def close(self) -> None:
        if self.listener is not None:
            self.listener.close()
        if self.conn is not None:
            self.conn.close()
        if self._reserved and self.local is not None:
            self.stack.release(self.local)
            self._reserved = False
