"""A small Wireshark-like display filter language over dissected frames.

    expr    := or_expr
    or_expr := and_expr (("or" | "||") and_expr)*
    and_expr:= unary (("and" | "&&") unary)*
    unary   := ("not" | "!") unary | "(" expr ")" | atom
    atom    := PROTOCOL | FIELD [OP VALUE]

Protocol words test the IP protocol number, so every fragment of a UDP
datagram counts as ``udp``; ``dhcp`` and ``rip`` need the UDP header and
therefore match only the first fragment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

from ..wire.addr import AddressError, MacAddr, ip
from ..wire.dissect import Dissection
from ..wire.ipv4 import PROTO_ICMP, PROTO_TCP, PROTO_UDP
from ..wire.tcp import TcpFlags

ETHERTYPE_RARP = 0x8035


class FilterError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at column {position + 1}")
        self.position = position


Predicate = Callable[[Dissection], bool]

PROTOCOLS: dict[str, Predicate] = {
    "eth": lambda d: d.eth_src is not None,
    "arp": lambda d: d.arp is not None,
    "rarp": lambda d: d.ethertype == ETHERTYPE_RARP,
    "ip": lambda d: d.ip is not None,
    "icmp": lambda d: d.ip is not None and d.ip.protocol == PROTO_ICMP,
    "udp": lambda d: d.ip is not None and d.ip.protocol == PROTO_UDP,
    "tcp": lambda d: d.ip is not None and d.ip.protocol == PROTO_TCP,
    "dhcp": lambda d: d.is_dhcp,
    "bootp": lambda d: d.is_dhcp,
    "rip": lambda d: d.is_rip,
    "frag": lambda d: d.ip is not None and d.ip.is_fragment,
}


def _tcp_flag(flag: TcpFlags):
    return lambda d: (1 if d.tcp.flags & flag else 0,) if d.tcp is not None else ()


# each accessor returns the tuple of values the field takes in a frame (empty if absent)
FIELDS: dict[str, tuple[str, Callable[[Dissection], tuple]]] = {
    "frame.len": ("int", lambda d: (d.length,)),
    "eth.src": ("mac", lambda d: (d.eth_src,) if d.eth_src is not None else ()),
    "eth.dst": ("mac", lambda d: (d.eth_dst,) if d.eth_dst is not None else ()),
    "eth.addr": ("mac", lambda d: (d.eth_src, d.eth_dst) if d.eth_src is not None else ()),
    "eth.type": ("int", lambda d: (d.ethertype,) if d.ethertype is not None else ()),
    "arp.opcode": ("int", lambda d: (d.arp.oper,) if d.arp else ()),
    "arp.src.proto_ipv4": ("ip", lambda d: (d.arp.spa,) if d.arp else ()),
    "arp.dst.proto_ipv4": ("ip", lambda d: (d.arp.tpa,) if d.arp else ()),
    "arp.src.hw_mac": ("mac", lambda d: (d.arp.sha,) if d.arp else ()),
    "ip.src": ("ip", lambda d: (d.ip.src,) if d.ip else ()),
    "ip.dst": ("ip", lambda d: (d.ip.dst,) if d.ip else ()),
    "ip.addr": ("ip", lambda d: (d.ip.src, d.ip.dst) if d.ip else ()),
    "ip.ttl": ("int", lambda d: (d.ip.ttl,) if d.ip else ()),
    "ip.proto": ("int", lambda d: (d.ip.protocol,) if d.ip else ()),
    "ip.id": ("int", lambda d: (d.ip.identification,) if d.ip else ()),
    "ip.len": ("int", lambda d: (d.ip.total_length,) if d.ip else ()),
    "ip.flags.df": ("int", lambda d: (int(d.ip.df),) if d.ip else ()),
    "ip.flags.mf": ("int", lambda d: (int(d.ip.mf),) if d.ip else ()),
    "ip.frag_offset": ("int", lambda d: (d.ip.fragment_offset * 8,) if d.ip else ()),
    "icmp.type": ("int", lambda d: (d.icmp.type,) if d.icmp else ()),
    "icmp.code": ("int", lambda d: (d.icmp.code,) if d.icmp else ()),
    "udp.srcport": ("int", lambda d: (d.udp.src_port,) if d.udp else ()),
    "udp.dstport": ("int", lambda d: (d.udp.dst_port,) if d.udp else ()),
    "udp.port": ("int", lambda d: (d.udp.src_port, d.udp.dst_port) if d.udp else ()),
    "udp.length": ("int", lambda d: (d.udp.length,) if d.udp else ()),
    "tcp.srcport": ("int", lambda d: (d.tcp.src_port,) if d.tcp else ()),
    "tcp.dstport": ("int", lambda d: (d.tcp.dst_port,) if d.tcp else ()),
    "tcp.port": ("int", lambda d: (d.tcp.src_port, d.tcp.dst_port) if d.tcp else ()),
    "tcp.len": ("int", lambda d: (len(d.tcp.payload),) if d.tcp else ()),
    "tcp.seq": ("int", lambda d: (d.tcp.seq,) if d.tcp else ()),
    "tcp.ack": ("int", lambda d: (d.tcp.ack,) if d.tcp else ()),
    "tcp.window_size": ("int", lambda d: (d.tcp.window,) if d.tcp else ()),
    "tcp.options.mss_val": ("int", lambda d: (d.tcp.mss,) if d.tcp and d.tcp.mss is not None else ()),
    "tcp.flags.syn": ("int", _tcp_flag(TcpFlags.SYN)),
    "tcp.flags.ack": ("int", _tcp_flag(TcpFlags.ACK)),
    "tcp.flags.fin": ("int", _tcp_flag(TcpFlags.FIN)),
    "tcp.flags.reset": ("int", _tcp_flag(TcpFlags.RST)),
    "tcp.flags.push": ("int", _tcp_flag(TcpFlags.PSH)),
}

_OPS = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
    "<=": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
}
_TOKEN = re.compile(r"\s*(?:(==|!=|<=|>=|<|>|&&|\|\||!|\(|\))|([A-Za-z0-9_.:\-]+))")


@dataclass
class _Tok:
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            start = len(text) - len(text[pos:].lstrip())
            raise FilterError(f"unexpected character {text[start]!r}", start)
        word = m.group(1) or m.group(2)
        toks.append(_Tok(word, m.start(1) if m.group(1) else m.start(2)))
        pos = m.end()
    return toks


def _coerce(kind: str, tok: _Tok):
    try:
        if kind == "int":
            return int(tok.text, 0)
        if kind == "ip":
            return ip(tok.text)
        return MacAddr.parse(tok.text)
    except (ValueError, AddressError):
        raise FilterError(f"bad {kind} value {tok.text!r}", tok.pos) from None


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise FilterError("unexpected end of filter", len(self.text))
        self.i += 1
        return tok

    def parse(self) -> Predicate:
        if not self.toks:
            return lambda d: True
        pred = self.or_expr()
        tok = self.peek()
        if tok is not None:
            raise FilterError(f"unexpected {tok.text!r}", tok.pos)
        return pred

    def or_expr(self) -> Predicate:
        parts = [self.and_expr()]
        while (tok := self.peek()) is not None and tok.text in ("or", "||"):
            self.take()
            parts.append(self.and_expr())
        return parts[0] if len(parts) == 1 else (lambda d: any(p(d) for p in parts))

    def and_expr(self) -> Predicate:
        parts = [self.unary()]
        while (tok := self.peek()) is not None and tok.text in ("and", "&&"):
            self.take()
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else (lambda d: all(p(d) for p in parts))

    def unary(self) -> Predicate:
        tok = self.take()
        if tok.text in ("not", "!"):
            inner = self.unary()
            return lambda d: not inner(d)
        if tok.text == "(":
            inner = self.or_expr()
            close = self.take()
            if close.text != ")":
                raise FilterError("expected ')'", close.pos)
            return inner
        return self.atom(tok)

    def atom(self, tok: _Tok) -> Predicate:
        name = tok.text.lower()
        if name in PROTOCOLS:
            return PROTOCOLS[name]
        if name not in FIELDS:
            raise FilterError(f"unknown field or protocol {tok.text!r}", tok.pos)
        kind, getter = FIELDS[name]
        nxt = self.peek()
        if nxt is None or nxt.text not in _OPS:
            return lambda d: len(getter(d)) > 0
        op = _OPS[self.take().text]
        negate = nxt.text == "!="
        value = _coerce(kind, self.take())
        if negate:
            # "field != v" holds when the field is present and no occurrence equals v
            return lambda d: bool(vals := getter(d)) and all(x != value for x in vals)
        return lambda d: any(op(x, value) for x in getter(d))


def compile_filter(text: str) -> Predicate:
    """Compile ``text`` into a predicate; raises FilterError with a column."""
    return _Parser(text).parse()
