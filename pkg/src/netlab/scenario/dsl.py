"""Scenario file parser. The grammar is documented in docs/dsl.md."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from ..fabric.link import DEFAULT_DELAY, DEFAULT_MTU, DEFAULT_RATE
from ..network import NODE_KINDS
from ..wire.addr import AddressError, MacAddr, ip
from .commands import CommandError, Invocation, parse_command, parse_link_command, parse_rate, parse_time
from .filters import FilterError, compile_filter
from .stats import LEDGER_KEYS

OPS = ("==", "!=", "<", "<=", ">", ">=")
DECL_KINDS = NODE_KINDS + ("switch",)


class ScenarioError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1, source: str = "<scenario>"):
        super().__init__(f"{source}:{line}:{column}: {message}")
        self.line = line
        self.column = column
        self.message = message


@dataclass(frozen=True)
class Token:
    text: str
    column: int  # 1-based
    quoted: bool = False


_TOKEN = re.compile(r"""\s*(?:"((?:[^"\\]|\\.)*)"|'([^']*)'|(\#.*)|(\S+))""")


def tokenize(line: str, lineno: int = 0, source: str = "<scenario>") -> list[Token]:
    """Split on whitespace honouring single/double quotes; ``#`` starts a comment."""
    toks = []
    pos = 0
    while pos < len(line):
        m = _TOKEN.match(line, pos)
        if m is None or m.end() == pos:
            if line[pos:].strip() == "":
                break
            raise ScenarioError("unterminated quote", lineno, pos + 1, source)
        pos = m.end()
        if m.group(3) is not None:
            break
        if m.group(1) is not None:
            toks.append(Token(re.sub(r"\\(.)", r"\1", m.group(1)), m.start(1), True))
        elif m.group(2) is not None:
            toks.append(Token(m.group(2), m.start(2), True))
        elif m.group(4) is not None:
            if m.group(4)[0] in "\"'":
                raise ScenarioError("unterminated quote", lineno, m.start(4) + 1, source)
            toks.append(Token(m.group(4), m.start(4) + 1))
    return toks


@dataclass
class LinkDecl:
    a: str
    b: str
    mtu: int = DEFAULT_MTU
    rate: int = DEFAULT_RATE
    delay: int = DEFAULT_DELAY
    drop: float = 0.0
    line: int = 0


@dataclass
class TimedCommand:
    time: int
    node: str
    inv: Invocation
    line: int


@dataclass
class Assertion:
    kind: str
    args: list[str]
    text: str
    line: int
    time: int | None = None


@dataclass
class Scenario:
    name: str = "scenario"
    seed: int = 0
    nodes: dict[str, str] = field(default_factory=dict)
    macs: dict[str, MacAddr] = field(default_factory=dict)
    links: list[LinkDecl] = field(default_factory=list)
    captures: list[str] = field(default_factory=list)
    capture_all: bool = False
    end: int | None = None
    halt_on_error: bool = False
    commands: list[TimedCommand] = field(default_factory=list)
    assertions: list[Assertion] = field(default_factory=list)
    base_dir: Path = field(default_factory=Path)

    def endpoints(self) -> list[str]:
        return [e for link in self.links for e in (link.a, link.b)]

    def tap_labels(self) -> list[str]:
        """Interfaces to capture on: the explicit list, or every cabled host interface."""
        if self.captures and not self.capture_all:
            return list(self.captures)
        labels = [e for e in self.endpoints() if self.nodes.get(e.partition(".")[0]) != "switch"]
        return labels + [c for c in self.captures if c not in labels]

    def horizon(self) -> int:
        if self.end is not None:
            return self.end
        last = max([c.time for c in self.commands] + [a.time or 0 for a in self.assertions] + [0])
        return last + DEFAULT_TAIL


DEFAULT_TAIL = 130 * 1_000_000_000


class _Parser:
    def __init__(self, text: str, source: str, base_dir: Path):
        self.lines = text.splitlines()
        self.source = source
        self.sc = Scenario(name=Path(source).stem, base_dir=base_dir)
        self.last_time: dict[str, tuple[int, int]] = {}
        self.lineno = 0

    def err(self, message: str, tok: Token | None = None, column: int | None = None) -> ScenarioError:
        col = column if column is not None else (tok.column if tok is not None else 1)
        return ScenarioError(message, self.lineno, col, self.source)

    def parse(self) -> Scenario:
        i = 0
        while i < len(self.lines):
            self.lineno = i + 1
            raw = self.lines[i]
            i += 1
            toks = tokenize(raw, self.lineno, self.source)
            if not toks:
                continue
            script: list[str] = []
            if toks[-1].text.startswith("<<") and not toks[-1].quoted:
                delim = toks[-1].text[2:]
                if not delim:
                    raise self.err("heredoc needs a terminator word", toks[-1])
                toks = toks[:-1]
                start = self.lineno
                while True:
                    if i >= len(self.lines):
                        raise ScenarioError(f"heredoc opened here is missing its {delim} line", start, 1, self.source)
                    body = self.lines[i]
                    i += 1
                    if body.strip() == delim:
                        break
                    script.append(body)
            self.statement(toks, script)
        self.sc.commands.sort(key=lambda c: c.time)  # stable: file order within equal times
        return self.sc

    # -- statements --------------------------------------------------------------------

    def statement(self, toks: list[Token], script: list[str]) -> None:
        head = toks[0].text
        if script and head != "at":
            raise self.err("heredocs are only allowed on timed commands", toks[0])
        if head in DECL_KINDS:
            if len(toks) < 2:
                raise self.err(f"{head} needs at least one name", toks[0])
            for t in toks[1:]:
                if not re.fullmatch(r"[A-Za-z][A-Za-z0-9_-]*", t.text) or t.text in ("link", "all"):
                    raise self.err(f"bad node name {t.text!r}", t)
                if t.text in self.sc.nodes:
                    raise self.err(f"node {t.text} declared twice", t)
                self.sc.nodes[t.text] = head
        elif head == "link":
            self.link(toks)
        elif head == "mac":
            if len(toks) != 3:
                raise self.err("usage: mac NODE.IF MAC", toks[0])
            self.endpoint(toks[1], host_only=True)
            try:
                self.sc.macs[toks[1].text] = MacAddr.parse(toks[2].text)
            except (AddressError, ValueError):
                raise self.err(f"malformed hardware address {toks[2].text!r}", toks[2]) from None
        elif head == "capture":
            if len(toks) < 2:
                raise self.err("usage: capture all | capture NODE.IF ...", toks[0])
            for t in toks[1:]:
                if t.text == "all":
                    self.sc.capture_all = True
                    continue
                self.endpoint(t, cabled=True)
                if t.text not in self.sc.captures:
                    self.sc.captures.append(t.text)
        elif head == "seed":
            if len(toks) != 2 or not toks[1].text.isdigit():
                raise self.err("usage: seed N", toks[0])
            self.sc.seed = int(toks[1].text)
        elif head == "end":
            if len(toks) != 2:
                raise self.err("usage: end TIME", toks[0])
            self.sc.end = self.time(toks[1])
        elif head == "option":
            if len(toks) != 2 or toks[1].text != "halt-on-error":
                raise self.err("unknown option; supported: halt-on-error", toks[-1])
            self.sc.halt_on_error = True
        elif head == "at":
            self.timed(toks, script)
        elif head == "assert":
            self.assertion(toks)
        else:
            raise self.err(f"unknown statement {head!r}", toks[0])

    def time(self, tok: Token) -> int:
        try:
            return parse_time(tok.text)
        except CommandError:
            raise self.err(f"bad time {tok.text!r} (use e.g. 5s, 200ms, 100us)", tok) from None

    def node(self, tok: Token, hosts_only: bool = True) -> str:
        kind = self.sc.nodes.get(tok.text)
        if kind is None:
            raise self.err(f"undeclared node {tok.text}", tok)
        if hosts_only and kind == "switch":
            raise self.err(f"{tok.text} is a switch and runs no commands", tok)
        return tok.text

    def endpoint(self, tok: Token, host_only: bool = False, cabled: bool = False) -> str:
        name, sep, ifname = tok.text.partition(".")
        if not sep or not ifname:
            raise self.err(f"endpoint {tok.text!r} must look like NODE.IF", tok)
        kind = self.sc.nodes.get(name)
        if kind is None:
            raise self.err(f"undeclared node {name}", tok)
        if kind == "switch" and (host_only or not ifname.isdigit()):
            raise self.err(f"{tok.text}: switch ports are numbers and carry no configuration", tok)
        if cabled and tok.text not in self.sc.endpoints():
            raise self.err(f"{tok.text} is not attached to any link", tok)
        return tok.text

    def link(self, toks: list[Token]) -> None:
        if len(toks) < 3:
            raise self.err("usage: link A.IF B.IF [mtu=N] [rate=R] [delay=T] [drop=P]", toks[0])
        a, b = self.endpoint(toks[1]), self.endpoint(toks[2])
        for t in (toks[1], toks[2]):
            if t.text in self.sc.endpoints():
                raise self.err(f"{t.text} is already cabled", t)
        if a == b:
            raise self.err("a link needs two distinct endpoints", toks[2])
        decl = LinkDecl(a, b, line=self.lineno)
        for t in toks[3:]:
            key, eq, value = t.text.partition("=")
            if not eq:
                raise self.err(f"link parameters look like key=value, got {t.text!r}", t)
            try:
                if key == "mtu":
                    decl.mtu = int(value)
                    if not 68 <= decl.mtu <= 65535:
                        raise ValueError
                elif key == "rate":
                    decl.rate = parse_rate(value)
                    if decl.rate <= 0:
                        raise ValueError
                elif key == "delay":
                    decl.delay = parse_time(value)
                elif key == "drop":
                    decl.drop = float(value)
                    if not 0.0 <= decl.drop <= 1.0:
                        raise ValueError
                else:
                    raise self.err(f"unknown link parameter {key!r}", t)
            except (ValueError, CommandError) as exc:
                if isinstance(exc, ScenarioError):
                    raise
                raise self.err(f"bad value for {key}: {value!r}", t) from None
        self.sc.links.append(decl)

    def timed(self, toks: list[Token], script: list[str]) -> None:
        if len(toks) < 4:
            raise self.err("usage: at TIME NODE VERB ARGS... | at TIME link NODE.IF down|up", toks[0])
        t = self.time(toks[1])
        argv = [x.text for x in toks[3:]]
        if toks[2].text == "link":
            self.endpoint(toks[3], cabled=True)
            node = "link"
            inv = self.invocation(parse_link_command, argv, toks[3:])
        else:
            node = self.node(toks[2])
            inv = self.invocation(parse_command, argv, toks[3:])
            if inv.verb == "ios":
                if self.sc.nodes[node] != "cisco":
                    raise self.err(f"{node} is not a cisco node", toks[3])
                if script and inv.args["line"] is not None:
                    raise self.err("ios takes either a heredoc or a single line", toks[4])
                if not script and inv.args["line"] is None:
                    raise self.err("ios needs a heredoc (ios <<END) or a command line", toks[3])
                inv.script = script
            elif script:
                raise self.err(f"{inv.verb} does not read a heredoc", toks[3])
            self.check_interfaces(node, inv, toks)
        prev = self.last_time.get(node)
        if prev is not None and t < prev[0]:
            raise self.err(f"time regression for {node}: {toks[1].text} comes after a command at "
                           f"{prev[0] / 1e9:g}s on line {prev[1]}", toks[1])
        self.last_time[node] = (t, self.lineno)
        self.sc.commands.append(TimedCommand(t, node, inv, self.lineno))

    def invocation(self, parser, argv: list[str], toks: list[Token]) -> Invocation:
        try:
            return parser(argv)
        except CommandError as exc:
            idx = exc.index if exc.index is not None and exc.index < len(toks) else None
            col = toks[idx].column if idx is not None else toks[0].column
            raise self.err(str(exc), column=col) from None

    def check_interfaces(self, node: str, inv: Invocation, toks: list[Token]) -> None:
        names = {e.partition(".")[2] for e in self.sc.endpoints() if e.partition(".")[0] == node}
        wanted = None
        if inv.verb in ("ifconfig", "dhclient"):
            wanted = inv.args.get("iface")
        elif inv.verb == "route" and inv.args.get("dev"):
            wanted = inv.args["dev"]
        elif inv.verb == "arp" and inv.args.get("dev"):
            wanted = inv.args["dev"]
        if wanted is not None and wanted not in names:
            tok = next((t for t in toks if t.text == wanted), toks[3])
            raise self.err(f"{node} has no interface {wanted}", tok)

    # -- assertions -------------------------------------------------------------------

    def assertion(self, toks: list[Token]) -> None:
        rest = toks[1:]
        when = None
        if rest and rest[0].text == "at":
            if len(rest) < 2:
                raise self.err("assert at needs a time", rest[0])
            when = self.time(rest[1])
            rest = rest[2:]
        if not rest:
            raise self.err("assert needs a kind", toks[0])
        kind = rest[0].text
        args = rest[1:]
        check = _ASSERT_SHAPES.get(kind)
        if check is None:
            raise self.err(f"unknown assertion {kind!r}; expected one of: {', '.join(_ASSERT_SHAPES)}", rest[0])
        check(self, rest[0], args)
        text = " ".join(f'"{t.text}"' if t.quoted else t.text for t in rest)
        self.sc.assertions.append(Assertion(kind, [t.text for t in args], text, self.lineno, when))

    def want(self, head: Token, args: list[Token], n: int | tuple[int, ...], usage: str) -> None:
        allowed = (n,) if isinstance(n, int) else n
        if len(args) not in allowed:
            raise self.err(f"usage: assert {head.text} {usage}", head)

    def op(self, tok: Token) -> None:
        if tok.text not in OPS:
            raise self.err(f"expected a comparison ({' '.join(OPS)}), got {tok.text!r}", tok)

    def filt(self, tok: Token) -> None:
        try:
            compile_filter(tok.text)
        except FilterError as exc:
            raise self.err(f"bad filter: {exc}", column=tok.column + int(tok.quoted) + exc.position) from None

    def tap(self, tok: Token) -> None:
        self.endpoint(tok, cabled=True)


def _shape_count(p: _Parser, head: Token, args: list[Token]) -> None:
    p.want(head, args, 4, "NODE.IF FILTER OP N")
    p.tap(args[0])
    p.filt(args[1])
    p.op(args[2])
    _int_tok(p, args[3])


def _int_tok(p: _Parser, tok: Token) -> None:
    if not re.fullmatch(r"-?\d+", tok.text):
        raise p.err(f"expected an integer, got {tok.text!r}", tok)


def _shape_report(fields: tuple[str, ...], flags: tuple[str, ...] = ()):
    def check(p: _Parser, head: Token, args: list[Token]) -> None:
        if len(args) == 2 and args[1].text in flags:
            return
        p.want(head, args, 4, f"REF FIELD OP VALUE (fields: {', '.join(fields)}; flags: {', '.join(flags)})")
        if args[1].text not in fields:
            raise p.err(f"unknown {head.text} field {args[1].text!r}; expected one of {', '.join(fields)}", args[1])
        p.op(args[2])
    return check


def _shape_mtu(p: _Parser, head: Token, args: list[Token]) -> None:
    p.want(head, args, 3, "REF OP N")
    p.op(args[1])
    _int_tok(p, args[2])


def _shape_transcript(p: _Parser, head: Token, args: list[Token]) -> None:
    p.want(head, args, 3, "NODE golden PATH | NODE contains TEXT")
    p.node(args[0])
    if args[1].text not in ("golden", "contains"):
        raise p.err("expected 'golden' or 'contains'", args[1])


def _shape_show(p: _Parser, head: Token, args: list[Token]) -> None:
    p.want(head, args, 4, "NODE WHAT golden PATH | NODE WHAT contains TEXT")
    p.node(args[0])
    if args[2].text not in ("golden", "contains"):
        raise p.err("expected 'golden' or 'contains'", args[2])


def _shape_counter(p: _Parser, head: Token, args: list[Token]) -> None:
    p.want(head, args, 4, "NODE NAME OP N")
    p.node(args[0])
    p.op(args[2])
    _int_tok(p, args[3])


def _shape_overhead(p: _Parser, head: Token, args: list[Token]) -> None:
    p.want(head, args, 5, "NODE.IF FILTER FIELD OP N")
    p.tap(args[0])
    p.filt(args[1])
    if args[2].text not in LEDGER_KEYS + ("frames", "discrepancy"):
        raise p.err(f"unknown ledger field {args[2].text!r}", args[2])
    p.op(args[3])
    _int_tok(p, args[4])


def _shape_loopfree(p: _Parser, head: Token, args: list[Token]) -> None:
    p.want(head, args, 0, "")


def _shape_tcp(p: _Parser, head: Token, args: list[Token]) -> None:
    p.want(head, args, (4, 6), "NODE.IF [port N] handshake|data|teardown OP N")
    p.tap(args[0])
    if len(args) == 6:
        if args[1].text != "port":
            raise p.err("expected 'port'", args[1])
        _int_tok(p, args[2])
        args = [args[0]] + args[3:]
    if args[1].text not in ("handshake", "data", "teardown", "other"):
        raise p.err("expected handshake, data, teardown or other", args[1])
    p.op(args[2])
    _int_tok(p, args[3])


def _shape_arp(p: _Parser, head: Token, args: list[Token]) -> None:
    p.want(head, args, 4, "NODE IP OP MAC|none")
    p.node(args[0])
    try:
        ip(args[1].text)
    except AddressError:
        raise p.err(f"malformed address {args[1].text!r}", args[1]) from None
    if args[2].text not in ("==", "!="):
        raise p.err("arp assertions compare with == or !=", args[2])


def _shape_lookup(p: _Parser, head: Token, args: list[Token]) -> None:
    p.want(head, args, 4, "NODE DST OP GATEWAY|direct|unreachable")
    p.node(args[0])
    try:
        ip(args[1].text)
    except AddressError:
        raise p.err(f"malformed address {args[1].text!r}", args[1]) from None
    if args[2].text not in ("==", "!="):
        raise p.err("lookup assertions compare with == or !=", args[2])


def _shape_failures(p: _Parser, head: Token, args: list[Token]) -> None:
    p.want(head, args, 2, "OP N")
    p.op(args[0])
    _int_tok(p, args[1])


def _shape_pings(p: _Parser, head: Token, args: list[Token]) -> None:
    p.want(head, args, 2, "golden PATH")
    if args[0].text != "golden":
        raise p.err("expected 'golden'", args[0])


_ASSERT_SHAPES = {
    "count": _shape_count,
    "ping": _shape_report(("sent", "received", "loss", "errors"), ("success", "fail")),
    "traceroute": _shape_report(("hops", "probes", "path"), ("reached", "unreached")),
    "iperf": _shape_report(("bytes", "count", "mss", "error"), ("ok", "failed")),
    "mtu": _shape_mtu,
    "dhcp": _shape_report(("address", "router", "messages"), ("bound", "unbound")),
    "echo": _shape_report(("sent", "received", "error"), ("ok", "failed")),
    "transcript": _shape_transcript,
    "show": _shape_show,
    "counter": _shape_counter,
    "overhead": _shape_overhead,
    "loopfree": _shape_loopfree,
    "tcp": _shape_tcp,
    "arp": _shape_arp,
    "lookup": _shape_lookup,
    "failures": _shape_failures,
    "pings": _shape_pings,
}
ASSERTION_KINDS = tuple(_ASSERT_SHAPES)


def parse_scenario(text: str, source: str = "<scenario>", base_dir: Path | str | None = None) -> Scenario:
    """Parse scenario text; raises ScenarioError carrying line and column."""
    base = Path(base_dir) if base_dir is not None else (Path(source).parent if source != "<scenario>" else Path.cwd())
    return _Parser(text, source, base).parse()


def load_scenario(path: Path | str) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), str(path), path.parent)
