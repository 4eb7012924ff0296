"""Drive a parsed scenario on the simulator and write its output tree.

Layout of ``out_dir``::

    captures/NODE_IF.pcap     one per capture tap
    transcripts/NODE.txt      console lines of every host, timestamped
    assertions.txt            PASS/FAIL line per assertion
"""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from pathlib import Path

from ..fabric.sim import SECOND
from ..netapps import EchoServer, IperfServer
from ..network import Network
from ..routing import NetworkUnreachable
from ..wire.addr import AddressError, MacAddr, ip
from . import stats
from .commands import Console, Outcome
from .dsl import Assertion, Scenario
from .ios import IosError, session_for

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG = 0, 1, 2
_CMP = {"==": operator.eq, "!=": operator.ne, "<": operator.lt, "<=": operator.le,
        ">": operator.gt, ">=": operator.ge}


@dataclass
class AssertionResult:
    assertion: Assertion
    passed: bool
    observed: str

    def line(self) -> str:
        a = self.assertion
        when = f"at {a.time / SECOND:g}s " if a.time is not None else ""
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} line {a.line}: {when}{a.text}  [observed: {self.observed}]"


@dataclass
class RunResult:
    scenario: Scenario
    net: Network
    console: Console
    results: list[AssertionResult] = field(default_factory=list)
    halted: str | None = None

    @property
    def passed(self) -> bool:
        return self.halted is None and all(r.passed for r in self.results)

    @property
    def exit_code(self) -> int:
        if self.halted is not None:
            return EXIT_CONFIG
        return EXIT_OK if self.passed else EXIT_ASSERT


def build_network(sc: Scenario, seed: int | None = None) -> Network:
    net = Network(sc.seed if seed is None else seed)
    for name, kind in sc.nodes.items():
        if kind == "switch":
            net.add_switch(name)
        else:
            net.add_host(name, kind)
    for link in sc.links:
        net.connect(link.a, link.b, mtu=link.mtu, rate=link.rate, delay=link.delay, drop=link.drop)
    for label, mac in sc.macs.items():
        node, _, ifname = label.partition(".")
        net.port(label)
        net.host(node).ifconfig_set_mac(ifname, mac)
    labels = sc.tap_labels()
    labels += [a.args[0] for a in sc.assertions if a.kind in ("count", "overhead", "tcp") and a.args[0] not in labels]
    for label in labels:
        net.capture(label)
    return net


class Runner:
    def __init__(self, sc: Scenario, seed: int | None = None, halt_on_error: bool | None = None,
                 update_goldens: bool = False):
        self.sc = sc
        self.net = build_network(sc, seed)
        self.console = Console(self.net)
        self.halt_on_error = sc.halt_on_error if halt_on_error is None else halt_on_error
        self.update_goldens = update_goldens
        self.result = RunResult(sc, self.net, self.console)
        for cmd in sc.commands:
            self.net.sim.schedule(cmd.time, self._exec, cmd)

    def _exec(self, cmd) -> None:
        if self.result.halted is not None:
            return
        before = len(self.console.failures)
        self.console.execute(cmd.node, cmd.inv)
        if self.halt_on_error and len(self.console.failures) > before:
            self.result.halted = f"line {cmd.line}: {self.console.failures[-1][2]}"

    def _advance(self, t: int) -> None:
        sim = self.net.sim
        while self.result.halted is None:
            nxt = sim.next_time()
            if nxt is None or nxt > t:
                break
            sim.step()
        if self.result.halted is None:
            sim.now = max(sim.now, t)

    def run(self) -> RunResult:
        horizon = self.sc.horizon()
        timed = sorted((a for a in self.sc.assertions if a.time is not None), key=lambda a: a.time)
        for a in timed:
            self._advance(a.time)
            if self.result.halted is not None:
                break
            self.result.results.append(self.evaluate(a))
        self._advance(max(horizon, self.net.sim.now))
        if self.result.halted is None:
            for a in self.sc.assertions:
                if a.time is None:
                    self.result.results.append(self.evaluate(a))
        order = {id(a): i for i, a in enumerate(self.sc.assertions)}
        self.result.results.sort(key=lambda r: order[id(r.assertion)])
        return self.result

    # -- assertions ----------------------------------------------------------------------

    def evaluate(self, a: Assertion) -> AssertionResult:
        try:
            ok, observed = getattr(self, "_a_" + a.kind)(a.args)
        except (LookupError, ValueError, AddressError, IosError, OSError) as exc:
            ok, observed = False, f"error: {exc}"
        return AssertionResult(a, bool(ok), str(observed))

    def _frames(self, label: str) -> list[stats.Frame]:
        return stats.load(self.net.capture(label).capture)

    @staticmethod
    def _compare(observed, op: str, expected: str) -> bool:
        if isinstance(observed, bool):
            raise ValueError("flag fields take no comparison")
        if isinstance(observed, (int, float)):
            return _CMP[op](observed, type(observed)(expected))
        if observed is None:
            return _CMP[op]("none", expected)
        try:
            return _CMP[op](ip(observed), ip(expected))
        except (AddressError, ValueError):
            return _CMP[op](str(observed), expected)

    def _outcome(self, ref: str, verb: str) -> Outcome:
        out = self.console.find(ref, verb)
        if out is None:
            raise LookupError(f"no {verb} result named {ref}")
        if out.result is None:
            raise LookupError(f"{verb} {ref} has not finished" if out.error is None else out.error)
        return out

    def _report(self, args: list[str], verb: str, fields: dict, flags: dict):
        out = self._outcome(args[0], verb)
        if len(args) == 2:
            value = flags[args[1]](out.result)
            return value, f"{args[1]}={value}"
        value = fields[args[1]](out.result)
        return self._compare(value, args[2], args[3]), value

    def _a_count(self, args):
        n = stats.count(self._frames(args[0]), args[1])
        return self._compare(n, args[2], args[3]), n

    def _a_ping(self, args):
        return self._report(args, "ping", {
            "sent": lambda r: r.sent, "received": lambda r: r.received,
            "loss": lambda r: round(r.loss_pct), "errors": lambda r: sum(p.error is not None for p in r.probes),
        }, {"success": lambda r: r.success, "fail": lambda r: not r.success})

    def _a_traceroute(self, args):
        return self._report(args, "traceroute", {
            "hops": lambda r: len(r.hops), "probes": lambda r: r.probes_sent,
            "path": lambda r: ",".join(str(x) if x is not None else "*" for x in r.path),
        }, {"reached": lambda r: r.reached, "unreached": lambda r: not r.reached})

    @staticmethod
    def _iperf_report(obj):
        if isinstance(obj, IperfServer):
            if not obj.reports:
                raise LookupError("iperf server saw no traffic")
            return obj.reports[-1]
        return obj

    def _a_iperf(self, args):
        rep = lambda f: (lambda r: f(self._iperf_report(r)))  # noqa: E731
        return self._report(args, "iperf", {
            "bytes": rep(lambda r: r.bytes), "count": rep(lambda r: r.count),
            "mss": rep(lambda r: r.mss), "error": rep(lambda r: r.error or "none"),
        }, {"ok": rep(lambda r: r.error is None), "failed": rep(lambda r: r.error is not None)})

    def _a_mtu(self, args):
        mtu = self._outcome(args[0], "mtu-discover").result.mtu
        return self._compare(mtu, args[1], args[2]), mtu

    def _a_dhcp(self, args):
        return self._report(args, "dhclient", {
            "address": lambda r: r.address, "router": lambda r: r.router,
            "messages": lambda r: len(r.messages),
        }, {"bound": lambda r: r.bound, "unbound": lambda r: not r.bound})

    def _a_echo(self, args):
        verb = "echo-client"
        if self.console.find(args[0], "echo-client") is None:
            verb = "echo-server"
        log = lambda f: (lambda r: f(r.log if isinstance(r, EchoServer) else r))  # noqa: E731
        return self._report(args, verb, {
            "sent": log(lambda g: len(g.sent)), "received": log(lambda g: len(g.received)),
            "error": log(lambda g: g.error or "none"),
        }, {"ok": log(lambda g: g.error is None), "failed": log(lambda g: g.error is not None)})

    def _text_check(self, text: str, mode: str, arg: str):
        if mode == "contains":
            return arg in text, "found" if arg in text else "missing"
        path = self.sc.base_dir / arg
        if self.update_goldens:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        want = path.read_text(encoding="utf-8")
        if text == want:
            return True, "matches golden"
        got_lines, want_lines = text.splitlines(), want.splitlines()
        for i, (g, w) in enumerate(zip(got_lines, want_lines)):
            if g != w:
                return False, f"line {i + 1} differs: {g!r} != {w!r}"
        return False, f"{len(got_lines)} lines, golden has {len(want_lines)}"

    def _a_transcript(self, args):
        return self._text_check(self.net.host(args[0]).transcript(), args[1], args[2])

    def _a_show(self, args):
        host = self.net.host(args[0])
        what = args[1]
        if what == "route":
            text = host.routes.render()
        elif what == "arp":
            text = host.arp.render()
        elif what == "ifconfig":
            text = host.ifconfig_text()
        else:
            if self.net.kinds[args[0]] != "cisco":
                raise ValueError(f"{args[0]} has no IOS console")
            text = session_for(host).show(what)
        return self._text_check(text, args[2], args[3])

    def _a_counter(self, args):
        n = self.net.host(args[0]).counters[args[1]]
        return self._compare(n, args[2], args[3]), n

    def _a_overhead(self, args):
        ledger = stats.overhead(self._frames(args[0]), args[1])
        return self._compare(ledger[args[2]], args[3], args[4]), ledger[args[2]]

    def _a_loopfree(self, args):
        for label, tap in sorted(self.net.taps.items()):
            bad = stats.loop_violations(stats.load(tap.capture))
            if bad:
                return False, f"{label}: {bad[0]}"
        return True, f"{len(self.net.taps)} taps clean"

    def _a_tcp(self, args):
        port = None
        if len(args) == 6:
            port = int(args[2])
            args = [args[0]] + args[3:]
        phases = stats.tcp_phases(self._frames(args[0]), port)
        n = phases[args[1]]
        return self._compare(n, args[2], args[3]), n

    def _a_arp(self, args):
        mac = self.net.host(args[0]).arp.lookup(ip(args[1]))
        want = None if args[3] == "none" else MacAddr.parse(args[3])
        ok = (mac == want) if args[2] == "==" else (mac != want)
        return ok, mac if mac is not None else "none"

    def _a_lookup(self, args):
        host = self.net.host(args[0])
        try:
            entry = host.routes.lookup(ip(args[1]))
            got = str(entry.gateway) if entry.gateway is not None else "direct"
        except NetworkUnreachable:
            got = "unreachable"
        ok = (got == args[3]) if args[2] == "==" else (got != args[3])
        return ok, got

    def _a_failures(self, args):
        n = len(self.console.failures)
        return self._compare(n, args[0], args[1]), n

    def _a_pings(self, args):
        lines = []
        for o in self.console.outcomes:
            if o.verb != "ping":
                continue
            if o.result is None:
                lines.append(f"{o.node} -> {o.target}: unfinished")
                continue
            r = o.result
            lines.append(f"{o.node} -> {o.target}: {r.received}/{r.sent} {'ok' if r.success else 'FAIL'}")
        return self._text_check("".join(f"{x}\n" for x in lines), "golden", args[1])


def write_outputs(result: RunResult, out_dir: Path | str) -> Path:
    out = Path(out_dir)
    (out / "captures").mkdir(parents=True, exist_ok=True)
    (out / "transcripts").mkdir(parents=True, exist_ok=True)
    for label, tap in sorted(result.net.taps.items()):
        (out / "captures" / f"{label.replace('.', '_')}.pcap").write_bytes(tap.capture.to_bytes())
    for host in result.net.hosts():
        text = "".join(f"[{t / SECOND:12.6f}] {line}\n" for t, line in host.console)
        (out / "transcripts" / f"{host.name}.txt").write_text(text, encoding="utf-8")
    lines = [r.line() for r in result.results]
    if result.halted is not None:
        lines.append(f"HALTED {result.halted}")
    passed = sum(r.passed for r in result.results)
    lines.append(f"{passed}/{len(result.results)} assertions passed")
    (out / "assertions.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out


def run_scenario(sc: Scenario, out_dir: Path | str | None = None, *, seed: int | None = None,
                 halt_on_error: bool | None = None, update_goldens: bool = False) -> RunResult:
    result = Runner(sc, seed, halt_on_error, update_goldens).run()
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result
