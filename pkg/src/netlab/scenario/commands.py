"""Linux-style console verbs shared by scenario files and the REPL.

Each verb has a pure parser that validates its arguments (so a scenario
fails to load on a malformed address) and an executor that acts on a live
network at the current virtual time.
"""

from __future__ import annotations

import re
import shlex
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

from .. import netapps
from ..fabric.sim import SECOND
from ..hoststack.host import Host
from ..network import Network, TopologyError
from ..rip import rip_enable
from ..routing import RouteError
from ..wire.addr import AddressError, MacAddr, SubnetMask, classful_mask, ip, parse_cidr
from .ios import IosError, session_for

_UNITS = {"ns": 1, "us": 1_000, "ms": 1_000_000, "s": SECOND, "m": 60 * SECOND}


class CommandError(ValueError):
    """Bad arguments; ``index`` is the offending token position when known."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


def parse_time(text: str) -> int:
    """``1.5s``, ``200ms``, ``100us``, ``2m``; a bare number means seconds."""
    m = re.fullmatch(r"(\d+(?:\.\d*)?|\.\d+)(ns|us|ms|s|m)?", text.strip())
    if not m:
        raise CommandError(f"bad time {text!r}")
    value, unit = m.group(1), m.group(2) or "s"
    return int(Fraction(value) * _UNITS[unit])


def parse_rate(text: str) -> int:
    """Bits per second with optional k/M/G suffix (decimal)."""
    m = re.fullmatch(r"(\d+(?:\.\d*)?)([kKmMgG]?)(?:bps)?", text.strip())
    if not m:
        raise CommandError(f"bad rate {text!r}")
    mult = {"": 1, "k": 10**3, "m": 10**6, "g": 10**9}[m.group(2).lower()]
    return int(float(m.group(1)) * mult)


def parse_size(text: str) -> int:
    """Byte count with optional K/M suffix (binary, as iperf uses)."""
    m = re.fullmatch(r"(\d+)([kKmM]?)", text.strip())
    if not m:
        raise CommandError(f"bad size {text!r}")
    return int(m.group(1)) * {"": 1, "k": 1024, "m": 1 << 20}[m.group(2).lower()]


def _int(text: str, what: str, lo: int = 0, hi: int = 1 << 31) -> int:
    try:
        value = int(text)
    except ValueError:
        raise CommandError(f"bad {what} {text!r}") from None
    if not lo <= value <= hi:
        raise CommandError(f"{what} {value} outside {lo}..{hi}")
    return value


def _addr(text: str):
    try:
        return ip(text)
    except AddressError:
        raise CommandError(f"malformed address {text!r}") from None


def _mask(text: str) -> SubnetMask:
    try:
        return SubnetMask.parse(text)
    except (AddressError, ValueError):
        raise CommandError(f"malformed netmask {text!r}") from None


def _mac(text: str) -> MacAddr:
    try:
        return MacAddr.parse(text)
    except (AddressError, ValueError):
        raise CommandError(f"malformed hardware address {text!r}") from None


@dataclass
class Invocation:
    verb: str
    args: dict[str, Any]
    text: str
    label: str | None = None
    script: list[str] = field(default_factory=list)


class _Args:
    """Cursor over argv that remembers where it is for error reporting."""

    def __init__(self, argv: list[str]):
        self.argv = argv
        self.i = 0

    def more(self) -> bool:
        return self.i < len(self.argv)

    def peek(self) -> str | None:
        return self.argv[self.i] if self.more() else None

    def take(self, what: str = "argument") -> str:
        if not self.more():
            raise CommandError(f"missing {what}", self.i)
        self.i += 1
        return self.argv[self.i - 1]

    def fail(self, message: str) -> CommandError:
        return CommandError(message, max(self.i - 1, 0))

    def guard(self, fn: Callable, *a):
        at = self.i
        try:
            return fn(*a)
        except CommandError as exc:
            raise CommandError(str(exc), at - 1 if at else 0) from None


# -- parsers -------------------------------------------------------------------------------

def _p_ifconfig(a: _Args) -> dict:
    out: dict[str, Any] = {"iface": None}
    if not a.more():
        return out
    out["iface"] = a.take()
    if a.more() and a.peek() not in ("netmask", "mtu", "hw", "up", "down"):
        tok = a.take()
        if "/" in tok:
            try:
                out["addr"], out["mask"] = parse_cidr(tok)
            except (AddressError, ValueError):
                raise a.fail(f"malformed address {tok!r}") from None
        else:
            out["addr"] = a.guard(_addr, tok)
    while a.more():
        key = a.take()
        if key == "netmask":
            out["mask"] = a.guard(_mask, a.take("netmask"))
        elif key == "mtu":
            out["mtu"] = a.guard(_int, a.take("mtu"), "mtu", 68, 65535)
        elif key == "hw":
            if a.take("hw class") != "ether":
                raise a.fail("only 'hw ether' is supported")
            out["mac"] = a.guard(_mac, a.take("hardware address"))
        elif key in ("up", "down"):
            out["up"] = key == "up"
        else:
            raise a.fail(f"unknown ifconfig option {key!r}")
    return out


def _p_route(a: _Args) -> dict:
    if not a.more() or a.peek() == "-n":
        return {"op": "show"}
    op = a.take()
    if op not in ("add", "del"):
        raise a.fail("usage: route [-n] | route add|del [-net|-host] DEST [netmask M] [gw G] [dev IF] [metric N]")
    out: dict[str, Any] = {"op": op, "dest": None, "mask": None, "gw": None, "dev": None, "metric": 0}
    kind = None
    if a.peek() in ("-net", "-host"):
        kind = a.take()
    dest = a.take("destination")
    if dest == "default":
        out["dest"], out["mask"] = _addr("0.0.0.0"), SubnetMask(0)
    elif "/" in dest:
        try:
            out["dest"], out["mask"] = parse_cidr(dest)
        except (AddressError, ValueError):
            raise a.fail(f"malformed address {dest!r}") from None
    else:
        out["dest"] = a.guard(_addr, dest)
        if kind == "-host":
            out["mask"] = SubnetMask(32)
    while a.more():
        key = a.take()
        if key == "netmask":
            out["mask"] = a.guard(_mask, a.take("netmask"))
        elif key == "gw":
            out["gw"] = a.guard(_addr, a.take("gateway"))
        elif key == "dev":
            out["dev"] = a.take("device")
        elif key == "metric":
            out["metric"] = a.guard(_int, a.take("metric"), "metric")
        else:
            raise a.fail(f"unknown route option {key!r}")
    if out["mask"] is None:
        out["mask"] = classful_mask(out["dest"]) if op == "add" else None
    return out


def _p_arp(a: _Args) -> dict:
    if not a.more() or a.peek() in ("-a", "-n", "-an"):
        return {"op": "show"}
    flag = a.take()
    if flag == "-s":
        out = {"op": "set", "addr": a.guard(_addr, a.take("address")), "mac": a.guard(_mac, a.take("mac")), "dev": None}
        if a.peek() == "-i":
            a.take()
            out["dev"] = a.take("interface")
        return out
    if flag == "-d":
        return {"op": "delete", "addr": a.guard(_addr, a.take("address"))}
    if flag in ("--flush", "--flush-all"):
        return {"op": "flush", "all": flag == "--flush-all"}
    raise a.fail("usage: arp [-a] | arp -s IP MAC [-i IF] | arp -d IP | arp --flush[-all]")


def _p_sysctl(a: _Args) -> dict:
    write = False
    if a.peek() == "-w":
        a.take()
        write = True
    setting = a.take("setting")
    key, eq, value = setting.partition("=")
    if key != "net.ipv4.ip_forward":
        raise a.fail(f"unsupported sysctl {key!r}")
    if write or eq:
        if value not in ("0", "1"):
            raise a.fail("net.ipv4.ip_forward takes 0 or 1")
        return {"value": value == "1"}
    return {"value": None}


def _p_ping(a: _Args) -> dict:
    out: dict[str, Any] = {"dst": a.guard(_addr, a.take("destination")), "count": 4, "size": 56,
                           "interval": SECOND, "timeout": SECOND, "ttl": 64, "df": False, "quiet": False}
    while a.more():
        key = a.take()
        if key in ("-c", "count"):
            out["count"] = a.guard(_int, a.take("count"), "count", 1, 100000)
        elif key == "-s":
            out["size"] = a.guard(_int, a.take("size"), "size", 0, 65507)
        elif key == "-i":
            out["interval"] = a.guard(parse_time, a.take("interval"))
        elif key == "-W":
            out["timeout"] = a.guard(parse_time, a.take("timeout"))
        elif key == "-t":
            out["ttl"] = a.guard(_int, a.take("ttl"), "ttl", 1, 255)
        elif key == "-M":
            mode = a.take("pmtu mode")
            if mode not in ("do", "dont", "want"):
                raise a.fail("-M takes do|dont|want")
            out["df"] = mode == "do"
        elif key == "-q":
            out["quiet"] = True
        else:
            raise a.fail(f"unknown ping option {key!r}")
    return out


def _p_traceroute(a: _Args) -> dict:
    out: dict[str, Any] = {"dst": a.guard(_addr, a.take("destination")), "max_ttl": 30, "probes": 3, "timeout": SECOND}
    while a.more():
        key = a.take()
        if key == "-m":
            out["max_ttl"] = a.guard(_int, a.take("max ttl"), "max ttl", 1, 255)
        elif key == "-q":
            out["probes"] = a.guard(_int, a.take("probes"), "probes", 1, 10)
        elif key == "-w":
            out["timeout"] = a.guard(parse_time, a.take("wait"))
        else:
            raise a.fail(f"unknown traceroute option {key!r}")
    return out


def _p_mtu(a: _Args) -> dict:
    return {"dst": a.guard(_addr, a.take("destination"))}


def _p_iperf(a: _Args) -> dict:
    out: dict[str, Any] = {"server": False, "dst": None, "udp": False, "port": 5001, "n_bytes": None,
                           "duration": 10 * SECOND, "rate": 1_000_000, "mss": False}
    while a.more():
        key = a.take()
        if key == "-s":
            out["server"] = True
        elif key == "-c":
            out["dst"] = a.guard(_addr, a.take("server address"))
        elif key == "-u":
            out["udp"] = True
        elif key == "-p":
            out["port"] = a.guard(_int, a.take("port"), "port", 1, 65535)
        elif key == "-n":
            out["n_bytes"] = a.guard(parse_size, a.take("byte count"))
        elif key == "-t":
            out["duration"] = a.guard(parse_time, a.take("duration"))
        elif key == "-b":
            out["rate"] = a.guard(parse_rate, a.take("bandwidth"))
        elif key == "-m":
            out["mss"] = True
        else:
            raise a.fail(f"unknown iperf option {key!r}")
    if out["server"] == (out["dst"] is not None):
        raise CommandError("iperf needs exactly one of -s or -c HOST", 0)
    return out


def _p_dhclient(a: _Args) -> dict:
    return {"iface": a.take("interface")}


def _p_echo_server(a: _Args) -> dict:
    out: dict[str, Any] = {"udp": False, "continuous": False, "port": netapps.echo.DEFAULT_PORT}
    while a.more():
        key = a.take()
        if key == "--udp":
            out["udp"] = True
        elif key == "--continuous":
            out["continuous"] = True
        elif key == "-p":
            out["port"] = a.guard(_int, a.take("port"), "port", 1, 65535)
        else:
            raise a.fail(f"unknown echo-server option {key!r}")
    return out


def _p_echo_client(a: _Args) -> dict:
    out = {"dst": a.guard(_addr, a.take("server address")), "lines": [], "udp": False,
           "continuous": False, "port": netapps.echo.DEFAULT_PORT}
    while a.more():
        key = a.take()
        if key == "--udp":
            out["udp"] = True
        elif key == "--continuous":
            out["continuous"] = True
        elif key == "-p":
            out["port"] = a.guard(_int, a.take("port"), "port", 1, 65535)
        elif key == "--send":
            out["lines"].append(a.take("line"))
        else:
            raise a.fail(f"unknown echo-client option {key!r}")
    return out


def _p_ios(a: _Args) -> dict:
    return {"line": " ".join(a.argv[a.i:])} if a.more() else {"line": None}


def _p_rip(a: _Args) -> dict:
    if a.take("subcommand") != "network":
        raise a.fail("usage: rip network NET [NET ...]")
    nets = []
    while a.more():
        nets.append(a.guard(_addr, a.take()))
    if not nets:
        raise a.fail("rip network needs at least one network")
    return {"networks": nets}


def _p_none(a: _Args) -> dict:
    if a.more():
        raise CommandError(f"unexpected argument {a.peek()!r}", a.i)
    return {}


PARSERS: dict[str, Callable[[_Args], dict]] = {
    "ifconfig": _p_ifconfig, "route": _p_route, "arp": _p_arp, "sysctl": _p_sysctl,
    "ping": _p_ping, "traceroute": _p_traceroute, "mtu-discover": _p_mtu, "iperf": _p_iperf,
    "dhclient": _p_dhclient, "echo-server": _p_echo_server, "echo-client": _p_echo_client,
    "ios": _p_ios, "rip": _p_rip, "counters": _p_none,
}
VERBS = tuple(PARSERS)
LINK_VERBS = ("down", "up")


def parse_command(argv: list[str]) -> Invocation:
    """Validate ``argv`` (verb first); a trailing ``as NAME`` labels the result."""
    if not argv:
        raise CommandError("empty command", 0)
    label = None
    if len(argv) >= 3 and argv[-2] == "as":
        label = argv[-1]
        argv = argv[:-2]
    verb = argv[0]
    if verb not in PARSERS:
        raise CommandError(f"unknown verb {verb!r}; expected one of: {', '.join(VERBS)}", 0)
    a = _Args(argv[1:])
    try:
        args = PARSERS[verb](a)
    except CommandError as exc:
        raise CommandError(str(exc), None if exc.index is None else exc.index + 1) from None
    return Invocation(verb, args, shlex.join(argv), label)


def parse_link_command(argv: list[str]) -> Invocation:
    if len(argv) != 2 or argv[1] not in LINK_VERBS:
        raise CommandError("usage: link NODE.IF down|up", 0)
    return Invocation("link", {"endpoint": argv[0], "up": argv[1] == "up"}, "link " + " ".join(argv))


# -- execution --------------------------------------------------------------------------------

@dataclass
class Outcome:
    node: str
    verb: str
    target: str | None
    label: str | None
    started: int
    result: Any = None
    finished: int | None = None
    error: str | None = None


class Console:
    """Executes invocations against a network and keeps every app's outcome."""

    def __init__(self, net: Network):
        self.net = net
        self.outcomes: list[Outcome] = []
        self.failures: list[tuple[int, str, str]] = []

    def find(self, ref: str, verb: str | None = None) -> Outcome | None:
        """Look up an outcome by label, or by ``NODE->DST`` (latest wins)."""
        for o in reversed(self.outcomes):
            if verb is not None and o.verb != verb:
                continue
            if o.label == ref or (o.label is None and f"{o.node}->{o.target}" == ref) \
                    or (o.label is None and o.target is None and o.node == ref):
                return o
        return None

    def execute(self, node: str, inv: Invocation) -> None:
        """Run ``inv`` now; failures go to the node's transcript and ``failures``."""
        if inv.verb == "link":
            self._link(inv)
            return
        host = self.net.host(node)
        if inv.verb != "ios":
            host.print(f"{node}$ {inv.text}")
        try:
            getattr(self, "_x_" + inv.verb.replace("-", "_"))(host, inv)
        except (CommandError, IosError, RouteError, AddressError, TopologyError, ValueError, OSError) as exc:
            host.print(f"{inv.verb}: {exc}")
            self.failures.append((self.net.sim.now, node, f"{inv.text}: {exc}"))

    def _link(self, inv: Invocation) -> None:
        try:
            link = self.net.link(inv.args["endpoint"])
        except TopologyError as exc:
            self.failures.append((self.net.sim.now, "link", str(exc)))
            return
        link.up = inv.args["up"]

    def _spawn(self, host: Host, inv: Invocation, target, coro) -> Outcome:
        out = Outcome(host.name, inv.verb, None if target is None else str(target), inv.label, self.net.sim.now)
        self.outcomes.append(out)

        async def wrapper():
            try:
                out.result = await coro
            except (OSError, ValueError, RouteError) as exc:
                out.error = str(exc)
                host.print(f"{inv.verb}: {exc}")
                self.failures.append((self.net.sim.now, host.name, f"{inv.text}: {exc}"))
            out.finished = self.net.sim.now

        self.net.sim.spawn(wrapper(), f"{inv.verb}:{host.name}")
        return out

    # linux verbs

    def _x_ifconfig(self, host: Host, inv: Invocation) -> None:
        a = inv.args
        name = a["iface"]
        if name is None:
            host.print(host.ifconfig_text())
            return
        host.iface(name)
        only_show = len(a) == 1
        if "mac" in a:
            host.ifconfig_set_mac(name, a["mac"])
        if "mtu" in a:
            host.set_mtu(name, a["mtu"])
        if "addr" in a:
            host.ifconfig_set(name, a["addr"], a.get("mask"))
        elif "mask" in a:
            iface = host.iface(name)
            if iface.ip is None:
                raise CommandError(f"{name} has no address to apply a netmask to")
            host.ifconfig_set(name, iface.ip, a["mask"])
        if "up" in a:
            host.set_up(name, a["up"])
        if only_show:
            host.print(host.ifconfig_text(name))

    def _x_route(self, host: Host, inv: Invocation) -> None:
        a = inv.args
        if a["op"] == "show":
            host.print("Kernel IP routing table")
            host.print(host.routes.render())
        elif a["op"] == "add":
            if a["mask"].prefixlen == 0 and a["gw"] is not None and a["dev"] is None:
                host.set_default_gateway(a["gw"])
                if not any(e.is_default for e in host.routes):
                    # typed by hand, an off-link gateway is an error rather than a pending setting
                    host.default_gateway = None
                    raise RouteError(f"SIOCADDRT: gateway {a['gw']} is not reachable on any up interface")
            else:
                host.route_add(a["dest"], a["mask"], a["gw"], a["dev"], metric=a["metric"])
        else:
            if a["mask"] is not None and a["mask"].prefixlen == 0:
                host.default_gateway = None
            host.route_del(a["dest"], a["mask"], a["gw"], a["dev"])

    def _x_arp(self, host: Host, inv: Invocation) -> None:
        a = inv.args
        if a["op"] == "show":
            host.print(host.arp.render())
        elif a["op"] == "set":
            host.arp.add_static(a["addr"], a["mac"], a["dev"])
        elif a["op"] == "delete":
            host.arp.delete(a["addr"])
        else:
            host.arp.flush(include_permanent=a["all"])

    def _x_sysctl(self, host: Host, inv: Invocation) -> None:
        value = inv.args["value"]
        if value is not None:
            host.forwarding = value
        host.print(f"net.ipv4.ip_forward = {int(host.forwarding)}")

    def _x_counters(self, host: Host, inv: Invocation) -> None:
        for key in sorted(host.counters):
            host.print(f"{key}: {host.counters[key]}")

    def _x_ping(self, host: Host, inv: Invocation) -> None:
        a = dict(inv.args)
        dst = a.pop("dst")
        self._spawn(host, inv, dst, netapps.ping(host, dst, **a))

    def _x_traceroute(self, host: Host, inv: Invocation) -> None:
        a = dict(inv.args)
        dst = a.pop("dst")
        self._spawn(host, inv, dst, netapps.traceroute(host, dst, **a))

    def _x_mtu_discover(self, host: Host, inv: Invocation) -> None:
        self._spawn(host, inv, inv.args["dst"], netapps.mtu_discover(host, inv.args["dst"]))

    def _x_iperf(self, host: Host, inv: Invocation) -> None:
        a = inv.args
        if a["server"]:
            server = netapps.IperfServer(host, udp=a["udp"], port=a["port"])
            host.services[f"iperf:{a['port']}"] = server
            self.outcomes.append(Outcome(host.name, "iperf", None, inv.label, self.net.sim.now, server))
            return
        if a["udp"]:
            coro = netapps.iperf_udp_client(host, a["dst"], port=a["port"], duration=a["duration"],
                                            rate=a["rate"], n_bytes=a["n_bytes"])
        else:
            coro = netapps.iperf_tcp_client(host, a["dst"], port=a["port"], duration=a["duration"],
                                            n_bytes=a["n_bytes"], report_mss=a["mss"])
        self._spawn(host, inv, a["dst"], coro)

    def _x_dhclient(self, host: Host, inv: Invocation) -> None:
        name = inv.args["iface"]
        host.iface(name)
        self._spawn(host, inv, name, netapps.dhcp_client(host, name))

    def _x_echo_server(self, host: Host, inv: Invocation) -> None:
        a = inv.args
        mode = netapps.EchoMode.CONTINUOUS if a["continuous"] else netapps.EchoMode.ONESHOT
        server = netapps.EchoServer(host, port=a["port"], mode=mode, udp=a["udp"])
        self.outcomes.append(Outcome(host.name, "echo-server", None, inv.label, self.net.sim.now, server))

    def _x_echo_client(self, host: Host, inv: Invocation) -> None:
        a = inv.args
        mode = netapps.EchoMode.CONTINUOUS if a["continuous"] else netapps.EchoMode.ONESHOT
        coro = netapps.echo_client(host, a["dst"], port=a["port"], mode=mode, udp=a["udp"], lines=a["lines"])
        self._spawn(host, inv, a["dst"], coro)

    def _x_rip(self, host: Host, inv: Invocation) -> None:
        rip_enable(host, inv.args["networks"])

    def _x_ios(self, host: Host, inv: Invocation) -> None:
        sess = session_for(host)
        lines = inv.script if inv.args["line"] is None else [inv.args["line"]]
        for line in lines:
            host.print(f"{sess.prompt} {line.strip()}")
            try:
                output = sess.execute(line)
            except (IosError, AddressError, RouteError, ValueError) as exc:
                msg = str(exc) if str(exc).startswith("%") else f"% {exc}"
                host.print(msg)
                self.failures.append((self.net.sim.now, host.name, f"{line.strip()}: {msg}"))
                continue
            if output:
                host.print(output)

