"""Cisco IOS-style configuration shell mapped onto a simulated router.

Only the subset the lab uses is understood. Every sub-command belongs to one
mode; typing it elsewhere produces an error that names the mode it needs.
"""

from __future__ import annotations

import re

from ..hoststack.host import Host
from ..netapps.dhcp import DhcpServer
from ..rip import RipProcess, SplitHorizon, rip_enable
from ..routing import Origin, RouteError
from ..wire.addr import AddressError, SubnetMask, ip
from ..fabric.sim import SECOND

EXEC, CONFIG, CONFIG_IF, DHCP_CONFIG, CONFIG_ROUTER = "exec", "config", "config-if", "dhcp-config", "config-router"
MODE_NAMES = {
    EXEC: "privileged EXEC mode",
    CONFIG: "global configuration mode (config)",
    CONFIG_IF: "interface configuration mode (config-if)",
    DHCP_CONFIG: "DHCP pool configuration mode (dhcp-config)",
    CONFIG_ROUTER: "router configuration mode (config-router)",
}
SHOW_VERBS = ("running-config", "ip interface brief", "ip protocols", "ip route", "ip dhcp binding", "arp")
_ABBREV = {"fa": "fastethernet", "gi": "gigabitethernet", "f": "fastethernet", "g": "gigabitethernet",
           "e": "ethernet", "vl": "vlan"}


class IosError(ValueError):
    pass


class IosSession:
    """One console attached to ``host``; keeps the current mode between lines."""

    def __init__(self, host: Host):
        self.host = host
        self.hostname = host.name
        self.mode = EXEC
        self.iface: str | None = None
        self.pool: str | None = None
        self.descriptions: dict[str, str] = {}

    @property
    def prompt(self) -> str:
        suffix = "" if self.mode == EXEC else f"({self.mode})"
        return f"{self.hostname}{suffix}#"

    # -- helpers -----------------------------------------------------------------------

    @property
    def dhcp(self) -> DhcpServer:
        server = self.host.services.get("dhcp")
        if server is None:
            server = self.host.services["dhcp"] = DhcpServer(self.host)
        return server

    @property
    def rip(self) -> RipProcess | None:
        return self.host.services.get("rip")

    def resolve_iface(self, text: str) -> str:
        if text in self.host.interfaces:
            return text
        m = re.fullmatch(r"([A-Za-z-]+)\s*([\d/.]+)", text)
        for name in self.host.interfaces:
            if name.lower() == text.lower():
                return name
            if m is None:
                continue
            n = re.fullmatch(r"([A-Za-z-]+)([\d/.]+)", name)
            if n and n.group(2) == m.group(2):
                want = m.group(1).lower()
                have = n.group(1).lower()
                if have.startswith(want) or _ABBREV.get(want) == have:
                    return name
        raise IosError(f"% Invalid interface {text}")

    def _need(self, *modes: str) -> None:
        if self.mode not in modes:
            raise IosError(f"% Invalid input in {MODE_NAMES[self.mode]}: command valid only in "
                           f"{MODE_NAMES[modes[0]]}")

    # -- entry point -------------------------------------------------------------------

    def execute(self, line: str) -> str:
        """Run one line and return its output text (possibly empty).

        Raises IosError for syntax or mode errors; the session state is left
        unchanged in that case.
        """
        words = line.split()
        if not words or words[0].startswith("!"):
            return ""
        if words[0] == "do" and self.mode != EXEC:
            words = words[1:]
            if not words or words[0] not in ("show", "sh"):
                raise IosError("% 'do' supports show commands only")
        head = words[0].lower()
        args = words[1:]
        if head in ("show", "sh"):
            return self.show(" ".join(args))
        handler = _DISPATCH.get(head)
        if head == "no" and args:
            return self._no(args)
        if handler is None:
            raise IosError(f"% Invalid input detected: {line.strip()}")
        return handler(self, args) or ""

    def run_script(self, lines: list[str]) -> list[tuple[str, str]]:
        """Execute lines in order; returns (line, output-or-error) pairs."""
        out = []
        for line in lines:
            try:
                out.append((line, self.execute(line)))
            except (IosError, AddressError, RouteError, ValueError) as exc:
                out.append((line, str(exc) if str(exc).startswith("%") else f"% {exc}"))
        return out

    # -- mode changes --------------------------------------------------------------------

    def _enable(self, args):
        self._need(EXEC)

    def _configure(self, args):
        self._need(EXEC)
        if args and not "terminal".startswith(args[0].lower()):
            raise IosError("% only 'configure terminal' is supported")
        self.mode = CONFIG

    def _exit(self, args):
        if self.mode in (CONFIG_IF, DHCP_CONFIG, CONFIG_ROUTER):
            self.mode, self.iface, self.pool = CONFIG, None, None
        elif self.mode == CONFIG:
            self.mode = EXEC

    def _end(self, args):
        self.mode, self.iface, self.pool = EXEC, None, None

    def _interface(self, args):
        self._need(CONFIG, CONFIG_IF, DHCP_CONFIG, CONFIG_ROUTER)
        if not args:
            raise IosError("% Incomplete command.")
        self.iface = self.resolve_iface("".join(args))
        self.pool = None
        self.mode = CONFIG_IF

    def _hostname(self, args):
        self._need(CONFIG)
        if len(args) != 1:
            raise IosError("% Incomplete command.")
        self.hostname = args[0]

    def _router(self, args):
        self._need(CONFIG, CONFIG_IF, DHCP_CONFIG, CONFIG_ROUTER)
        if not args or args[0].lower() != "rip":
            raise IosError("% only 'router rip' is supported")
        rip_enable(self.host)
        self.mode = CONFIG_ROUTER

    # -- ip ... --------------------------------------------------------------------------

    def _ip(self, args):
        if not args:
            raise IosError("% Incomplete command.")
        sub = args[0].lower()
        if sub == "address":
            self._need(CONFIG_IF)
            if len(args) != 3:
                raise IosError("% Incomplete command: ip address <ip> <mask>")
            self.host.ifconfig_set(self.iface, ip(args[1]), SubnetMask.parse(args[2]))
            self.host.iface(self.iface).method = "manual"
            return
        if sub == "dhcp" and len(args) >= 2 and args[1].lower() == "pool":
            self._need(CONFIG, CONFIG_IF, DHCP_CONFIG, CONFIG_ROUTER)
            if len(args) != 3:
                raise IosError("% Incomplete command: ip dhcp pool <name>")
            self.dhcp.pool(args[2])
            self.pool, self.iface = args[2], None
            self.mode = DHCP_CONFIG
            return
        if sub == "dhcp" and len(args) >= 2 and args[1].lower() == "excluded-address":
            # accepted at the pool prompt too; the lab's own transcript types it there
            self._need(CONFIG, DHCP_CONFIG)
            if len(args) not in (3, 4):
                raise IosError("% Incomplete command: ip dhcp excluded-address <low> [<high>]")
            self.dhcp.exclude(args[2], args[3] if len(args) == 4 else None)
            return
        if sub == "route":
            self._need(CONFIG)
            if len(args) != 4:
                raise IosError("% Incomplete command: ip route <network> <mask> <next-hop>")
            self.host.route_add(ip(args[1]), SubnetMask.parse(args[2]), ip(args[3]))
            return
        raise IosError(f"% Invalid input detected: ip {' '.join(args)}")

    def _shutdown(self, args):
        self._need(CONFIG_IF)
        self.host.set_up(self.iface, False)

    def _description(self, args):
        self._need(CONFIG_IF)
        self.descriptions[self.iface] = " ".join(args)

    # -- dhcp-config -------------------------------------------------------------------

    def _network(self, args):
        if self.mode == CONFIG_ROUTER:
            if len(args) != 1:
                raise IosError("% Incomplete command: network <network-number>")
            self.rip.add_network(ip(args[0]))
            return
        self._need(DHCP_CONFIG, CONFIG_ROUTER)
        if len(args) == 1 and "/" in args[0]:
            addr, _, plen = args[0].partition("/")
            args = [addr, plen]
        if len(args) != 2:
            raise IosError("% Incomplete command: network <network> <mask>")
        pool = self.dhcp.pool(self.pool)
        pool.mask = SubnetMask.parse(args[1])
        pool.network = ip(int(ip(args[0])) & pool.mask.value)

    def _default_router(self, args):
        self._need(DHCP_CONFIG)
        if len(args) != 1:
            raise IosError("% Incomplete command: default-router <address>")
        self.dhcp.pool(self.pool).default_router = ip(args[0])

    def _lease(self, args):
        self._need(DHCP_CONFIG)
        if not 1 <= len(args) <= 3 or not all(a.isdigit() for a in args):
            raise IosError("% lease <days> [<hours> [<minutes>]]")
        days, hours, minutes = (list(map(int, args)) + [0, 0])[:3]
        self.dhcp.pool(self.pool).lease_time = ((days * 24 + hours) * 60 + minutes) * 60

    # -- config-router -------------------------------------------------------------------

    def _version(self, args):
        self._need(CONFIG_ROUTER)
        if args != ["2"]:
            raise IosError("% only RIP version 2 is implemented")

    def _timers(self, args):
        self._need(CONFIG_ROUTER)
        if len(args) != 5 or args[0] != "basic" or not all(a.isdigit() for a in args[1:]):
            raise IosError("% timers basic <update> <invalid> <holddown> <flush>")
        update, invalid, _holddown, flush = map(int, args[1:])
        if flush <= invalid:
            raise IosError("% flush timer must exceed invalid timer")
        self.rip.update_interval = update * SECOND
        self.rip.route_timeout = invalid * SECOND
        self.rip.garbage_timeout = (flush - invalid) * SECOND

    def _split_horizon(self, args):
        self._need(CONFIG_ROUTER)
        try:
            self.rip.split_horizon = SplitHorizon(args[0].lower())
        except (IndexError, ValueError):
            raise IosError("% split-horizon plain|poisoned") from None

    def _auto_summary(self, args):
        self._need(CONFIG_ROUTER)

    # -- no ... --------------------------------------------------------------------------

    def _no(self, args):
        head = args[0].lower()
        if head == "shutdown":
            self._need(CONFIG_IF)
            self.host.set_up(self.iface, True)
        elif head == "ip" and args[1:2] == ["address"]:
            self._need(CONFIG_IF)
            self.host.ifconfig_clear(self.iface)
        elif head == "network":
            self._need(CONFIG_ROUTER)
            self.rip.remove_network(ip(args[1]))
        elif head == "auto-summary":
            self._need(CONFIG_ROUTER)
        elif head == "router" and args[1:2] == ["rip"]:
            self._need(CONFIG)
            proc = self.host.services.pop("rip", None)
            if proc is not None:
                proc.stop()
        elif head == "ip" and args[1:3] == ["dhcp", "pool"] and len(args) == 4:
            self._need(CONFIG)
            self.dhcp.pools.pop(args[3], None)
        elif head == "ip" and args[1:3] == ["dhcp", "excluded-address"] and len(args) in (4, 5):
            self._need(CONFIG, DHCP_CONFIG)
            lo = ip(args[3])
            hi = ip(args[4]) if len(args) == 5 else lo
            self.dhcp.excluded = [r for r in self.dhcp.excluded if r != (lo, hi)]
        elif head == "ip" and args[1:2] == ["route"] and len(args) == 5:
            self._need(CONFIG)
            self.host.route_del(ip(args[2]), SubnetMask.parse(args[3]), ip(args[4]))
        else:
            raise IosError(f"% Invalid input detected: no {' '.join(args)}")
        return ""

    def _noop(self, args):
        return ""

    # -- show ------------------------------------------------------------------------------

    def show(self, what: str) -> str:
        what = " ".join(what.lower().split())
        what = {"run": "running-config", "ip int brief": "ip interface brief",
                "ip int br": "ip interface brief"}.get(what, what)
        if what == "running-config":
            return self.running_config()
        if what == "ip interface brief":
            return self.interface_brief()
        if what == "ip protocols":
            return self.rip.show_protocols() if self.rip is not None else ""
        if what == "ip route":
            return self.ip_route()
        if what == "ip dhcp binding":
            return self.dhcp_binding()
        if what == "arp":
            return self.host.arp.render()
        raise IosError(f"% Invalid show command; expected one of: {', '.join(SHOW_VERBS)}")

    def running_config(self) -> str:
        out = ["Building configuration...", "", "Current configuration:", "!", f"hostname {self.hostname}", "!"]
        server: DhcpServer | None = self.host.services.get("dhcp")
        if server is not None:
            for lo, hi in server.excluded:
                out.append(f"ip dhcp excluded-address {lo}" + (f" {hi}" if hi != lo else ""))
            out.append("!")
            for pool in server.pools.values():
                out.append(f"ip dhcp pool {pool.name}")
                if pool.network is not None:
                    out.append(f"   network {pool.network} {pool.mask}")
                if pool.default_router is not None:
                    out.append(f"   default-router {pool.default_router}")
                if pool.lease_time != 3600:
                    secs = pool.lease_time
                    out.append(f"   lease {secs // 86400} {secs % 86400 // 3600} {secs % 3600 // 60}")
                out.append("!")
        for name, iface in self.host.interfaces.items():
            out.append(f"interface {name}")
            if name in self.descriptions:
                out.append(f" description {self.descriptions[name]}")
            out.append(f" ip address {iface.ip} {iface.mask}" if iface.ip is not None else " no ip address")
            if not iface.up:
                out.append(" shutdown")
            out.append("!")
        rip = self.rip
        if rip is not None:
            out.append("router rip")
            out.append(" version 2")
            out += [f" network {n}" for n in rip.networks]
            out.append("!")
        for e in self.host.routes:
            if e.origin is Origin.STATIC and e.gateway is not None:
                out.append(f"ip route {e.destination} {e.mask} {e.gateway}")
        out.append("end")
        return "\n".join(out) + "\n"

    def interface_brief(self) -> str:
        out = [f"{'Interface':<23}{'IP-Address':<16}{'OK?':<4}{'Method':<7}{'Status':<22}Protocol"]
        for name, iface in self.host.interfaces.items():
            addr = str(iface.ip) if iface.ip is not None else "unassigned"
            method = "manual" if iface.ip is not None else "unset"
            status = "up" if iface.up else "administratively down"
            proto = "up" if iface.up and iface.port.link is not None else "down"
            out.append(f"{name:<23}{addr:<16}{'YES':<4}{method:<7}{status:<22}{proto}")
        return "\n".join(out) + "\n"

    def ip_route(self) -> str:
        out = ["Codes: C - connected, S - static, R - RIP", ""]
        default = next((e for e in self.host.routes if e.is_default), None)
        out.append(f"Gateway of last resort is {default.gateway} to network 0.0.0.0" if default
                   else "Gateway of last resort is not set")
        out.append("")
        for e in sorted(self.host.routes, key=lambda e: (int(e.destination), e.mask.prefixlen, e.seq)):
            prefix = f"{e.destination}/{e.mask.prefixlen}"
            if e.origin is Origin.CONNECTED:
                out.append(f"C    {prefix} is directly connected, {e.iface}")
            elif e.origin is Origin.RIP:
                out.append(f"R    {prefix} [120/{e.metric}] via {e.gateway}, {e.iface}")
            else:
                code = "S*" if e.is_default else "S "
                via = f"via {e.gateway}" if e.gateway is not None else f"is directly connected, {e.iface}"
                out.append(f"{code}   {prefix} [1/0] {via}")
        return "\n".join(out) + "\n"

    def dhcp_binding(self) -> str:
        out = [f"{'IP address':<18}{'Hardware address':<20}Type"]
        server = self.host.services.get("dhcp")
        for addr, mac in server.active_leases() if server else []:
            out.append(f"{str(addr):<18}{str(mac):<20}Automatic")
        return "\n".join(out) + "\n"


_DISPATCH = {
    "enable": IosSession._enable,
    "configure": IosSession._configure,
    "conf": IosSession._configure,
    "exit": IosSession._exit,
    "end": IosSession._end,
    "interface": IosSession._interface,
    "int": IosSession._interface,
    "hostname": IosSession._hostname,
    "router": IosSession._router,
    "ip": IosSession._ip,
    "shutdown": IosSession._shutdown,
    "description": IosSession._description,
    "network": IosSession._network,
    "default-router": IosSession._default_router,
    "lease": IosSession._lease,
    "version": IosSession._version,
    "timers": IosSession._timers,
    "split-horizon": IosSession._split_horizon,
    "auto-summary": IosSession._auto_summary,
    "write": IosSession._noop,
    "copy": IosSession._noop,
}


def session_for(host: Host) -> IosSession:
    """The router keeps one console session so mode persists across heredocs."""
    sess = host.services.get("ios")
    if sess is None:
        sess = host.services["ios"] = IosSession(host)
    return sess
