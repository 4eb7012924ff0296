"""Interactive console over a live simulation (``netlab repl``)."""

from __future__ import annotations

import cmd
from pathlib import Path

from ..fabric.sim import SECOND
from ..network import Network
from .commands import VERBS, CommandError, Console, parse_command, parse_link_command, parse_time
from .dsl import DECL_KINDS, Scenario, ScenarioError, _Parser, load_scenario, tokenize
from .runner import RunResult, build_network, write_outputs

HELP = """\
Verbs run on the current node (set with `node NAME`) or on `NAME verb ...`:
  {verbs}
Declarations: host|router|cisco|switch NAME..., link A.IF B.IF [k=v], capture LABEL|all
Clock: run DURATION (events strictly before now+DURATION), step, time
Other: node NAME, nodes, link NODE.IF down|up, save-captures [DIR], quit"""


class Repl(cmd.Cmd):
    intro = "netlab interactive console; `help` lists verbs."

    def __init__(self, scenario: Scenario | None = None, stdout=None, seed: int | None = None,
                 play: bool = False):
        """With ``play`` the scenario's timed commands are queued and replay as time advances."""
        super().__init__(stdout=stdout)
        self.scenario = scenario or Scenario(base_dir=Path.cwd())
        commands, self.scenario.commands = self.scenario.commands, []
        self.scenario.assertions = []
        self.net: Network = build_network(self.scenario, seed)
        self.console = Console(self.net)
        if play:
            for c in commands:
                self.net.sim.schedule(c.time, self.console.execute, c.node, c.inv)
        hosts = self.net.hosts()
        self.current: str | None = hosts[0].name if hosts else None
        self._shown: dict[str, int] = {}

    @property
    def prompt(self) -> str:
        return f"[{self.net.sim.now / SECOND:.6f}s] {self.current or '-'}> "

    def say(self, text: str) -> None:
        self.stdout.write(text.rstrip("\n") + "\n")

    def flush_console(self) -> None:
        """Print console lines produced since the last prompt."""
        for host in self.net.hosts():
            start = self._shown.get(host.name, 0)
            for _, line in host.console[start:]:
                self.say(f"{host.name}: {line}")
            self._shown[host.name] = len(host.console)

    def postcmd(self, stop, line):
        self.flush_console()
        return stop

    def emptyline(self):
        return False

    # -- clock -------------------------------------------------------------------------

    def advance(self, until: int) -> None:
        sim = self.net.sim
        while True:
            nxt = sim.next_time()
            if nxt is None or nxt >= until:
                break
            sim.step()
        sim.now = max(sim.now, until)

    def do_run(self, arg):
        """run DURATION: advance virtual time (e.g. run 2, run 500ms)."""
        try:
            self.advance(self.net.sim.now + parse_time(arg or "1s"))
        except CommandError as exc:
            self.say(f"run: {exc}")

    def do_step(self, arg):
        """step: execute the next pending event."""
        if not self.net.sim.step():
            self.say("no pending events")

    def do_time(self, arg):
        self.say(f"{self.net.sim.now / SECOND:.6f}s")

    # -- topology ----------------------------------------------------------------------

    def do_node(self, arg):
        """node NAME: choose the node that verbs run on."""
        if arg not in self.net.nodes or self.net.kinds.get(arg) == "switch":
            self.say(f"no such host or router: {arg}")
            return
        self.current = arg

    def do_nodes(self, arg):
        for name, kind in self.net.kinds.items():
            self.say(f"{name:<12}{kind}")

    def declare(self, line: str) -> None:
        parser = _Parser("", "<repl>", self.scenario.base_dir)
        parser.sc = self.scenario
        before_nodes = dict(self.scenario.nodes)
        before_links = len(self.scenario.links)
        before_caps = (list(self.scenario.captures), self.scenario.capture_all)
        parser.lineno = 1
        parser.statement(tokenize(line, 1, "<repl>"), [])
        for name, kind in self.scenario.nodes.items():
            if name not in before_nodes:
                self.net.add_switch(name) if kind == "switch" else self.net.add_host(name, kind)
                if self.current is None and kind != "switch":
                    self.current = name
        for link in self.scenario.links[before_links:]:
            self.net.connect(link.a, link.b, mtu=link.mtu, rate=link.rate, delay=link.delay, drop=link.drop)
        if (list(self.scenario.captures), self.scenario.capture_all) != before_caps:
            for label in self.scenario.tap_labels():
                self.net.capture(label)

    def do_link(self, arg):
        """link A.IF B.IF [k=v] declares a cable; link NODE.IF down|up toggles one."""
        words = arg.split()
        if len(words) == 2 and words[1] in ("down", "up"):
            try:
                inv = parse_link_command(words)
            except CommandError as exc:
                self.say(f"link: {exc}")
                return
            self.console.execute("link", inv)
            if self.console.failures and self.console.failures[-1][1] == "link":
                self.say(self.console.failures.pop()[2])
            return
        self.default("link " + arg)

    def do_save_captures(self, arg):
        """save-captures [DIR]: write pcaps and transcripts (default ./out)."""
        out = write_outputs(RunResult(self.scenario, self.net, self.console), arg or "out")
        self.say(f"wrote {len(self.net.taps)} captures under {out}")

    def do_quit(self, arg):
        return True

    do_exit = do_quit

    def do_EOF(self, arg):
        self.say("")
        return True

    def do_help(self, arg):
        self.say(HELP.format(verbs=", ".join(VERBS)))

    # -- verbs -------------------------------------------------------------------------

    def default(self, line: str):
        words = line.split()
        if not words:
            return
        if words[0] in DECL_KINDS or words[0] in ("link", "capture"):
            try:
                self.declare(line)
            except (ScenarioError, ValueError) as exc:
                self.say(f"error: {getattr(exc, 'message', exc)}")
            return
        if words[0] == "save-captures":
            return self.do_save_captures(" ".join(words[1:]))
        node = self.current
        if words[0] in self.net.nodes and words[0] not in VERBS:
            node, words = words[0], words[1:]
        if not words or words[0] not in VERBS:
            self.say(f"unknown command: {line.strip()}\n" + HELP.format(verbs=", ".join(VERBS)))
            return
        if node is None:
            self.say("declare a host first (e.g. `host PC1`)")
            return
        try:
            inv = parse_command(words)
        except CommandError as exc:
            self.say(f"{words[0]}: {exc}")
            return
        if inv.verb == "ios" and inv.args["line"] is None:
            self.say("usage: ios <IOS command line>")
            return
        self.console.execute(node, inv)


def start(path: str | None = None, seed: int | None = None) -> None:
    scenario = load_scenario(path) if path else None
    Repl(scenario, seed=seed, play=True).cmdloop()
