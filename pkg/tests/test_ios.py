from __future__ import annotations

from importlib import resources

import pytest

from netlab.network import Network
from netlab.scenario.dsl import load_scenario, parse_scenario
from netlab.scenario.ios import IosError, IosSession
from netlab.scenario.runner import run_scenario

CISCO = resources.files("netlab") / "exercises" / "rip_dhcp_cisco.nls"


def router():
    net = Network()
    r = net.add_host("R1", "cisco")
    pc = net.add_host("PC")
    pc.add_interface("eth0")
    net.connect("R1.Vlan1", "PC.eth0")
    net.port("R1.FastEthernet8")
    return net, r, IosSession(r)


def test_prompts_follow_modes():
    _, _, s = router()
    seen = []
    for line in ["enable", "configure terminal", "interface vlan1", "exit", "router rip", "end"]:
        s.execute(line)
        seen.append(s.prompt)
    assert seen == ["R1#", "R1(config)#", "R1(config-if)#", "R1(config)#", "R1(config-router)#", "R1#"]


@pytest.mark.parametrize("setup, line, needed", [
    ([], "ip address 10.0.0.1 255.255.255.0", "interface configuration mode"),
    (["configure terminal"], "ip address 10.0.0.1 255.255.255.0", "interface configuration mode"),
    (["configure terminal"], "default-router 10.0.0.1", "DHCP pool configuration mode"),
    (["configure terminal", "interface Vlan1"], "version 2", "router configuration mode"),
    (["configure terminal", "ip dhcp pool p", "exit"], "default-router 10.0.0.1",
     "DHCP pool configuration mode"),
    (["configure terminal", "interface Vlan1"], "hostname X", "global configuration mode"),
])
def test_subcommand_outside_its_mode_names_the_mode(setup, line, needed):
    _, r, s = router()
    for cmd in setup:
        s.execute(cmd)
    before = (s.mode, r.interfaces["Vlan1"].ip)
    with pytest.raises(IosError) as info:
        s.execute(line)
    assert needed in str(info.value) and "valid only in" in str(info.value)
    assert (s.mode, r.interfaces["Vlan1"].ip) == before


def test_configuration_maps_onto_the_host():
    net, r, s = router()
    out = s.run_script([
        "enable", "conf t", "interface Vlan1", " ip address 10.9.1.1 255.255.255.0", " no shutdown",
        " exit", "int fa8", " ip address 10.9.2.1 255.255.255.0", " no shutdown", " exit",
        "ip route 10.77.0.0 255.255.0.0 10.9.2.2",
        "ip dhcp excluded-address 10.9.1.1 10.9.1.9",
        "ip dhcp pool lan", " network 10.9.1.0 255.255.255.0", " default-router 10.9.1.1", " lease 0 2",
        " exit", "router rip", " version 2", " network 10.0.0.0", " end", "show ip interface brief",
    ])
    assert all(not o.startswith("%") for _, o in out), out
    assert r.interfaces["Vlan1"].up and str(r.interfaces["Vlan1"].ip) == "10.9.1.1"
    assert str(r.routes.lookup("10.77.3.3").gateway) == "10.9.2.2"
    pool = r.services["dhcp"].pools["lan"]
    assert str(pool.network) == "10.9.1.0" and pool.lease_time == 7200
    assert [i.name for i in r.services["rip"].interfaces()] == ["Vlan1", "FastEthernet8"]
    brief = out[-1][1].splitlines()
    assert brief[0].split()[:2] == ["Interface", "IP-Address"]
    up = [l for l in brief[1:] if l.split()[-2:] == ["up", "up"]]
    assert [l.split()[0] for l in up] == ["Vlan1"]  # the trunk has no cable in this bench
    conf = s.show("running-config")
    for needle in ("ip dhcp excluded-address 10.9.1.1 10.9.1.9", "   lease 0 2 0",
                   "ip route 10.77.0.0 255.255.0.0 10.9.2.2", " network 10.0.0.0", "hostname R1"):
        assert needle in conf
    s.execute("conf t")
    assert s.execute("no ip route 10.77.0.0 255.255.0.0 10.9.2.2") == ""
    assert "10.77.0.0" not in r.routes.render()


def test_errors_are_reported_not_raised_by_scripts():
    _, _, s = router()
    out = dict(s.run_script(["configure terminal", "frobnicate", "interface Gig9", "show bogus"]))
    assert out["frobnicate"].startswith("% Invalid input detected")
    assert out["interface Gig9"] == "% Invalid interface Gig9"
    assert out["show bogus"].startswith("% Invalid show command")


@pytest.fixture(scope="module")
def cisco_run():
    return run_scenario(load_scenario(str(CISCO)))


def test_cisco_exercise_two_up_interfaces(cisco_run):
    from netlab.scenario.ios import session_for

    for name in ("routerA", "routerB"):
        brief = session_for(cisco_run.net.host(name)).show("ip interface brief").splitlines()[1:]
        assert len([l for l in brief if l.split()[-2:] == ["up", "up"]]) == 2
    assert cisco_run.passed, [r.line() for r in cisco_run.results if not r.passed]


RAW = """
host PC1 PC2
cisco routerA routerB
link PC1.eth0 routerA.Vlan1
link routerA.FastEthernet8 routerB.FastEthernet8
link routerB.Vlan1 PC2.eth0
at 0s routerA ifconfig Vlan1 128.235.1.1/24 up
at 0s routerA ifconfig FastEthernet8 128.235.3.1/24 up
at 0s routerA rip network 128.235.1.0 128.235.2.0 128.235.3.0
at 0s routerB ifconfig Vlan1 128.235.2.1/24 up
at 0s routerB ifconfig FastEthernet8 128.235.3.2/24 up
at 0s routerB rip network 128.235.1.0 128.235.2.0 128.235.3.0
end 85s
"""


def test_ios_and_raw_commands_build_the_same_tables(cisco_run):
    raw = run_scenario(parse_scenario(RAW))
    for name in ("routerA", "routerB"):
        assert raw.net.host(name).routes.render() == cisco_run.net.host(name).routes.render()
