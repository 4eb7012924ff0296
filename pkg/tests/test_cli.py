from __future__ import annotations

import filecmp
from pathlib import Path


from netlab.scenario.cli import main
from netlab.scenario.dsl import parse_scenario
from netlab.scenario.runner import run_scenario

GOOD = """\
host PC1 PC2
link PC1.eth0 PC2.eth0
at 0s PC1 ifconfig eth0 10.0.1.1/24
at 0s PC2 ifconfig eth0 10.0.1.2/24
at 1s PC1 ping 10.0.1.2 -c 4 as p
end 8s
assert ping p received == 4
assert count PC1.eth0 "icmp" == 8
"""


def write(tmp_path: Path, name: str, text: str) -> Path:
    path = tmp_path / name
    path.write_text(text)
    return path


def tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_run_writes_outputs_and_exits_zero(tmp_path, capsys):
    src = write(tmp_path, "good.nls", GOOD)
    assert main(["run", str(src), "--out", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 2
    files = tree(tmp_path / "o")
    assert set(files) == {"assertions.txt", "captures/PC1_eth0.pcap", "captures/PC2_eth0.pcap",
                          "transcripts/PC1.txt", "transcripts/PC2.txt"}
    assert files["assertions.txt"].endswith(b"2/2 assertions passed\n")


def test_same_seed_same_bytes_other_seed_differs(tmp_path):
    src = write(tmp_path, "good.nls", GOOD.replace("-c 4", "-c 4 -s 1000"))
    for d in ("a", "b"):
        main(["run", str(src), "--out", str(tmp_path / d), "--seed", "7"])
    main(["run", str(src), "--out", str(tmp_path / "c"), "--seed", "8"])
    assert tree(tmp_path / "a") == tree(tmp_path / "b")
    cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "c")
    assert not cmp.left_only and not cmp.right_only


def test_assertion_failure_exits_one(tmp_path, capsys):
    src = write(tmp_path, "bad.nls", GOOD.replace('"icmp" == 8', '"icmp" == 9'))
    assert main(["run", str(src), "--out", str(tmp_path / "o")]) == 1
    assert "FAIL line 8" in capsys.readouterr().out


def test_parse_error_exits_two(tmp_path, capsys):
    src = write(tmp_path, "broken.nls", GOOD.replace("PC2 ifconfig", "PC9 ifconfig"))
    assert main(["run", str(src)]) == 2
    assert "broken.nls:4:7: undeclared node PC9" in capsys.readouterr().err


def test_runtime_failures_continue_unless_halting(tmp_path, capsys):
    text = GOOD.replace("at 1s PC1 ping", "at 500ms PC1 route add default gw 10.9.9.9\nat 1s PC1 ping")
    src = write(tmp_path, "rt.nls", text)
    assert main(["run", str(src), "--out", str(tmp_path / "o")]) == 0
    transcript = (tmp_path / "o" / "transcripts" / "PC1.txt").read_text()
    assert "route add default gw 10.9.9.9" in transcript
    assert main(["run", str(src), "--out", str(tmp_path / "h"), "--halt-on-error"]) == 2
    assert "halted: line 5" in capsys.readouterr().err


def test_stats_command(tmp_path, capsys):
    src = write(tmp_path, "good.nls", GOOD)
    main(["run", str(src), "--out", str(tmp_path / "o")])
    pcap = str(tmp_path / "o" / "captures" / "PC1_eth0.pcap")
    capsys.readouterr()
    assert main(["stats", pcap, "--filter", "icmp.type == 8"]) == 0
    assert capsys.readouterr().out == "4 frames match 'icmp.type == 8'\n"
    csv = tmp_path / "io.csv"
    assert main(["stats", pcap, "--filter", "icmp", "--interval", "2s", "--csv", str(csv)]) == 0
    rows = csv.read_text().splitlines()
    assert rows[0] == "start_s,packets,bytes" and sum(int(r.split(",")[1]) for r in rows[1:]) == 8
    assert main(["stats", pcap, "--overhead"]) == 0
    assert "discrepancy          0" in capsys.readouterr().out
    assert main(["stats", pcap, "--filter", "icmp and"]) == 2
    assert "column 9" in capsys.readouterr().err
    assert main(["stats", str(tmp_path / "missing.pcap")]) == 2


def test_empty_capture_counts_zero(tmp_path, capsys):
    src = write(tmp_path, "quiet.nls", "host PC1 PC2\nlink PC1.eth0 PC2.eth0\nend 1s\n")
    main(["run", str(src), "--out", str(tmp_path / "o")])
    capsys.readouterr()
    main(["stats", str(tmp_path / "o" / "captures" / "PC1_eth0.pcap"), "--filter", "arp or tcp"])
    assert capsys.readouterr().out.startswith("0 frames")


def test_check_directory(tmp_path, capsys):
    d = tmp_path / "suite"
    d.mkdir()
    write(d, "a.nls", GOOD)
    write(d, "b.nls", GOOD.replace('"icmp" == 8', '"icmp" == 9'))
    assert main(["check", str(d), "--out", str(tmp_path / "o")]) == 1
    assert capsys.readouterr().out == "ok    a.nls\nFAIL  b.nls\n"
    assert main(["check", str(tmp_path / "o")]) == 2


def test_golden_update_round_trip(tmp_path):
    text = GOOD + "assert transcript PC1 golden golden/pc1.txt\n"
    src = write(tmp_path, "g.nls", text)
    assert main(["run", str(src), "--out", str(tmp_path / "o")]) == 1
    assert main(["run", str(src), "--out", str(tmp_path / "o"), "--update-goldens"]) == 0
    assert (tmp_path / "golden" / "pc1.txt").exists()
    assert main(["run", str(src), "--out", str(tmp_path / "o")]) == 0


def test_run_result_api():
    result = run_scenario(parse_scenario(GOOD))
    assert result.passed and result.exit_code == 0
