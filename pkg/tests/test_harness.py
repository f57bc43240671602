from __future__ import annotations

import json

import pytest

from tordir import harness
from tordir.cli import main
from tordir.harness import CostModel, attack_cost, min_bandwidth


def test_cost_for_five_minute_five_target_flood():
    c = attack_cost(240, 5, 5)
    assert round(c.per_instance, 3) == 0.074
    assert round(c.per_month, 2) == 53.28


def test_default_flood_is_link_minus_required():
    assert CostModel().default_flood_mbps == 240
    assert attack_cost() == attack_cost(240, 5, 5)


def test_no_targets_costs_nothing():
    assert attack_cost(1000, 0, 60).per_month == 0


def test_negative_inputs_rejected():
    with pytest.raises(ValueError, match="minutes"):
        attack_cost(240, 5, -1)
    with pytest.raises(ValueError):
        CostModel(instances_per_month=-1)


def test_min_bandwidth_is_on_the_grid_and_tight():
    res = min_bandwidth(2000, "legacy", scheme="mac")
    assert res.bound is None
    assert (res.mbps / 0.25).is_integer()
    assert harness.succeeds("legacy", 2000, res.mbps, scheme="mac")
    assert not harness.succeeds("legacy", 2000, res.mbps - 0.25, scheme="mac")


def test_min_bandwidth_reports_exhausted_bounds():
    assert min_bandwidth(100, "legacy", lo=1.0, hi=4.0, scheme="mac").bound == "below-min"
    res = min_bandwidth(4000, "legacy", lo=0.25, hi=0.25, scheme="mac")
    assert res.bound == "above-max" and str(res) == ">0.25"


def test_min_bandwidth_rejects_bad_arguments():
    with pytest.raises(ValueError):
        min_bandwidth(0)


def test_icps_survives_ddos_bandwidth_at_1000_relays():
    assert harness.succeeds("icps", 1000, 0.5, scheme="mac")


def test_legacy_fails_where_icps_succeeds():
    assert harness.succeeds("icps", 4000, 0.5, scheme="mac")
    assert not harness.succeeds("legacy", 4000, 0.5, scheme="mac")


def test_sweep_rows_in_grid_order():
    rows = harness.sweep([100, 200], [1.0, 2.0], protocol="legacy", scheme="mac")
    assert [(r.relays, r.bandwidth_mbps) for r in rows] == [(100, 1.0), (100, 2.0), (200, 1.0), (200, 2.0)]
    assert "relays" in harness.format_table(rows).splitlines()[0]


# -- CLI -------------------------------------------------------------------


def test_cli_cost(capsys):
    assert main(["cost", "--flood", "240", "--targets", "5", "--minutes", "5"]) == 0
    out = capsys.readouterr().out
    assert "0.074" in out and "53.28" in out


def test_cli_run_is_deterministic(tmp_path, capsys):
    scen = tmp_path / "happy.toml"
    scen.write_text('n = 4\nf = 1\nrelays = 5\nscheme = "mac"\ngst_s = 2.0\n')
    outputs = []
    for k in range(2):
        prefix = tmp_path / f"out{k}"
        assert main(["run", str(scen), "--seed", "1", "--out", str(prefix)]) == 0
        outputs.append(
            (
                (tmp_path / f"out{k}.trace.txt").read_bytes(),
                (tmp_path / f"out{k}.metrics.json").read_bytes(),
            )
        )
    assert outputs[0] == outputs[1]
    assert json.loads(outputs[0][1])["decided"] is True
    assert "decided=True" in capsys.readouterr().out


def test_cli_run_creates_output_directory(tmp_path):
    scen = tmp_path / "s.toml"
    scen.write_text('n = 4\nf = 1\nrelays = 2\nscheme = "mac"\n')
    assert main(["run", str(scen), "--out", str(tmp_path / "a" / "b" / "run")]) == 0
    assert (tmp_path / "a" / "b" / "run.metrics.json").exists()


def test_cli_rejects_bad_scenario_with_field_name(tmp_path, capsys):
    scen = tmp_path / "bad.toml"
    scen.write_text("n = 4\nf = 2\n")
    assert main(["run", str(scen)]) != 0
    assert "'f'" in capsys.readouterr().err


def test_cli_rejects_missing_file(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.toml")]) != 0
    assert "error" in capsys.readouterr().err


def test_cli_rejects_unknown_subcommand():
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code != 0


def test_cli_sweep_writes_records(tmp_path, capsys):
    out = tmp_path / "rows.jsonl"
    assert main(["sweep", "--relays", "100", "--bandwidths", "1,2", "--json", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 2 and json.loads(lines[0])["relays"] == 100
    assert "mbps" in capsys.readouterr().out
