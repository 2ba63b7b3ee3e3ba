import json

import pytest

from dacsim.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestBounds:
    def test_default_table(self, capsys):
        code, out, _ = run_cli(capsys, "bounds")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "nu,p0_lower_eth,p0_upper_eth,p0_lower_usd,p0_upper_usd"
        rows = {float(l.split(",")[0]): l.split(",") for l in lines[1:]}
        assert set(rows) == {0.1, 0.5, 0.8, 1.0}
        # risk-neutral row collapses
        assert rows[1.0][1] == rows[1.0][2]
        assert float(rows[0.1][2]) == pytest.approx(13257.7, rel=0.01)

    def test_saturation_at_certain_failure(self, capsys):
        code, out, _ = run_cli(capsys, "bounds", "--epsilon", "1.0", "--nu", "1.0")
        assert code == 0
        assert "saturates" in out
        row = out.strip().splitlines()[1].split(",")
        assert float(row[1]) == pytest.approx(100_000 * (32 - 0.0226), rel=1e-6)

    def test_single_nu_row(self, capsys):
        code, out, _ = run_cli(capsys, "bounds", "--nu", "1.0")
        assert code == 0
        assert len(out.strip().splitlines()) == 2


class TestSweep:
    def test_csv_contract(self, tmp_path, capsys):
        target = tmp_path / "sweep.csv"
        code, _, _ = run_cli(
            capsys, "sweep", "--count", "12", "--output", str(target)
        )
        assert code == 0
        lines = target.read_text().strip().splitlines()
        assert (
            lines[0]
            == "n_nodes,nu,epsilon_target,p0_lower_eth,p0_upper_eth,p0_lower_usd,p0_upper_usd"
        )
        rows = [l.split(",") for l in lines[1:]]
        keys = [(float(r[1]), int(r[0])) for r in rows]
        assert keys == sorted(keys)
        assert keys[0][1] == 1  # smallest committee present
        assert all(float(r[3]) > 0 and float(r[4]) > 0 for r in rows)

    def test_lower_bound_nonincreasing_in_nu(self, tmp_path, capsys):
        target = tmp_path / "sweep.csv"
        run_cli(capsys, "sweep", "--count", "6", "--output", str(target))
        rows = [l.split(",") for l in target.read_text().strip().splitlines()[1:]]
        by_n = {}
        for r in rows:
            by_n.setdefault(int(r[0]), []).append((float(r[1]), float(r[3])))
        for n, pairs in by_n.items():
            pairs.sort()
            lows = [p for _, p in pairs]
            assert all(a >= b - 1e-12 for a, b in zip(lows, lows[1:]))

    def test_risk_neutral_point_value(self, tmp_path, capsys):
        target = tmp_path / "sweep.csv"
        run_cli(capsys, "sweep", "--count", "2", "--nu", "1.0", "--output", str(target))
        rows = [l.split(",") for l in target.read_text().strip().splitlines()[1:]]
        big = [r for r in rows if r[0] == "300000"][0]
        assert float(big[3]) == pytest.approx(1e-6 * 100_000 * (32 - 0.0226), rel=1e-4)

    def test_byte_identical_reruns(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli(capsys, "sweep", "--count", "8", "--output", str(a))
        run_cli(capsys, "sweep", "--count", "8", "--output", str(b))
        assert a.read_bytes() == b.read_bytes()


class TestSimulate:
    def test_collusion_scenario_rate(self, capsys):
        code, out, _ = run_cli(
            capsys,
            "simulate",
            "--scenario",
            "collusive-withhold",
            "--q",
            "0.2",
            "--trials",
            "20000",
            "--seed",
            "7",
        )
        assert code == 0
        record = json.loads(out)
        assert record["expected_rate"] == pytest.approx(0.2)
        assert abs(record["rate"] - 0.2) <= 3 * record["ci99"]

    def test_deterministic_output(self, capsys):
        args = (
            "simulate",
            "--scenario",
            "free-rider",
            "--trials",
            "5000",
            "--seed",
            "3",
        )
        _, first, _ = run_cli(capsys, *args)
        _, second, _ = run_cli(capsys, *args)
        assert first == second


class TestGame:
    def test_transcript_events_are_json_lines(self, capsys):
        code, out, _ = run_cli(capsys, "game", "--scenario", "no-attack", "--seed", "1")
        assert code == 0
        events = [json.loads(l) for l in out.strip().splitlines()]
        assert all({"slot", "actor", "action"} <= set(e) for e in events)
        assert events[-1]["detail"]["security_ok"] is True

    def test_deterministic(self, capsys):
        args = ("game", "--scenario", "collusive-withhold", "--q", "0.4", "--seed", "9")
        _, first, _ = run_cli(capsys, *args)
        _, second, _ = run_cli(capsys, *args)
        assert first == second


class TestAxioms:
    def test_optimal_function_passes(self, capsys):
        code, out, _ = run_cli(capsys, "axioms", "--n", "6", "--k", "2", "--mode", "exhaustive")
        assert code == 0
        records = [json.loads(l) for l in out.strip().splitlines()]
        assert [r["axiom"] for r in records] == [
            "symmetry",
            "no_reward",
            "minimal_punishment",
        ]
        assert all(r["result"] == "pass" for r in records)

    def test_tight_bound_fails_with_exit_one(self, capsys):
        code, out, _ = run_cli(
            capsys, "axioms", "--n", "5", "--k", "2", "--bound", "0.1"
        )
        assert code == 1
        records = [json.loads(l) for l in out.strip().splitlines()]
        assert records[2]["result"] == "fail"
        assert "counterexample" in records[2]


class TestReward:
    def test_network_withhold_fixture(self, capsys):
        code, out, _ = run_cli(
            capsys,
            "reward",
            "--variant",
            "withhold-network",
            "--n",
            "2",
            "--pw",
            "1",
            "--ps",
            "0.5",
            "--t",
            "1.5",
        )
        assert code == 0
        record = json.loads(out)
        assert record["q_contract"] == pytest.approx(0.8, abs=1e-9)
        assert record["q_fail"] == pytest.approx(0.04, abs=1e-9)

    def test_full_withhold_requires_bribe_flag(self, capsys):
        code, _, err = run_cli(
            capsys, "reward", "--variant", "withhold-all", "--n", "3", "--pw", "0.1",
            "--ps", "1", "--t", "0.5",
        )
        assert code == 2
        assert "--pb" in err


class TestConfigHandling:
    def test_config_file_supplies_defaults(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"nu_values": [1.0], "epsilon_target": 1e-3}))
        code, out, _ = run_cli(capsys, "bounds", "--config", str(cfg))
        assert code == 0
        assert len(out.strip().splitlines()) == 2

    def test_flags_beat_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"epsilon_target": 1e-3}))
        code, out, _ = run_cli(
            capsys, "bounds", "--config", str(cfg), "--epsilon", "1e-2", "--nu", "1.0"
        )
        assert code == 0
        row = out.strip().splitlines()[1].split(",")
        assert float(row[1]) == pytest.approx(1e-2 * 100_000 * (32 - 0.0226), rel=1e-6)

    def test_malformed_json_reports_line(self, tmp_path, capsys):
        cfg = tmp_path / "broken.json"
        cfg.write_text('{"nu_values": [1.0,\n  "oops"')
        code, _, err = run_cli(capsys, "bounds", "--config", str(cfg))
        assert code == 2
        assert "line" in err

    def test_unknown_field_reported(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"stakes": 32}))
        code, _, err = run_cli(capsys, "bounds", "--config", str(cfg))
        assert code == 2
        assert "stakes" in err

    def test_env_var_fallback(self, tmp_path, capsys, monkeypatch):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"nu_values": [1.0]}))
        monkeypatch.setenv("DAC_CONFIG", str(cfg))
        code, out, _ = run_cli(capsys, "bounds")
        assert code == 0
        assert len(out.strip().splitlines()) == 2

    def test_usage_error_exit_two(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["simulate"])  # missing required --scenario
        assert exc.value.code == 2
