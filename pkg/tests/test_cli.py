import json
import math
import os

import numpy as np
import pytest

from levy_optstop.cli import (
    EXIT_CONFIG,
    EXIT_FINITENESS,
    EXIT_OK,
    EXIT_VALIDATION,
    main,
)

FIG1_CONFIG = """
[model]
family = black_scholes
sigma = 0.2
q = -0.01
delta = -0.06
martingale = true

[contract]
kind = put
strike = 1.2
spot = 0.8
"""

FIG3_CONFIG = """
[model]
family = exp_jump_diffusion
sigma = 0.2
q = -0.01
delta = -0.06
mu = 0.06
lambda = 0.2
rho = 7.5

[contract]
kind = put
strike = 1.2
spot = 0.8
"""


@pytest.fixture()
def fig1_config(tmp_path):
    path = tmp_path / "fig1.ini"
    path.write_text(FIG1_CONFIG)
    return str(path)


@pytest.fixture()
def fig3_config(tmp_path):
    path = tmp_path / "fig3.ini"
    path.write_text(FIG3_CONFIG)
    return str(path)


class TestPriceCommand:
    def test_json_payload(self, fig1_config, tmp_path, capsys):
        out = tmp_path / "price.json"
        rc = main(["price", "--config", fig1_config, "--format", "json", "--out", str(out)])
        assert rc == EXIT_OK
        payload = json.loads(out.read_text())
        assert payload["price"] == pytest.approx(0.45, abs=1e-12)
        assert payload["regime"] == "double"
        assert payload["l_star_asset"] == pytest.approx(0.4, abs=1e-10)
        assert payload["u_star_asset"] == pytest.approx(0.6, abs=1e-10)
        assert payload["phi_q"] == pytest.approx(-0.5, abs=1e-10)

    def test_json_round_trips(self, fig1_config, tmp_path):
        out = tmp_path / "price.json"
        main(["price", "--config", fig1_config, "--format", "json", "--out", str(out)])
        text = out.read_text()
        from levy_optstop.cli import _to_json

        assert _to_json(json.loads(text)) + "\n" == text

    def test_flag_override(self, fig1_config, tmp_path):
        out = tmp_path / "price.json"
        rc = main([
            "price", "--config", fig1_config, "--format", "json", "--out", str(out),
            "--model.q", "0.01",
        ])
        assert rc == EXIT_OK
        payload = json.loads(out.read_text())
        assert payload["regime"] == "single"
        assert payload["l_star"] is None

    def test_call_regime_from_table(self, fig1_config, tmp_path):
        out = tmp_path / "c.json"
        rc = main([
            "classify", "--config", fig1_config, "--format", "json", "--out", str(out),
            "--contract.kind", "call", "--model.delta", "0.03",
        ])
        assert rc == EXIT_OK
        assert json.loads(out.read_text())["regime"] == "single"

    def test_config_error_exit(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[model]\nsigma = 0.2\n")
        assert main(["price", "--config", str(bad)]) == EXIT_CONFIG

    def test_mu_and_martingale_conflict(self, fig1_config):
        assert main(["price", "--config", fig1_config, "--model.mu", "0.03"]) == EXIT_CONFIG

    def test_finiteness_exit(self, fig1_config):
        rc = main([
            "price", "--config", fig1_config, "--model.martingale", "false",
            "--model.mu", "-0.05",
        ])
        assert rc == EXIT_FINITENESS

    def test_no_early_exercise_price_is_null(self, fig1_config, tmp_path):
        # Positive drift keeps the problem finite, but a rate this negative
        # removes the exponent roots: no entrance rule attains the supremum.
        out = tmp_path / "noee.json"
        rc = main([
            "price", "--config", fig1_config, "--format", "json", "--out", str(out),
            "--model.martingale", "false", "--model.mu", "0.03", "--model.q", "-0.02",
        ])
        assert rc == EXIT_OK
        payload = json.loads(out.read_text())
        assert payload["regime"] == "none"
        assert payload["price"] is None

    def test_table_formats_render(self, fig1_config, tmp_path, capsys):
        assert main(["price", "--config", fig1_config]) == EXIT_OK
        assert "regime: double" in capsys.readouterr().out
        assert main([
            "swing", "--config", fig1_config, "--contract.spot", "1.0",
            "--swing.n_rights", "1", "--swing.mc_paths", "2000",
        ]) == EXIT_OK
        assert "k=1" in capsys.readouterr().out


class TestSweepCommand:
    def test_double_region_block(self, fig1_config, tmp_path):
        out = tmp_path / "sweep.csv"
        rc = main([
            "sweep", "--config", fig1_config, "--format", "csv", "--out", str(out),
            "--contract.spot_min", "0.05", "--contract.spot_max", "2.5",
            "--contract.spot_points", "300",
        ])
        assert rc == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "spot,intrinsic,value,in_stopping_region"
        flags = [int(row.split(",")[3]) for row in lines[1:]]
        spots = [float(row.split(",")[0]) for row in lines[1:]]
        block = [i for i, f in enumerate(flags) if f == 1]
        assert block, "stopping region must be marked"
        assert block == list(range(block[0], block[-1] + 1)), "region must be contiguous"
        assert spots[block[0]] > 0.0 and spots[block[-1]] < 1.2
        # Values dominate intrinsic everywhere.
        for row in lines[1:]:
            _, intrinsic, value, _ = row.split(",")
            assert float(value) >= float(intrinsic) - 1e-10

    def test_half_line_for_positive_rate(self, fig1_config, tmp_path):
        out = tmp_path / "sweep_pos.csv"
        rc = main([
            "sweep", "--config", fig1_config, "--format", "csv", "--out", str(out),
            "--contract.spot_min", "0.05", "--contract.spot_max", "2.5",
            "--contract.spot_points", "200", "--model.q", "0.01",
        ])
        assert rc == EXIT_OK
        rows = out.read_text().splitlines()[1:]
        flags = [int(r.split(",")[3]) for r in rows]
        switch = flags.index(0)
        assert all(f == 1 for f in flags[:switch])
        assert all(f == 0 for f in flags[switch:])

    def test_byte_identical_rerun(self, fig3_config, tmp_path):
        out_a = tmp_path / "a.csv"
        out_b = tmp_path / "b.csv"
        args = [
            "sweep", "--config", fig3_config, "--format", "csv",
            "--contract.spot_min", "0.05", "--contract.spot_max", "2.5",
            "--contract.spot_points", "120",
        ]
        assert main(args + ["--out", str(out_a)]) == EXIT_OK
        assert main(args + ["--out", str(out_b)]) == EXIT_OK
        assert out_a.read_bytes() == out_b.read_bytes()


class TestSwingCommand:
    def test_ladder_csv_deterministic(self, fig1_config, tmp_path):
        out_a = tmp_path / "ladder_a.csv"
        out_b = tmp_path / "ladder_b.csv"
        args = [
            "swing", "--config", fig1_config, "--format", "csv",
            "--contract.spot", "1.0",
            "--swing.n_rights", "2", "--swing.refraction", "deterministic",
            "--swing.refraction_parameter", "0.5", "--swing.mc_paths", "2000",
            "--seed", "7",
        ]
        assert main(args + ["--out", str(out_a)]) == EXIT_OK
        assert main(args + ["--out", str(out_b)]) == EXIT_OK
        assert out_a.read_bytes() == out_b.read_bytes()
        lines = out_a.read_text().splitlines()
        assert lines[0] == "k,l_star,u_star,se_l,se_u,value_at_spot"
        assert len(lines) == 3

    def test_single_right_matches_price(self, fig1_config, tmp_path):
        ladder = tmp_path / "ladder.json"
        price = tmp_path / "price.json"
        assert main([
            "swing", "--config", fig1_config, "--format", "json", "--out", str(ladder),
            "--swing.n_rights", "1", "--swing.mc_paths", "2000",
        ]) == EXIT_OK
        assert main(["price", "--config", fig1_config, "--format", "json", "--out", str(price)]) == EXIT_OK
        swing_value = json.loads(ladder.read_text())["value_at_spot"]
        put_price = json.loads(price.read_text())["price"]
        assert swing_value == pytest.approx(put_price, abs=1e-6)


class TestValidateCommand:
    def test_passes_on_benchmark(self, fig1_config, tmp_path):
        out = tmp_path / "validate.json"
        rc = main([
            "validate", "--config", fig1_config, "--format", "json", "--out", str(out),
            "--mc.paths", "20000", "--mc.horizon", "1500", "--mc.seed", "3",
        ])
        payload = json.loads(out.read_text())
        assert payload["status"] == "pass", payload
        assert rc == EXIT_OK

    def test_no_exercise_fixture_rejected(self, fig1_config):
        rc = main([
            "validate", "--config", fig1_config,
            "--model.martingale", "false", "--model.mu", "0.03", "--model.q", "-0.02",
        ])
        assert rc == EXIT_CONFIG

    def test_corrupted_boundary_fails(self, fig1_config, tmp_path, monkeypatch):
        monkeypatch.setenv("LEVY_OPTSTOP_CORRUPT_BOUNDARY", "0.01")
        out = tmp_path / "validate_bad.json"
        rc = main([
            "validate", "--config", fig1_config, "--format", "json", "--out", str(out),
            "--mc.paths", "20000", "--mc.horizon", "1500", "--mc.seed", "3",
        ])
        assert rc == EXIT_VALIDATION
        payload = json.loads(out.read_text())
        failed = [c["name"] for c in payload["checks"] if c["status"] == "FAIL"]
        assert failed == ["smooth_fit"]
