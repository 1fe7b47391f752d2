import os

import numpy as np
import pytest

from gasflow import cli
from gasflow.config import (ScenarioConfig, parse_config, parse_config_text,
                            serialize_config)
from gasflow.errors import ConfigError
from gasflow.scenarios import scenario_initial_state
from gasflow import gas


class TestConfigParsing:
    def test_minimal_defaults(self):
        cfg = parse_config_text("scenario = sod\n")
        assert cfg.limiter_passes == 2
        assert cfg.cfl == -1.0  # scenario default marker
        from gasflow.scenarios import scenario_initial_state

        setup = scenario_initial_state("sod", cfg)
        assert setup.hyp_cfg.cfl == 0.9
        assert setup.hyp_cfg.limiter_passes == 2

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="cflx"):
            parse_config_text("scenario = sod\ncflx = 0.5\n")

    def test_gamma_validation(self):
        with pytest.raises(ConfigError, match="gamma"):
            parse_config_text("scenario = sod\ngamma = 0.9\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("scenario = sod\ncfl = 0.5\ncfl = 0.7\n")

    def test_comments_and_blank_lines(self):
        cfg = parse_config_text("# a comment\n\nscenario = vortex # trailing\n")
        assert cfg.scenario == "vortex"

    def test_bad_value_types(self):
        with pytest.raises(ConfigError, match="threads"):
            parse_config_text("scenario = sod\nthreads = many\n")
        with pytest.raises(ConfigError, match="debug_checks"):
            parse_config_text("scenario = sod\ndebug_checks = maybe\n")

    def test_round_trip_identity(self):
        cfg = parse_config_text(
            "scenario = vortex\ncfl = 0.75\nvortex_case = ii\nthreads = 2\n"
            "solver_tol = 1e-11\nconsistent_mass_correction = false\n"
        )
        text = serialize_config(cfg)
        again = parse_config_text(text)
        assert again == cfg
        assert serialize_config(again) == text

    def test_unknown_scenario(self):
        with pytest.raises(ConfigError, match="unknown scenario"):
            parse_config_text("scenario = warpdrive\n")


class TestScenarios:
    @pytest.mark.parametrize("name,kw", [
        ("sod", {"cells": 40}),
        ("becker", {"cells_x": 16, "cells_y": 16}),
        ("vortex", {"cells_x": 16, "cells_y": 16}),
        ("shocktube2d", {"cells_x": 32, "cells_y": 16}),
        ("slipbox", {"cells_x": 8, "cells_y": 8}),
    ])
    def test_initial_states_admissible(self, name, kw):
        cfg = ScenarioConfig(scenario=name, **kw).validate()
        setup = scenario_initial_state(name, cfg)
        assert np.all(gas.is_admissible(setup.u0))
        assert setup.t_final > 0

    def test_vortex_case_presets(self):
        cfg = ScenarioConfig(scenario="vortex", vortex_case="iii",
                             cells_x=8, cells_y=8).validate()
        setup = scenario_initial_state("vortex", cfg)
        # M = 0.05: far-field sound speed 20, pressure rho a^2 / gamma
        rho, v, p = gas.to_primitive(setup.u0, setup.law)
        assert p.max() == pytest.approx(1.0 * 400.0 / 1.4, rel=1e-2)

    def test_shocktube_kappa_from_prandtl(self):
        cfg = ScenarioConfig(scenario="shocktube2d", cells_x=16, cells_y=8).validate()
        setup = scenario_initial_state("shocktube2d", cfg)
        assert setup.model.mu == pytest.approx(1e-3)
        assert setup.model.kappa_over_cv == pytest.approx(1e-3 * 1.4 / 0.73, rel=1e-12)

    def test_becker_counts_match_convention(self):
        cfg = ScenarioConfig(scenario="becker", cells_x=64, cells_y=64).validate()
        setup = scenario_initial_state("becker", cfg)
        assert setup.graph.n_nodes == 4225


def run_cli(args):
    return cli.main(args)


class TestCLI:
    def test_riemann_subcommand(self, capsys):
        rc = run_cli(["riemann", "1,0,1", "0.125,0,0.1"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "pstar,0.30313" in out.replace("0.303130178", "0.30313")

    def test_run_exit_code_config_error(self, tmp_path, capsys):
        path = os.path.join(tmp_path, "bad.cfg")
        with open(path, "w") as fh:
            fh.write("scenario = sod\ncflx = 1\n")
        assert run_cli(["run", path]) == 2

    def test_run_sod_smoke(self, tmp_path, capsys):
        path = os.path.join(tmp_path, "sod.cfg")
        with open(path, "w") as fh:
            fh.write(f"scenario = sod\ncells = 50\nt_final = 0.05\n"
                     f"output_dir = {tmp_path}/out\nvtk_cadence = 100\n")
        assert run_cli(["run", path]) == 0
        assert os.path.exists(f"{tmp_path}/out/timeseries.csv")
        assert os.path.exists(f"{tmp_path}/out/summary.txt")
        assert os.path.exists(f"{tmp_path}/out/state_000000.vtk")
        header = open(f"{tmp_path}/out/timeseries.csv").readline().strip()
        assert header == "step,t,tau,mass,energy,ledger_residual"

    def test_byte_identical_reruns(self, tmp_path):
        outs = []
        for tag in ("a", "b"):
            path = os.path.join(tmp_path, f"v{tag}.cfg")
            with open(path, "w") as fh:
                fh.write(f"scenario = vortex\ncells_x = 12\ncells_y = 12\n"
                         f"t_final = 0.1\nthreads = 2\n"
                         f"output_dir = {tmp_path}/out_{tag}\n")
            assert run_cli(["run", path]) == 0
            outs.append(open(f"{tmp_path}/out_{tag}/timeseries.csv", "rb").read())
        assert outs[0] == outs[1]

    def test_verify_graph_suite(self, capsys):
        assert run_cli(["verify", "graph"]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_bench_smoke(self, tmp_path, capsys):
        path = os.path.join(tmp_path, "bench.cfg")
        with open(path, "w") as fh:
            fh.write(f"scenario = slipbox\ncells_x = 12\ncells_y = 12\n"
                     f"output_dir = {tmp_path}/bench\n")
        assert run_cli(["bench", path, "--threads", "1,2", "--steps", "3"]) == 0
        out = capsys.readouterr().out
        assert "threads,nodes" in out or "threads" in out
