import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from muqm.errors import ConfigError
from muqm.experiments import cli
from muqm.experiments.config import (
    ExperimentConfig,
    build_state,
    coherent_alpha,
    config_from_mapping,
    dumps_config,
    load_config,
    loads_config,
    parse_number,
    substream,
)
from muqm.experiments.runner import (
    analyze,
    run_bounds,
    run_ensemble,
    run_measurement_chain,
    run_recollapse,
    run_truncate,
    state_digest,
)
from muqm.hilbert import basis_state, ghz, save_state

EQ1 = "eq1(sqrt(0.3), sqrt(0.7))"


def cfg(experiment, **kw):
    kw.setdefault("seed", 1 if experiment in ("measurement_chain", "ensemble", "recollapse") else None)
    return ExperimentConfig(experiment, **kw)


class TestConfig:
    def test_round_trip(self):
        c = cfg("ensemble", state=EQ1, mu=12, kappa=0.5, trajectories=7, output="out.csv", format="json")
        text = dumps_config(c)
        assert loads_config(text) == c
        assert dumps_config(loads_config(text)) == text

    @given(
        st.sampled_from(["measurement_chain", "ensemble", "recollapse", "analyze"]),
        st.integers(1, 100),
        st.floats(0.01, 1.0),
        st.integers(0, 2**64 - 1),
        st.integers(1, 10**5),
        st.integers(0, 1000),
    )
    @settings(max_examples=100, deadline=None)
    def test_round_trip_property(self, experiment, mu, kappa, seed, m, steps):
        c = ExperimentConfig(experiment, state="ghz(4)", mu=mu, kappa=kappa, seed=seed, trajectories=m, steps=steps)
        assert loads_config(dumps_config(c)) == c

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown config keys: colour"):
            loads_config("[experiment]\nexperiment = analyze\nstate = bell\ncolour = red\n")

    def test_extra_section(self):
        with pytest.raises(ConfigError):
            loads_config("[experiment]\nexperiment = analyze\nstate = bell\n[other]\nx = 1\n")

    @pytest.mark.parametrize(
        "kw",
        [
            dict(experiment="ensemble", state="bell"),  # missing seed
            dict(experiment="analyze", state="bell", mu=0),
            dict(experiment="analyze", state="bell", kappa=0),
            dict(experiment="analyze", state="bell", format="xml"),
            dict(experiment="ensemble", state="bell", seed=1, trajectories=0),
            dict(experiment="ensemble", state="bell", seed=-1),
            dict(experiment="ensemble", state="bell", seed=2**64),
            dict(experiment="teleport", state="bell"),
            dict(experiment="analyze"),
            dict(experiment="bounds", length=-1.0),
        ],
    )
    def test_validation(self, kw):
        with pytest.raises(ConfigError):
            config_from_mapping(kw)

    def test_bad_number(self):
        with pytest.raises(ConfigError, match="mu"):
            loads_config("[experiment]\nexperiment = analyze\nstate = bell\nmu = ten\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.ini")


class TestStates:
    def test_presets(self):
        assert build_state("bell").dims == (2, 2)
        assert build_state("ghz(5)").dims == (2,) * 5
        assert build_state("w(4)").dims == (2,) * 4
        assert build_state("basis(0110)").same_as(basis_state((2,) * 4, (0, 1, 1, 0)))
        s = build_state(EQ1)
        assert s.dims == (2, 2, 2)
        assert abs(s.amplitudes[7]) ** 2 == pytest.approx(0.7)

    def test_eq1_is_normalized(self):
        s = build_state("eq1(1, 1, 1)")
        assert s.dims == (3, 3, 3)
        assert s.norm() == pytest.approx(1.0)

    def test_state_file(self, tmp_path):
        path = tmp_path / "s.txt"
        save_state(ghz(3), path)
        assert build_state(str(path)).same_as(ghz(3))

    @pytest.mark.parametrize("spec", ["ghz(1)", "eq1()", "eq1(0, 0)", "basis(012)", "coherent(2)", "nothing.txt", "w(x)"])
    def test_bad_presets(self, spec):
        with pytest.raises(Exception) as info:
            build_state(spec)
        assert info.type.__name__ in ("ConfigError", "NumericDomainError")

    def test_numbers(self):
        assert parse_number("sqrt(0.25)") == 0.5
        assert parse_number("-sqrt(4)") == -2
        assert parse_number("0.5+0.5j") == 0.5 + 0.5j
        assert coherent_alpha("coherent(2)") == 2
        with pytest.raises(ConfigError):
            parse_number("sqrt(-1)")

    def test_substreams_are_independent_of_count(self):
        a = substream(42, 7).random(3)
        b = substream(42, 7).random(3)
        c = substream(42, 8).random(3)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)


class TestRunners:
    def test_measurement_chain_symmetric(self):
        for seed in range(5):
            rec = run_measurement_chain(cfg("measurement_chain", state="eq1(sqrt(0.5), sqrt(0.5))", seed=seed))
            (ev,) = rec.events
            assert ev.outcome_index in (0, 1)
            assert ev.born_probability == pytest.approx(0.5)
            assert rec.forced

    def test_measurement_chain_deterministic_outcome(self):
        for seed in range(5):
            (ev,) = run_measurement_chain(cfg("measurement_chain", state="eq1(1, 0)", seed=seed)).events
            assert ev.outcome_index == 0
            assert ev.born_probability == 1.0

    def test_measurement_chain_needs_eq1(self):
        with pytest.raises(ConfigError):
            run_measurement_chain(cfg("measurement_chain", state="ghz(3)"))

    def test_unstable_input_is_not_forced(self):
        rec = run_measurement_chain(cfg("measurement_chain", state=EQ1, mu=4, kappa=0.25))
        assert not rec.forced

    def test_digest_reproducible(self):
        c = cfg("measurement_chain", state=EQ1, seed=99)
        assert run_measurement_chain(c).final_state_digest == run_measurement_chain(c).final_state_digest
        assert len(run_measurement_chain(c).final_state_digest) == 64

    @pytest.mark.parametrize("seed", range(6))
    def test_single_trajectory_trace_distance(self, seed):
        rep = run_ensemble(cfg("ensemble", state=EQ1, seed=seed, trajectories=1))
        (j,) = rep.frequencies
        assert rep.trace_distance == pytest.approx(1 - rep.born_probabilities[j], abs=1e-12)

    @pytest.mark.parametrize("m", [1, 50])
    def test_deterministic_ensemble(self, m):
        rep = run_ensemble(cfg("ensemble", state="eq1(1, 0)", trajectories=m))
        assert rep.trace_distance == pytest.approx(0.0, abs=1e-12)
        assert rep.frequencies == {0: 1.0}

    def test_trace_distance_shrinks_with_m(self):
        means = []
        for m, seeds in ((100, range(8)), (1000, range(3)), (10000, range(1))):
            tds = [run_ensemble(cfg("ensemble", state=EQ1, seed=s, trajectories=m)).trace_distance for s in seeds]
            means.append(float(np.mean(tds)))
        assert means[0] > means[1] > means[2]
        assert means[2] <= 5 / math.sqrt(10000)

    def test_recollapse(self):
        runs = run_recollapse(cfg("recollapse", state="basis(00000000)", mu=4, steps=4, trajectories=2))
        assert [i for i, _ in runs] == [0, 1]
        for _, steps in runs:
            assert len(steps) == 4
            assert all(st.chi == 0.0 for st in steps if st.event)

    def test_recollapse_rejects_non_qubits_for_entangler(self, tmp_path):
        path = tmp_path / "q.txt"
        save_state(ghz(2, d=3), path)
        with pytest.raises(ConfigError):
            run_recollapse(cfg("recollapse", state=str(path)))

    def test_truncate(self):
        out = run_truncate(cfg("truncate", state="coherent(2)", mu=100))
        assert out["n_r"] == 45
        assert out["tail"] <= math.exp(-65)
        assert out["effective_dimension"] <= 45

    def test_bounds(self):
        out = run_bounds(cfg("bounds", mu=50))
        assert out["max_qubits"] == 64

    def test_analyze(self):
        rep = analyze(cfg("analyze", state="ghz(3)", mu=10))
        assert rep.chi == pytest.approx(3.0) and rep.stable
        assert analyze(cfg("analyze", state="bell")).xi == pytest.approx(2.0)
        assert analyze(cfg("analyze", state="basis(0101)")).chi == 0.0


class TestCli:
    def run(self, capsys, *argv):
        code = cli.main(list(argv))
        out, err = capsys.readouterr()
        return code, out, err

    def test_analyze_text(self, capsys):
        code, out, _ = self.run(capsys, "analyze", "--state", "ghz(3)", "--mu", "10")
        assert code == 0
        fields = dict(line.split(": ", 1) for line in out.splitlines() if ": " in line and not line.startswith(" "))
        assert float(fields["chi"]) == pytest.approx(3.0)
        assert fields["stable"] == "true"

    def test_bounds_json(self, capsys):
        code, out, _ = self.run(capsys, "bounds", "--mu", "50", "--format", "json")
        data = json.loads(out)
        assert code == 0
        assert {"max_qubits", "shor_max_n", "delta_x", "mu_upper_bound"} <= set(data)
        assert data["max_qubits"] == 64

    def test_collapse_csv(self, capsys):
        code, out, _ = self.run(capsys, "collapse", "--state", EQ1, "--seed", "3")
        lines = out.splitlines()
        assert code == 0
        assert lines[0] == "trajectory_id,trigger,outcome_index,born_probability,chi_before,chi_after,basis_label,final_state_digest"
        assert len(lines) == 2

    def test_ensemble_summary_on_stderr(self, capsys):
        code, out, err = self.run(capsys, "ensemble", "--state", EQ1, "--seed", "3", "--trajectories", "20")
        assert code == 0
        assert len(out.splitlines()) == 21
        assert "trace_distance:" in err

    def test_recollapse_and_truncate(self, capsys):
        code, out, _ = self.run(capsys, "recollapse", "--state", "ghz(3)", "--seed", "1", "--mu", "4", "--kappa", "0.5", "--steps", "3")
        assert code == 0 and out.splitlines()[0] == "trajectory_id,step,chi,event_flag,outcome_index,norm_drift"
        code, out, _ = self.run(capsys, "truncate", "--state", "coherent(2)", "--mu", "100")
        assert code == 0 and "n_r" in out and " 45" in out

    def test_config_error_exit_code(self, capsys):
        code, _, err = self.run(capsys, "ensemble", "--state", EQ1)
        assert code == 2 and "seed" in err

    def test_numeric_error_exit_code(self, capsys):
        code, _, err = self.run(capsys, "truncate", "--state", "coherent(30)", "--mu", "2")
        assert code == 3 and "numeric error" in err

    def test_grid_underflow_exit_code(self, capsys):
        code, _, err = self.run(capsys, "recollapse", "--state", "ghz(3)", "--seed", "1", "--mu", "2", "--kappa", "0.5")
        assert code == 3 and "rounded to zero" in err

    def test_unsupported_precision_exit_code(self, capsys):
        code, _, _ = self.run(capsys, "collapse", "--state", EQ1, "--seed", "1", "--mu", "120")
        assert code == 3

    def test_config_file_is_byte_reproducible(self, tmp_path, capsys):
        conf = tmp_path / "run.ini"
        conf.write_text(f"[experiment]\nexperiment = ensemble\nstate = {EQ1}\nmu = 12\nseed = 2024\ntrajectories = 40\n")
        outs = []
        for k in range(2):
            path = tmp_path / f"out{k}.csv"
            code, _, _ = self.run(capsys, "ensemble", "--config", str(conf), "--output", str(path))
            assert code == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]
        assert outs[0].count(b"\n") == 41

    def test_cli_overrides_config(self, tmp_path, capsys):
        conf = tmp_path / "run.ini"
        conf.write_text("[experiment]\nexperiment = bounds\nmu = 50\n")
        code, out, _ = self.run(capsys, "bounds", "--config", str(conf), "--mu", "10", "--format", "json")
        assert code == 0 and json.loads(out)["shor_max_n"] == 1024

    def test_config_for_other_experiment(self, tmp_path, capsys):
        conf = tmp_path / "run.ini"
        conf.write_text("[experiment]\nexperiment = bounds\n")
        code, _, _ = self.run(capsys, "analyze", "--config", str(conf), "--state", "bell")
        assert code == 2

    def test_save_config_round_trip(self, tmp_path, capsys):
        saved = tmp_path / "saved.ini"
        code, _, _ = self.run(capsys, "collapse", "--state", EQ1, "--seed", "5", "--save-config", str(saved))
        assert code == 0
        c = load_config(saved)
        assert c.experiment == "measurement_chain" and c.seed == 5

    def test_digest_matches_state(self):
        assert state_digest(ghz(3)) == state_digest(ghz(3))
        assert state_digest(ghz(3)) != state_digest(ghz(4))
