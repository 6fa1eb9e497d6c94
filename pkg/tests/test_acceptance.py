"""Acceptance criteria 1-10, each timed and reported as one PASS/FAIL line."""

import math

import numpy as np
import pytest

from muqm.bounds import memory_capacity_qubits, shor_max_n, spatial_resolution
from muqm.collapse import TriggerBasis, collapse, mean_post_chi
from muqm.dynamics import coherent_truncation, qubit_flip_evolve
from muqm.entanglement import bipartitions, invariant_count, island_decomposition, lambda_plus, reduced_density, von_neumann_entropy, xi
from muqm.experiments.config import ExperimentConfig, build_state, substream
from muqm.experiments.runner import run_ensemble
from muqm.hilbert import MultipartiteState, ResolutionParams, basis_state, bell, discretize, ghz, random_state, w_state

import oracles

EQ1 = "eq1(sqrt(0.3), sqrt(0.7))"
MASTER_SEED = 20261015


def rotate(state, unitaries):
    amps = state.amplitudes.reshape(state.dims)
    for k, u in enumerate(unitaries):
        amps = np.moveaxis(np.tensordot(u, amps, axes=([1], [k])), 0, k)
    return state.with_amplitudes(amps.reshape(-1))


def random_rotation(state, rng):
    return rotate(state, [oracles.random_local_unitary(d, rng) for d in state.dims])


def perturbed_product(n, scale, rng):
    amps = np.ones(1, dtype=complex)
    for _ in range(n):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        amps = np.kron(amps, v / np.linalg.norm(v))
    amps = amps + scale * random_state((2,) * n, rng).amplitudes
    return MultipartiteState((2,) * n, amps / np.linalg.norm(amps))


def random_single_index(rng):
    n, d = int(rng.integers(2, 5)), int(rng.integers(2, 4))
    c = rng.uniform(0.2, 1.0, size=d)
    return random_rotation(ghz(n, d=d, coefficients=c / np.linalg.norm(c)), rng)


def test_criterion_01_ghz_basis_selection(criterion):
    with criterion(1, "GHZ mean post-collapse chi: computational 0, |+-> 2", 1.0) as c:
        res = ResolutionParams(10)
        comp = mean_post_chi(ghz(3), TriggerBasis(0, np.eye(2)), res)
        pm = mean_post_chi(ghz(3), TriggerBasis(0, np.array([[1, 1], [1, -1]]) / math.sqrt(2)), res)
        c.detail = f"computational={comp:.3g} plus-minus={pm:.12g}"
        assert abs(comp) <= 1e-9
        assert abs(pm - 2.0) <= 1e-9


def test_criterion_02_coherent_truncation(criterion):
    with criterion(2, "coherent state alpha=2, mu=100: n_r = 45, tail <= e^-65", 1.0) as c:
        tr = coherent_truncation(2.0, ResolutionParams(100))
        c.detail = f"n_r={tr.n_r} ln(tail)={tr.log_tail:.2f}"
        assert tr.n_r == 45
        assert tr.tail <= math.exp(-65)


def test_criterion_03_memory_estimate(criterion):
    with criterion(3, "1e21 bits at mu=50 hold 64 qubits", 1.0) as c:
        n = memory_capacity_qubits(10**21, ResolutionParams(50))
        c.detail = f"max_qubits={n}"
        assert n == 64


def test_criterion_04_monotone_normalization(criterion):
    with criterion(4, "xi(Bell) = 2 and xi(GHZ-N) = N for N <= 10", 5.0) as c:
        errs = [abs(xi(bell()) - 2.0)] + [abs(xi(ghz(n)) - n) for n in range(2, 11)]
        c.detail = f"max error={max(errs):.2g}"
        assert max(errs) <= 1e-9


def test_criterion_05_qubit_flip(criterion):
    with criterion(5, "qubit flip at t = pi hbar / (2 dE) reaches |1>", 1.0) as c:
        worst = 1.0
        for dE in (0.25, 1.0, 3.0):
            s = qubit_flip_evolve(math.pi / (2 * dE), dE)
            worst = min(worst, abs(s.amplitudes[1]) ** 2 / s.norm() ** 2)
        c.detail = f"min fidelity=1-{1 - worst:.2g}"
        assert worst >= 1 - 1e-9


def test_criterion_06_born_statistics(criterion):
    with criterion(6, "Born statistics, M=1e4: outcome-1 frequency in [0.682, 0.718]", 30.0) as c:
        state = build_state(EQ1)
        # kappa = 1/4 makes the state unstable on its own (chi ~ 2.64 >= 2.5)
        res = ResolutionParams(10, kappa=0.25)
        m = 10_000
        ones = sum(collapse(state, res, substream(MASTER_SEED, i))[1].outcome_index == 1 for i in range(m))
        freq = ones / m
        c.detail = f"frequency={freq:.4f}"
        assert 0.682 <= freq <= 0.718


def test_criterion_07_decoherence_equivalence(criterion):
    with criterion(7, "ensemble vs decohered mixture, M=1e4: trace distance <= 5/sqrt(M)", 60.0) as c:
        cfg = ExperimentConfig("ensemble", state=EQ1, mu=10, seed=MASTER_SEED, trajectories=10_000)
        rep = run_ensemble(cfg)
        c.detail = f"trace distance={rep.trace_distance:.4f} bound={rep.distance_bound:.3f}"
        assert rep.trace_distance <= 5 / math.sqrt(10_000)


def _oracle_suite(rng):
    fixed = [
        bell(), ghz(3), ghz(4), w_state(3), w_state(4), bell().kron(bell()),
        basis_state((2,) * 4, (0, 1, 0, 1)), bell().kron(basis_state((2,), (1,))),
        MultipartiteState((2, 2), [math.sqrt(1 - 2.0**-20), 0, 0, 2.0**-10]),
    ]
    suite = [(s, mu) for s, mu in zip(fixed, (10, 10, 20, 10, 30, 10, 10, 10, 30))]
    while len(suite) < 50:
        n = int(rng.integers(2, 5))
        kind = len(suite) % 3
        if kind == 0:
            s = random_state((2,) * n, rng)
        elif kind == 1:
            s = perturbed_product(n, 10 ** rng.uniform(-5, -1), rng)
        else:
            a = perturbed_product(2, 10 ** rng.uniform(-5, 0), rng)
            s = a.kron(random_state((2,) * int(rng.integers(1, 3)), rng))
        suite.append((s, int(rng.integers(4, 60))))
    return suite


def test_criterion_08_oracle_equivalence(criterion):
    with criterion(8, "xi, lambda+ and islands match brute force on 50 states (<= 4 qubits)", 60.0) as c:
        suite = _oracle_suite(np.random.default_rng(MASTER_SEED))
        worst = 0.0
        mismatched = []
        for k, (s, mu) in enumerate(suite):
            res = ResolutionParams(mu)
            worst = max(worst, abs(xi(s) - oracles.xi_bruteforce(s.amplitudes, s.dims)))
            for y in bipartitions(s.n_parties):
                worst = max(worst, abs(lambda_plus(s, y) - oracles.lambda_plus_bruteforce(s.amplitudes, s.dims, y.members)))
            if island_decomposition(s, res) != oracles.islands_bruteforce(s.amplitudes, s.dims, res.lambda_threshold):
                mismatched.append(k)
        c.detail = f"states={len(suite)} max deviation={worst:.2g} island mismatches={len(mismatched)}"
        assert len(suite) == 50
        assert worst <= 1e-8
        assert not mismatched


def test_criterion_09_invariant_suite(criterion):
    with criterion(9, "idempotence, Schmidt symmetry, LU invariance, productness, determinism (100 cases each)", 120.0) as c:
        rng = np.random.default_rng(MASTER_SEED + 9)
        cases = 100
        failures = {}

        def fail(name):
            failures[name] = failures.get(name, 0) + 1

        for _ in range(cases):
            dims = tuple(int(d) for d in rng.integers(2, 4, size=int(rng.integers(1, 4))))
            res = ResolutionParams(int(rng.integers(1, 101)))
            once = discretize(random_state(dims, rng), res)
            if not np.array_equal(discretize(once, res).amplitudes, once.amplitudes):
                fail("idempotence")

        for _ in range(cases):
            dims = tuple(int(d) for d in rng.integers(2, 4, size=int(rng.integers(2, 5))))
            s = random_state(dims, rng)
            for y in bipartitions(len(dims)):
                a = von_neumann_entropy(reduced_density(s, y))
                b = von_neumann_entropy(reduced_density(s, y.complement()))
                if abs(a - b) > 1e-9:
                    fail("schmidt symmetry")
                    break

        for k in range(cases):
            n = int(rng.integers(2, 5))
            s = random_state((2,) * n, rng) if k % 2 else random_single_index(rng)
            if abs(xi(random_rotation(s, rng)) - xi(s)) > 1e-8:
                fail("local-unitary invariance")

        for _ in range(cases):
            s = random_single_index(rng)
            post, _ = collapse(s, ResolutionParams(int(rng.integers(40, 91))), rng, force=True)
            if any(lambda_plus(post, y) > 1e-9 for y in bipartitions(post.n_parties)):
                fail("post-collapse productness")

        for k in range(cases):
            s = random_single_index(rng) if k % 2 else random_rotation(w_state(3), rng)
            res = ResolutionParams(int(rng.integers(20, 91)))
            seed = int(rng.integers(2**63))
            a = collapse(s, res, substream(seed, k), force=True)
            b = collapse(s, res, substream(seed, k), force=True)
            if not (np.array_equal(a[0].amplitudes, b[0].amplitudes) and a[1] == b[1]):
                fail("seed determinism")

        c.detail = "failures: " + (", ".join(f"{k}={v}" for k, v in failures.items()) or "none")
        assert not failures


def test_criterion_10_formula_suite(criterion):
    with criterion(10, "invariant count (D<=5, N<=6), Shor and spatial identities", 1.0) as c:
        bad = [(D, N) for D in range(2, 6) for N in range(1, 7) if invariant_count(D, N) != oracles.invariant_count_bigint(D, N)]
        for mu in range(1, 1025):
            n = shor_max_n(mu)
            assert isinstance(n, int) and n == 2**mu and n.bit_length() == mu + 1
        for mu in range(0, 1025):
            for L in (1e-35, 1.0, 8.8e26):
                assert spatial_resolution(L, mu) * 2.0 ** (mu / 3) == pytest.approx(L, rel=1e-12)
        assert spatial_resolution(1.0, 30) == 2.0**-10
        c.detail = f"invariant-count mismatches={len(bad)}"
        assert not bad
