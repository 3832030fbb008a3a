import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ocmsd.envarray import ArrayGeometry
from oracles import dual_certificate, oracle_support, random_instance
from ocmsd.fieldsynth import PressureSnapshot, add_noise, synthesize_pressure
from ocmsd.harness.pipeline import PipelineOptions, solver_config, truth_field
from ocmsd.modesolver import candidate_mode_set, sample_at_depths
from ocmsd.ocms import (
    EstimationError,
    SolverConfig,
    _DictionaryFactory,
    bpdn_batch,
    bpdn_solve,
    epsilon_from_noise,
    estimate_at_anchor,
    estimate_modes,
)


# -- epsilon_n -------------------------------------------------------------------


def _snap(n=30, sigma=1.0541e-3, aux=None):
    return PressureSnapshot(596.0, np.arange(1.0, n + 1), np.ones(n) / math.sqrt(n), noise_sigma=sigma, aux_bins=aux)


def test_epsilon_known_sigma():
    assert epsilon_from_noise(_snap()) == pytest.approx(6.351e-3, rel=1e-4)
    assert epsilon_from_noise(_snap()) == pytest.approx(1.1 * 1.0541e-3 * math.sqrt(30), rel=1e-14)


def test_epsilon_floor_for_zero_sigma():
    assert epsilon_from_noise(_snap(sigma=0.0)) == 1e-12


def test_epsilon_relative_floor():
    assert epsilon_from_noise(_snap(sigma=0.0), relative_floor=1e-3) == pytest.approx(1e-3)


def test_epsilon_offbin_median():
    bins = [np.full(4, 0.9 / 2), np.full(4, 1.0 / 2), np.full(4, 1.3 / 2)]
    assert epsilon_from_noise(_snap(n=4), "offbin", bins) == pytest.approx(1.1, rel=1e-14)
    assert epsilon_from_noise(_snap(n=4, aux=np.array(bins)), "offbin") == pytest.approx(1.1, rel=1e-14)


def test_epsilon_errors():
    with pytest.raises(ValueError):
        epsilon_from_noise(_snap(), "offbin")
    with pytest.raises(ValueError):
        epsilon_from_noise(_snap(sigma=None))
    with pytest.raises(ValueError):
        epsilon_from_noise(_snap(), "guess")


# -- BPDN ----------------------------------------------------------------------


def test_identity_dictionary_zero_epsilon_returns_data():
    p = np.array([1 + 2j, 3.0, -1j, 0.5])
    assert np.array_equal(bpdn_solve(np.eye(4), p, 0.0), p)


def test_large_epsilon_gives_zero():
    rng = np.random.default_rng(1)
    D, _, _, p, _ = random_instance(rng)
    assert np.all(bpdn_solve(D, p, np.linalg.norm(p)) == 0)
    assert np.all(bpdn_solve(D, p, 2 * np.linalg.norm(p)) == 0)


def test_infeasible_is_a_value():
    D = np.array([[1.0], [0.0]])
    assert bpdn_solve(D, np.array([0.0, 1.0]), 0.5) is None
    assert bpdn_solve(D, np.array([0.0, 1.0]), 1.0) is not None


def test_non_finite_input_raises():
    with pytest.raises(ValueError):
        bpdn_solve(np.eye(2), np.array([np.nan, 1.0]), 0.1)
    with pytest.raises(ValueError):
        bpdn_solve(np.array([[np.inf, 0.0], [0.0, 1.0]]), np.ones(2), 0.1)
    with pytest.raises(ValueError):
        bpdn_solve(np.eye(2), np.ones(3), 0.1)


def test_support_matches_exhaustive_oracle_on_certified_instances():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 6:
        D, a, S, p, eps = random_instance(rng)
        if dual_certificate(D, S, a) >= 0.8:
            continue
        a_hat = bpdn_solve(D, p, eps)
        assert np.linalg.norm(p - D @ a_hat) <= eps * (1 + 1e-6)
        got = tuple(np.flatnonzero(np.abs(a_hat) > eps))
        assert got == tuple(oracle_support(D, p, eps)[0])
        checked += 1


def test_objective_matches_generic_conic_solver():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(0)
    for trial in range(12):
        n, m = (8, 20) if trial % 2 else (30, 14)
        D = rng.standard_normal((n, m))
        if trial % 3 == 0:
            D = D[:, :3] @ rng.standard_normal((3, m))  # rank 3
        D /= np.linalg.norm(D, axis=0)
        a = np.zeros(m, dtype=complex)
        a[rng.choice(m, 3, replace=False)] = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        p = D @ a + 0.05 * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        ls_res = np.linalg.norm(p - D @ np.linalg.lstsq(D, p, rcond=None)[0])
        eps = max(1.2 * ls_res, 0.05 * math.sqrt(n))
        x = cp.Variable(m, complex=True)
        prob = cp.Problem(cp.Minimize(cp.norm1(x)), [cp.norm(p - D @ x, 2) <= eps])
        prob.solve(solver=cp.CLARABEL)
        a_hat = bpdn_solve(D, p, eps)
        assert np.abs(a_hat).sum() == pytest.approx(prob.value, rel=1e-6)
        assert np.linalg.norm(p - D @ a_hat) <= eps * (1 + 1e-6)


def test_well_conditioned_batch_uses_proximal_path_and_agrees():
    rng = np.random.default_rng(3)
    D = rng.standard_normal((30, 6)) + 1j * rng.standard_normal((30, 6))
    D /= np.linalg.norm(D, axis=0)
    p = D @ np.array([1, 0, 0, 0.5j, 0, 0]) + 0.02 * rng.standard_normal(30)
    G, c = (D.conj().T @ D)[None], (D.conj().T @ p)[None]
    pp = np.array([np.vdot(p, p).real])
    eps = 0.02 * math.sqrt(30)
    a_prox, _ = bpdn_batch(G, c, pp, eps)
    a_conic, _ = bpdn_batch(G, c, pp, eps, cond_limit=0.0)
    assert np.abs(a_prox).sum() == pytest.approx(np.abs(a_conic).sum(), rel=1e-6)


def test_objective_non_increasing_in_epsilon():
    rng = np.random.default_rng(5)
    D, _, _, p, eps = random_instance(rng)
    l1 = [np.abs(bpdn_solve(D, p, e)).sum() for e in (eps, 1.5 * eps, 3 * eps, 10 * eps)]
    assert all(b <= a * (1 + 1e-7) for a, b in zip(l1, l1[1:]))


@pytest.mark.parametrize("scale", [1e-4, 0.3, 7.0, 1e5])
def test_scale_equivariance(scale):
    rng = np.random.default_rng(9)
    D, _, _, p, eps = random_instance(rng)
    a1 = bpdn_solve(D, p, eps)
    a2 = bpdn_solve(D, scale * p, scale * eps)
    assert np.abs(a2).sum() == pytest.approx(scale * np.abs(a1).sum(), rel=1e-6)


def test_bpdn_is_deterministic():
    rng = np.random.default_rng(11)
    D, _, _, p, eps = random_instance(rng)
    assert np.array_equal(bpdn_solve(D, p, eps), bpdn_solve(D, p, eps))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.2, 3.0))
def test_returned_amplitudes_are_feasible(seed, factor):
    rng = np.random.default_rng(seed)
    D, _, _, p, eps = random_instance(rng, n=6, m=10, k=2, noise=0.05)
    a = bpdn_solve(D, p, factor * eps)
    if a is not None:
        assert np.linalg.norm(p - D @ a) <= factor * eps * (1 + 1e-6)


# -- candidate dictionaries ------------------------------------------------------


def test_batched_dictionaries_match_canonical_sets(scenario, grid, band):
    env = scenario.env.without_halfspace()
    f = scenario.source.frequency
    fac = _DictionaryFactory(env, grid, f, band, scenario.array.depths)
    anchors = np.array([2.12, 2.3, 2.41, 2.45, 2.52])
    used, xis, psi = fac.build(anchors)
    for b, x in enumerate(used):
        ref = candidate_mode_set(env, grid, f, x, band)
        m = ref.M
        assert np.all(np.isnan(xis[b, m:]))
        assert np.allclose(xis[b, :m], ref.wavenumbers, rtol=0, atol=1e-9)
        samp = sample_at_depths(ref, scenario.array.depths)
        signs = np.sign(np.sum(samp * psi[b, :, :m], axis=0))
        assert np.allclose(psi[b, :, :m] * signs, samp, atol=1e-7)


# -- mode estimation -------------------------------------------------------------


@pytest.fixture(scope="module")
def noisy_30db(scenario):
    tr = truth_field(scenario)
    snap = add_noise(tr.clean, 30.0, 0)
    cfg = solver_config(snap, scenario, PipelineOptions())
    est = estimate_modes(snap, scenario.env, cfg, scenario.grid())
    return tr, snap, cfg, est


def test_estimate_contract(noisy_30db):
    _, snap, cfg, est = noisy_30db
    D = sample_at_depths(est.modes, snap.depths)
    assert np.linalg.norm(snap.pressure - D @ est.amplitudes) <= cfg.epsilon_n * (1 + 1e-6)
    assert est.residual_l2 <= cfg.epsilon_n * (1 + 1e-6)
    assert est.l1_norm == pytest.approx(np.abs(est.amplitudes).sum(), rel=1e-14)
    xs = [x for x, _ in est.objective_trace[: cfg.coarse_grid_points]]
    assert np.allclose(xs, np.linspace(*cfg.band, cfg.coarse_grid_points))
    assert len(est.objective_trace) > cfg.coarse_grid_points
    assert est.modes.kind == "candidate"


def test_leading_wavenumbers_at_30_db(noisy_30db):
    tr, _, _, est = noisy_30db
    err = np.abs(est.wavenumbers[:5] - tr.modes.wavenumbers[:5])
    assert np.all(err <= 1e-3)


def test_estimation_is_deterministic(scenario, noisy_30db):
    _, snap, cfg, est = noisy_30db
    again = estimate_modes(snap, scenario.env, cfg, scenario.grid())
    assert again.anchor_xi == est.anchor_xi
    assert np.array_equal(again.amplitudes, est.amplitudes)
    assert again.objective_trace == est.objective_trace


def test_pure_noise_with_large_epsilon_is_degenerate(scenario, band):
    rng = np.random.default_rng(4)
    n = scenario.array.N
    w = 1e-3 * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    snap = PressureSnapshot(596.0, scenario.array.depths, w, noise_sigma=1e-3)
    cfg = SolverConfig(2 * float(np.linalg.norm(w)), band, coarse_grid_points=50)
    est = estimate_modes(snap, scenario.env, cfg, scenario.grid())
    assert est.degenerate
    assert np.all(est.amplitudes == 0)


def test_all_infeasible_raises(scenario, band):
    tr = truth_field(scenario)
    cfg = SolverConfig(1e-15, band, coarse_grid_points=50)
    with pytest.raises(EstimationError, match="epsilon_n too small"):
        estimate_modes(tr.clean, scenario.env, cfg, scenario.grid())


def test_solver_config_validation(band):
    with pytest.raises(ValueError):
        SolverConfig(0.0, band)
    with pytest.raises(ValueError):
        SolverConfig(1e-3, band, coarse_grid_points=5)
    with pytest.raises(ValueError):
        SolverConfig(1e-3, (2.5, 2.1))


@pytest.fixture(scope="module")
def in_dictionary(scenario, grid, band):
    """Noise-free field generated by a candidate set, so the truth lies in the dictionary."""
    env = scenario.env.without_halfspace()
    truth = truth_field(scenario)
    gen = candidate_mode_set(env, grid, 596.0, float(truth.modes.wavenumbers[0]), band)
    rng = np.random.default_rng(21)
    amps = rng.uniform(0.2, 1.0, gen.M) * np.exp(2j * np.pi * rng.uniform(size=gen.M))
    clean = synthesize_pressure(gen, amps, scenario.array, 596.0)
    return gen, amps, clean


def test_anchored_amplitude_ratios_in_dictionary(scenario, band, in_dictionary):
    gen, amps, clean = in_dictionary
    cfg = SolverConfig(1e-12, band)
    est = estimate_at_anchor(clean, scenario.env, cfg, float(gen.anchor_xi), scenario.grid())
    assert est.modes.M == gen.M
    r_hat = np.abs(est.amplitudes) / abs(est.amplitudes[0])
    r = np.abs(amps) / abs(amps[0])
    assert np.max(np.abs(r_hat - r)) <= 1e-6


def test_anchored_amplitude_ratios_noise_free_truth(scenario, band):
    tr = truth_field(scenario)
    cfg = solver_config(tr.clean, scenario, PipelineOptions())
    est = estimate_at_anchor(tr.clean, scenario.env, cfg, float(tr.modes.wavenumbers[0]), scenario.grid())
    m = min(est.modes.M, tr.modes.M)
    r_hat = np.abs(est.amplitudes[:m]) / abs(est.amplitudes[0])
    r = np.abs(tr.amplitudes[:m]) / abs(tr.amplitudes[0])
    assert np.max(np.abs(r_hat - r)) <= 1e-6


def test_objective_minimum_near_generating_set(scenario, band, in_dictionary):
    gen, _, clean = in_dictionary
    # epsilon must sit below the residual of a one-cell anchor shift, or the
    # landscape is flat across the neighbouring feasible anchors
    cfg = SolverConfig(3e-4 * np.linalg.norm(clean.pressure), band)
    est = estimate_modes(clean, scenario.env, cfg, scenario.grid())
    xs, J = np.array(est.objective_trace[: cfg.coarse_grid_points]).T
    cell = xs[1] - xs[0]
    assert np.min(np.abs(gen.wavenumbers - xs[np.argmin(J)])) <= cell


def test_objective_minimum_near_true_wavenumber_noise_free(scenario):
    tr = truth_field(scenario)
    cfg = solver_config(tr.clean, scenario, PipelineOptions())
    est = estimate_modes(tr.clean, scenario.env, cfg, scenario.grid())
    xs, J = np.array(est.objective_trace[: cfg.coarse_grid_points]).T
    cell = xs[1] - xs[0]
    x0 = xs[np.argmin(J)]
    assert np.min(np.abs(tr.modes.wavenumbers - x0)) <= cell


def test_subset_array_geometry(scenario, band):
    sc_array = ArrayGeometry.uniform(2.0, 2.0, 12)
    tr = truth_field(scenario)
    snap = synthesize_pressure(tr.modes, tr.amplitudes, sc_array, 596.0)
    snap = add_noise(snap, 30.0, 1)
    cfg = SolverConfig(epsilon_from_noise(snap), band, coarse_grid_points=400)
    est = estimate_modes(snap, scenario.env, cfg, scenario.grid())
    assert est.residual_l2 <= cfg.epsilon_n * (1 + 1e-6)
