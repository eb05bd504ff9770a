import math

import numpy as np
import pytest

from resilient_mas import linalg_control as lc
from resilient_mas.attacks import AttackProfile
from resilient_mas.errors import NonFiniteState, SingularPsiSum, TooFewSamples
from resilient_mas.scenario import reference_scenario
from resilient_mas.simulator import (
    classify_uub,
    compensator_error,
    containment_error,
    default_leader_states,
    hull_weights,
    integrate_rk4,
    lyapunov_diagnostic,
    observer_containment_error,
    simulate,
    simulate_many,
    synthesize,
)
from resilient_mas.topology import build_topology, psi_matrices

from conftest import S


# --- integrator ------------------------------------------------------------

def decay_error(dt):
    traj = integrate_rk4(lambda t, y: -y, [1.0], dt, 1.0, store_every=1)
    return abs(traj.states[-1, 0] - math.exp(-1.0))


def test_rk4_exponential_decay():
    traj = integrate_rk4(lambda t, y: -y, [1.0], 0.1, 1.0, store_every=1)
    assert traj.times[-1] == pytest.approx(1.0)
    assert len(traj.times) == 11
    assert decay_error(0.1) < 1e-6


def test_rk4_fourth_order():
    ratio = decay_error(0.1) / decay_error(0.05)
    assert 12 <= ratio <= 20


def test_rk4_constant():
    traj = integrate_rk4(lambda t, y: np.zeros_like(y), [3.0, -1.0], 0.25, 5.0, store_every=3)
    np.testing.assert_array_equal(traj.states, np.tile([3.0, -1.0], (len(traj.times), 1)))
    assert traj.times[-1] == 5.0  # the final sample is kept even off the stride


def test_rk4_leader_orbit_closes():
    traj = integrate_rk4(lambda t, y: S @ y, [1.0, 0.0], 2 * math.pi / 4000, 2 * math.pi)
    np.testing.assert_allclose(traj.states[-1], [1.0, 0.0], atol=1e-6)


def test_rk4_uses_time_argument():
    traj = integrate_rk4(lambda t, y: np.array([t]), [0.0], 0.01, 2.0)
    assert traj.states[-1, 0] == pytest.approx(2.0, abs=1e-12)


def test_rk4_nonfinite_aborts():
    with pytest.raises(NonFiniteState) as info:
        with np.errstate(over="ignore", invalid="ignore"):
            integrate_rk4(lambda t, y: y * y, [1.0], 0.1, 5.0)
    assert info.value.t < 5.0


def test_rk4_bad_step():
    with pytest.raises(ValueError):
        integrate_rk4(lambda t, y: y, [1.0], 0.0, 1.0)


# --- containment metrics ---------------------------------------------------

def two_follower_psi(M=1):
    pins = [(1, 1, 1.0)] if M == 1 else [(1, 1, 1.0), (2, 2, 1.0)]
    return psi_matrices(build_topology(2, M, [(1, 2, 1.0), (2, 1, 1.0)], pins))[0]


def test_containment_single_leader_is_tracking_error(rng):
    psi = two_follower_psi()
    x = rng.normal(size=4)
    leader = rng.normal(size=(1, 2))
    np.testing.assert_allclose(containment_error(x, leader, psi), x - np.tile(leader[0], 2), atol=1e-14)


def test_containment_zero_at_hull_point(rng):
    psi = two_follower_psi(M=2)
    leaders = rng.normal(size=(2, 3))
    hull = hull_weights(psi) @ leaders
    np.testing.assert_allclose(containment_error(hull.ravel(), leaders, psi), 0.0, atol=1e-14)
    np.testing.assert_allclose(compensator_error(hull, leaders, psi), 0.0, atol=1e-14)


def test_hull_weights_are_convex(reference_config):
    W = hull_weights(psi_matrices(reference_config.topology)[0])
    np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-12)
    assert (W >= -1e-12).all()


def test_observer_error_equals_state_error_when_equal(rng):
    psi = two_follower_psi(M=2)
    x, leaders = rng.normal(size=4), rng.normal(size=(2, 2))
    np.testing.assert_array_equal(observer_containment_error(x, leaders, psi), containment_error(x, leaders, psi))


def test_singular_psi_sum():
    with pytest.raises(SingularPsiSum):
        hull_weights([np.zeros((2, 2))])


def test_lyapunov_diagnostic_examples():
    assert lyapunov_diagnostic(np.zeros(2), np.zeros(2), np.eye(4)) == 0.0
    assert lyapunov_diagnostic([1.0, 0.0], [1.0, 0.0], np.eye(4)) == 2.0


# --- classifier ------------------------------------------------------------

def test_classify_constant_bounded():
    t = np.linspace(0, 44, 441)
    v = classify_uub(t, np.full_like(t, 0.01))
    assert v.verdict == "bounded"
    assert v.tail_sup == pytest.approx(0.01)
    assert v.growth_rate == pytest.approx(0.0, abs=1e-12)


def test_classify_ramp_divergent():
    t = np.linspace(0, 44, 441)
    v = classify_uub(t, t.copy())
    assert v.verdict == "divergent"
    assert v.growth_rate == pytest.approx(1.0)
    assert v.criterion


def test_classify_decaying_oscillation_bounded():
    t = np.linspace(0, 44, 4401)
    v = classify_uub(t, 1.0 + 0.5 * np.abs(np.sin(3 * t)) + 5 * np.exp(-t))
    assert v.bounded


def test_classify_too_few_samples():
    with pytest.raises(TooFewSamples):
        classify_uub(np.arange(9.0), np.arange(9.0))


# --- closed loop -----------------------------------------------------------

def test_default_leader_states():
    np.testing.assert_allclose(default_leader_states(4, 2), [[0, 1], [-1, 0], [0, -1], [1, 0]], atol=1e-15)


def test_reference_resilient_trace_shapes(resilient_trace):
    tr = resilient_trace
    K = len(tr.times)
    assert K == 4401
    np.testing.assert_allclose(np.diff(tr.times), 0.01, atol=1e-12)
    for arr in (tr.x, tr.x_hat, tr.xi, tr.ds_hat, tr.psi, tr.e, tr.e_hat, tr.eta, tr.eps):
        assert arr.shape == (K, 6, 2) and np.isfinite(arr).all()
    assert tr.chi.shape == tr.V.shape == (K, 6)
    assert tr.u.shape == tr.da_hat.shape == (K, 6)
    assert tr.leaders.shape == (K, 4, 2)


def test_error_decomposition(resilient_trace):
    tr = resilient_trace
    np.testing.assert_allclose(tr.e, (tr.x - tr.x_hat) + tr.e_hat, atol=1e-9, rtol=0)


def test_psi_identity(resilient_trace):
    tr = resilient_trace
    resid = tr.psi - (tr.x - tr.x_hat) - (tr.ds - tr.ds_hat)
    assert np.abs(resid).max() < 1e-9


def test_chi_monotone_and_estimate_bounded(resilient_trace):
    tr = resilient_trace
    assert (np.diff(tr.chi, axis=0) >= 0).all()
    assert (np.abs(tr.da_hat) <= tr.chi + 1e-12).all()


def test_compensator_converges(resilient_trace):
    assert np.linalg.norm(resilient_trace.eta[-1]) < 1e-3


def test_lyapunov_tail_finite(resilient_trace):
    tail = resilient_trace.V[resilient_trace.times >= 35.0]
    assert np.isfinite(tail).all() and (tail >= 0).all()


def test_resilient_bounded_and_conventional_divergent(resilient_trace, conventional_trace):
    assert all(v.bounded for v in resilient_trace.classify())
    assert not any(v.bounded for v in conventional_trace.classify())
    # observers are frozen in conventional mode
    assert not conventional_trace.x_hat.any() and not conventional_trace.chi.any()


def test_step_halving(resilient_trace, resilient_trace_half_dt):
    a, b = resilient_trace, resilient_trace_half_dt
    np.testing.assert_array_equal(a.times, b.times)
    rel = np.linalg.norm(a.e[-1] - b.e[-1]) / np.linalg.norm(a.e[-1])
    assert rel < 1e-2


def test_attack_free_baseline_from_random_states(attack_free_config, rng):
    cfg = attack_free_config
    x0 = rng.normal(size=(cfg.N, cfg.n))
    x0 *= rng.uniform(0, 1, (cfg.N, 1)) / np.linalg.norm(x0, axis=1, keepdims=True)
    cfg = reference_scenario(attacks=cfg.attacks, x0=x0)
    tr = simulate(cfg, mode="conventional")
    assert np.linalg.norm(tr.e[-1]) < 1e-2


def test_consistent_observers_reproduce_conventional_input(attack_free_config, rng):
    x0 = rng.uniform(-1, 1, (6, 2))
    cfg = reference_scenario(attacks=attack_free_config.attacks, x0=x0, x_hat0=x0.copy())
    tr = simulate(cfg, mode="resilient", T=5.0)
    assert np.abs(tr.psi).max() < 1e-12
    assert np.abs(tr.da_hat).max() < 1e-12
    gains = synthesize(cfg)
    conv_u = np.stack([tr.x[:, i] @ gains[i].K.T + tr.xi[:, i] @ gains[i].H.T for i in range(6)], axis=1)[..., 0]
    np.testing.assert_allclose(tr.u, conv_u, atol=1e-10)


def test_consensus_manifold_invariant(attack_free_config):
    v = np.array([0.7, -0.2])
    cfg = reference_scenario(attacks=attack_free_config.attacks, leader_x0=np.tile(v, (4, 1)),
                         xi0=np.tile(v, (6, 1)))
    tr = simulate(cfg, mode="conventional", T=10.0)
    assert np.abs(tr.eta).max() <= 1e-9


def test_compensator_gain_below_minimum_does_not_decay():
    # unstable leader and a coupling gain under the threshold
    S_unstable = np.eye(2) * 0.5
    psi_sum = np.array([[2.0, -1.0], [-1.0, 1.0]])
    c_min = lc.min_coupling_gain(S_unstable, psi_sum)
    assert c_min > 0
    for c, decays in ((0.5 * c_min, False), (2.0 * c_min, True)):
        Acl = lc.compensator_matrix(S_unstable, psi_sum, c)
        traj = integrate_rk4(lambda t, y: Acl @ y, np.ones(4), 0.01, 20.0)
        assert (np.linalg.norm(traj.states[-1]) < 1e-3) == decays


def test_simulate_many_matches_sequential(reference_config):
    cfg = reference_scenario(T=1.0)
    jobs = [(cfg, "conventional"), (cfg, "resilient")]
    par = simulate_many(jobs, max_workers=2)
    seq = simulate_many(jobs, max_workers=1)
    for a, b in zip(par, seq):
        assert a.mode == b.mode
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.chi, b.chi)


def test_staged_attack_leaves_early_trace_clean(attack_free_config):
    base = reference_scenario(attacks=attack_free_config.attacks, T=4.0)
    staged_profile = reference_scenario().attacks
    staged = reference_scenario(attacks=AttackProfile(staged_profile.sensor, staged_profile.actuator, t_on=2.0), T=4.0)
    a = simulate(base, mode="conventional")
    b = simulate(staged, mode="conventional")
    early = a.times < 2.0  # the step ending at t_on already sees the attack in its last stage
    np.testing.assert_allclose(a.x[early], b.x[early], atol=1e-12)
    assert np.abs(a.x[-1] - b.x[-1]).max() > 1e-3
