import math

import numpy as np
import pytest

from resilient_mas import controllers as ctl
from resilient_mas.attacks import actuator_attack, sensor_attack
from resilient_mas.simulator import assemble_closed_loop, synthesize

from conftest import A12, B12, S

K1 = np.array([[2.158090, -2.320779]])
H1 = np.array([[-3.158090, 3.320779]])


def test_rho_examples():
    params = ctl.ResilienceParams(mu=[2.0])
    assert ctl.rho(0.0, params) == 1.0
    assert ctl.rho(44.0, params) == pytest.approx(math.exp(-0.44), rel=1e-15)
    assert ctl.rho(44.0, params) == pytest.approx(0.6440, abs=1e-4)
    assert ctl.rho(1e6, params) == params.rho_floor
    assert params.rho_integral == pytest.approx(100.0)


def test_resilience_params_validation():
    with pytest.raises(ValueError):
        ctl.ResilienceParams(mu=[2.0, 0.0])
    with pytest.raises(ValueError):
        ctl.ResilienceParams(mu=[2.0], rho_decay=0.0)


def test_conventional_control_examples():
    assert ctl.conventional_control([0, 0], [0, 0], K1, H1) == pytest.approx([0.0])
    assert ctl.conventional_control([2.0, 3.0], [5.0, 7.0], [[1.0, 0.0]], [[0.0, 1.0]]) == pytest.approx([9.0])
    assert ctl.conventional_control([1.0, 1.0], [1.0, 1.0], K1, H1) == pytest.approx([0.0], abs=1e-3)


def test_compensator_consensus_manifold():
    v = np.array([0.4, -1.3])
    out = ctl.compensator_rhs(v, [v, v], [v], [1.0, 2.0], [0.5], S, 10.0)
    np.testing.assert_allclose(out, S @ v, atol=1e-15)


def test_compensator_single_neighbor():
    out = ctl.compensator_rhs([0.0, 0.0], [[1.0, 0.0]], [], [1.0], [], np.zeros((2, 2)), 10.0)
    np.testing.assert_array_equal(out, [10.0, 0.0])


def test_compensator_single_pin_from_leader():
    out = ctl.compensator_rhs([0.0, 0.0], [[0.0, 0.0], [0.0, 0.0]], [[1.0, 0.0]], [1.0, 1.0], [1.0], S, 10.0)
    np.testing.assert_array_equal(out, [10.0, 0.0])


def test_measurable_error_examples():
    np.testing.assert_array_equal(ctl.measurable_error([3, 4], [1, 2], [2, 2]), [0, 0])
    np.testing.assert_array_equal(ctl.measurable_error([3, 4], [1, 1], [1, 1]), [1, 2])


def test_resilient_control_examples():
    assert ctl.resilient_control([0, 0], [0, 0], [0.0], K1, H1) == pytest.approx([0.0])
    assert ctl.resilient_control([2.0, 0.0], [0, 0], [0.5], [[1.0, 0.0]], [[0.0, 0.0]]) == pytest.approx([1.5])


def test_resilient_control_cancels_exact_estimate():
    x_hat, xi, da = np.array([0.3, -0.2]), np.array([1.0, 2.0]), np.array([0.7])
    u = ctl.resilient_control(x_hat, xi, da, K1, H1)
    np.testing.assert_allclose(u + da, K1 @ x_hat + H1 @ xi, atol=1e-15)


def test_state_observer_examples():
    z = np.zeros(2)
    np.testing.assert_array_equal(ctl.state_observer_rhs(z, z, z, A12, B12, K1, H1), z)
    x_hat, xi = np.array([0.5, -1.0]), np.array([0.2, 0.9])
    np.testing.assert_allclose(ctl.state_observer_rhs(x_hat, xi, z, A12, B12, K1, H1),
                               (A12 + B12 @ K1) @ x_hat + B12 @ H1 @ xi, atol=1e-14)
    out = ctl.state_observer_rhs([1.0, 0.0], z, z, A12, B12, K1, H1)
    np.testing.assert_allclose(out, [4.158, 10.474], atol=1e-3)


def test_sensor_attack_observer_examples():
    np.testing.assert_array_equal(ctl.sensor_attack_observer_rhs([0, 0], 2.0, [(1.0, [0.0, 0.0])]), [0, 0])
    np.testing.assert_array_equal(ctl.sensor_attack_observer_rhs([1.0, 0.0], 2.0, [(1.0, [4.0, 2.0])]), [2.0, 2.0])


def test_actuator_estimate_examples():
    P, B = np.eye(1), np.eye(1)
    np.testing.assert_array_equal(ctl.actuator_attack_estimate([0.0], P, B, 5.0, 0.3), [0.0])
    assert ctl.actuator_attack_estimate([1.0], P, B, 2.0, 1.0) == pytest.approx([4.0 / 3.0])
    est = ctl.actuator_attack_estimate([2.0], P, B, 1e6, 1e-12)
    assert est == pytest.approx([1e6], rel=1e-9)


def test_actuator_estimate_norm_below_chi(rng):
    P = np.array([[2.0, 0.3], [0.3, 1.0]])
    B = rng.normal(size=(2, 2))
    for _ in range(200):
        psi, chi, rho_t = rng.normal(size=2) * 10, rng.uniform(0, 50), rng.uniform(1e-6, 1)
        assert np.linalg.norm(ctl.actuator_attack_estimate(psi, P, B, chi, rho_t)) <= chi


def test_adaptive_gain_examples():
    P = np.eye(2)
    assert ctl.adaptive_gain_rhs([0.0, 0.0], P, np.eye(2), 2.0) == 0.0
    assert ctl.adaptive_gain_rhs([1.0, 0.0], P, [[1.0], [0.0]], 2.0) == pytest.approx(2.0)
    assert ctl.adaptive_gain_rhs([3.0, 4.0], P, np.eye(2), 2.0) == pytest.approx(10.0)


# --- vectorized closed loop against the per-follower laws -------------------

def reference_rhs(cfg, gains, mode, t, y):
    """Derivative assembled one follower at a time from the controller functions."""
    N, M, n = cfg.N, cfg.M, cfg.n
    off = 0

    def take(count):
        nonlocal off
        block = y[off: off + count]
        off += count
        return block

    x = take(N * n).reshape(N, n)
    x_hat = take(N * n).reshape(N, n)
    xi = take(N * n).reshape(N, n)
    ds_hat = take(N * n).reshape(N, n)
    chi = take(N)
    lead = take(M * n).reshape(M, n)
    topo, prof = cfg.topology, cfg.attacks
    x_bar = np.array([x[i] + sensor_attack(prof, i + 1, t) for i in range(N)])
    dx, dxh, dxi, dds, dchi = (np.zeros_like(v) for v in (x, x_hat, xi, ds_hat, chi))
    for i in range(N):
        f, g = cfg.followers[i], gains[i]
        nbrs = [j - 1 for j in topo.neighbors(i + 1)]
        weights = [topo.adjacency[i, j] for j in nbrs]
        dxi[i] = ctl.compensator_rhs(xi[i], [xi[j] for j in nbrs], list(lead), weights,
                                     topo.pinning[:, i], cfg.leader.S, cfg.c)
        if mode == "conventional":
            u = ctl.conventional_control(x_bar[i], xi[i], g.K, g.H)
        else:
            psi = ctl.measurable_error(x_bar[i], x_hat[i], ds_hat[i])
            da_hat = ctl.actuator_attack_estimate(psi, g.P, f.B, chi[i], ctl.rho(t, cfg.resilience))
            u = ctl.resilient_control(x_hat[i], xi[i], da_hat, g.K, g.H)
            dxh[i] = ctl.state_observer_rhs(x_hat[i], xi[i], psi, f.A, f.B, g.K, g.H)
            terms = [(topo.adjacency[i, j], x_bar[j] - x_hat[j]) for j in nbrs]
            dds[i] = ctl.sensor_attack_observer_rhs(ds_hat[i], topo.in_degree[i], terms)
            dchi[i] = ctl.adaptive_gain_rhs(psi, g.P, f.B, cfg.resilience.mu[i])
        dx[i] = f.A @ x[i] + f.B @ (u + actuator_attack(prof, i + 1, t))
    dlead = lead @ cfg.leader.S.T
    return np.concatenate([dx.ravel(), dxh.ravel(), dxi.ravel(), dds.ravel(), dchi, dlead.ravel()])


@pytest.mark.parametrize("mode", ["conventional", "resilient"])
def test_closed_loop_matches_reference(reference_config, mode, rng):
    gains = synthesize(reference_config)
    loop = assemble_closed_loop(reference_config, gains, mode)
    for _ in range(10):
        t = float(rng.uniform(0, 44))
        y = rng.normal(size=loop.size)
        y[loop.slices["chi"]] = rng.uniform(0, 20, reference_config.N)
        if mode == "conventional":
            for key in ("x_hat", "ds_hat", "chi"):
                y[loop.slices[key]] = 0.0
        np.testing.assert_allclose(loop(t, y), reference_rhs(reference_config, gains, mode, t, y),
                                   rtol=1e-12, atol=1e-10)
