"""Per-follower control laws and observer right-hand sides.

Conventional protocol: ``u = K x_bar + H xi`` with the distributed compensator
``xi``. Resilient protocol: ``u = K x_hat + H xi - da_hat`` where the state
observer ``x_hat``, the sensor-attack observer ``ds_hat`` and the adaptive gain
``chi`` are driven by the measurable error ``psi = x_bar - x_hat - ds_hat``.

These functions act on one follower at a time and are the reference the
vectorized closed loop in :mod:`resilient_mas.simulator` is tested against.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass
class FollowerControllerState:
    x_hat: np.ndarray
    xi: np.ndarray
    ds_hat: np.ndarray
    chi: float = 0.0

    @classmethod
    def zeros(cls, n: int) -> "FollowerControllerState":
        return cls(np.zeros(n), np.zeros(n), np.zeros(n), 0.0)


@dataclass(eq=False)
class ResilienceParams:
    mu: np.ndarray                 # adaptive rate per follower
    rho_decay: float = 0.01
    rho_floor: float = 1e-12

    def __post_init__(self):
        self.mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        if (self.mu <= 0).any():
            raise ValueError("adaptive rates mu must be positive")
        if not self.rho_decay > 0:
            raise ValueError("rho_decay must be positive")
        if self.rho_floor < 0:
            raise ValueError("rho_floor must be non-negative")

    @property
    def rho_integral(self) -> float:
        return 1.0 / self.rho_decay

    def __eq__(self, other):
        if not isinstance(other, ResilienceParams):
            return NotImplemented
        return (np.array_equal(self.mu, other.mu) and self.rho_decay == other.rho_decay
                and self.rho_floor == other.rho_floor)


def rho(t: float, params: ResilienceParams) -> float:
    return max(math.exp(-params.rho_decay * t), params.rho_floor)


def conventional_control(x_bar, xi, K, H) -> np.ndarray:
    return np.asarray(K) @ np.asarray(x_bar) + np.asarray(H) @ np.asarray(xi)


def compensator_rhs(xi_i, neighbor_xi: Sequence, leader_states: Sequence, weights: Sequence,
                    pin_gains: Sequence, S, c: float) -> np.ndarray:
    """``S xi_i + c (sum_j a_ij (xi_j - xi_i) + sum_k g_ik (x_k - xi_i))``.

    ``weights[j]`` pairs with ``neighbor_xi[j]`` and ``pin_gains[k]`` with
    ``leader_states[k]``.
    """
    xi_i = np.asarray(xi_i, dtype=float)
    coupling = np.zeros_like(xi_i)
    for a, xj in zip(weights, neighbor_xi):
        coupling += a * (np.asarray(xj) - xi_i)
    for g, xk in zip(pin_gains, leader_states):
        coupling += g * (np.asarray(xk) - xi_i)
    return np.asarray(S) @ xi_i + c * coupling


def measurable_error(x_bar, x_hat, ds_hat) -> np.ndarray:
    return np.asarray(x_bar) - np.asarray(x_hat) - np.asarray(ds_hat)


def resilient_control(x_hat, xi, da_hat, K, H) -> np.ndarray:
    return np.asarray(K) @ np.asarray(x_hat) + np.asarray(H) @ np.asarray(xi) - np.asarray(da_hat)


def state_observer_rhs(x_hat, xi, psi, A, B, K, H) -> np.ndarray:
    """``(A + BK) x_hat + BH xi - BK psi``."""
    A, B, K, H = (np.atleast_2d(np.asarray(v, dtype=float)) for v in (A, B, K, H))
    return (A + B @ K) @ x_hat + B @ (H @ xi) - B @ (K @ psi)


def sensor_attack_observer_rhs(ds_hat, d_i: float, neighbor_terms) -> np.ndarray:
    """``-d_i ds_hat + sum_j a_ij (x_bar_j - x_hat_j)``.

    ``neighbor_terms`` is an iterable of ``(a_ij, x_bar_j - x_hat_j)``; the raw
    discrepancy is used, not the neighbour's ``psi_j``.
    """
    out = -d_i * np.asarray(ds_hat, dtype=float)
    for a, disc in neighbor_terms:
        out = out + a * np.asarray(disc)
    return out


def actuator_attack_estimate(psi, P, B, chi: float, rho_t: float) -> np.ndarray:
    """``B'P psi chi^2 / (||psi' P B|| chi + rho)``; its norm never exceeds ``chi``."""
    g = np.atleast_2d(B).T @ np.atleast_2d(P) @ np.asarray(psi)
    return g * chi**2 / (np.linalg.norm(g) * chi + rho_t)


def adaptive_gain_rhs(psi, P, B, mu: float) -> float:
    """``mu ||psi' P B||``."""
    return float(mu * np.linalg.norm(np.asarray(psi) @ np.atleast_2d(P) @ np.atleast_2d(B)))
