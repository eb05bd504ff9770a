"""Dense control-synthesis kernel.

Continuous algebraic Riccati equation (CARE)::

    A'P + PA + Q - P B R^-1 B' P = 0

solved through the stable invariant subspace of the Hamiltonian

    [[ A, -B R^-1 B'],
     [-Q, -A'       ]]

followed by Newton-Kleinman refinement. Also covers the regulator equation
``S = A + B Gamma``, the feedback/feedforward gains built from them, and the
augmented (2n) system used to certify the observer-based design.

All functions are pure and operate on small dense ``numpy`` arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    Lemma1Violated,
    NoStableSubspace,
    NonPositiveDegree,
    NotStabilizable,
    Unsolvable,
    VerificationFailed,
)

EIG_TOL = 1e-9
CARE_TOL = 1e-8
REGULATOR_TOL = 1e-10
OBSERVER_WEIGHT_MARGIN = 0.01
COUPLING_MARGIN = 1e-6


def _as_matrix(a, name: str) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(a, dtype=float))
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be a matrix, got shape {arr.shape}")
    return arr


def _check_square(a: np.ndarray, name: str) -> int:
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    return a.shape[0]


def _check_spd(a: np.ndarray, name: str) -> None:
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise ValueError(f"{name} must be symmetric")
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise ValueError(f"{name} must be positive-definite") from None


@dataclass(frozen=True, eq=False)
class LtiAgent:
    """Follower plant ``x' = A x + B u``."""

    A: np.ndarray
    B: np.ndarray
    id: int = 0

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        n = _check_square(A, "A")
        if B.ndim != 2 or B.shape[0] != n or B.shape[1] < 1:
            raise DimensionMismatch(f"B must be {n}xm with m >= 1, got {B.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True, eq=False)
class LeaderExosystem:
    """Autonomous leader dynamics ``x_k' = S x_k`` shared by all leaders."""

    S: np.ndarray

    def __post_init__(self):
        S = _as_matrix(self.S, "S")
        _check_square(S, "S")
        object.__setattr__(self, "S", S)

    @property
    def n(self) -> int:
        return self.S.shape[0]

    def satisfies_assumption2(self, tol: float = EIG_TOL) -> bool:
        """True when no eigenvalue of ``S`` lies strictly in the left half-plane."""
        return bool(np.linalg.eigvals(self.S).real.min() >= -tol)


@dataclass(eq=False)
class GainSet:
    """Synthesized quantities of one follower."""

    P: np.ndarray
    K: np.ndarray
    Gamma: np.ndarray
    H: np.ndarray
    M: np.ndarray
    P_aug: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    c: float
    care_residual: float = field(default=np.nan)
    regulator_residual: float = field(default=np.nan)
    hurwitz_margin: float = field(default=np.nan)


# --- elementary checks -----------------------------------------------------

def is_hurwitz(A, tol: float = EIG_TOL) -> bool:
    A = _as_matrix(A, "A")
    _check_square(A, "A")
    return bool(np.linalg.eigvals(A).real.max() < -tol)


def hurwitz_margin(A) -> float:
    """Distance of the rightmost eigenvalue from the imaginary axis (positive when stable)."""
    return float(-np.linalg.eigvals(_as_matrix(A, "A")).real.max())


def is_stabilizable(A, B, tol: float = EIG_TOL) -> bool:
    """PBH test restricted to the eigenvalues with ``Re >= -tol``."""
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if lam.real >= -tol:
            mat = np.hstack([A - lam * np.eye(n), B])
            if np.linalg.matrix_rank(mat) < n:
                return False
    return True


def care_residual(A, B, Q, R, P) -> float:
    A, B, Q, R, P = (np.atleast_2d(np.asarray(v, dtype=float)) for v in (A, B, Q, R, P))
    res = A.T @ P + P @ A + Q - P @ B @ np.linalg.solve(R, B.T) @ P
    return float(np.linalg.norm(res, "fro"))


# --- Riccati ---------------------------------------------------------------

def _hamiltonian_solution(A, G, Q, n):
    Ham = np.block([[A, -G], [-Q, -A.T]])
    eig = np.linalg.eigvals(Ham)
    scale = max(1.0, np.abs(eig).max())
    if np.abs(eig.real).min() <= 1e-10 * scale:
        raise NoStableSubspace("Hamiltonian has eigenvalues on the imaginary axis")
    T, U, sdim = sla.schur(Ham, output="real", sort="lhp")
    if sdim != n:
        raise NoStableSubspace(f"stable subspace has dimension {sdim}, expected {n}")
    U11, U21 = U[:n, :n], U[n:, :n]
    if np.linalg.cond(U11) > 1e12:
        raise NoStableSubspace("stable subspace basis is not a graph over the state space")
    P = np.linalg.solve(U11.T, U21.T).T
    return 0.5 * (P + P.T)


def solve_care(A, B, Q, R, *, max_newton: int = 20) -> np.ndarray:
    """Stabilizing solution ``P`` of the continuous algebraic Riccati equation.

    The Hamiltonian estimate is refined by Newton-Kleinman iterations until the
    Frobenius residual stops improving; the best iterate is returned.

    Raises
    ------
    NotStabilizable
        ``(A, B)`` fails the PBH test on an eigenvalue with ``Re >= 0``.
    NoStableSubspace
        The Hamiltonian has imaginary-axis eigenvalues.
    ConvergenceFailure
        Refinement cannot bring the residual below ``1e-8``.
    """
    A = _as_matrix(A, "A")
    n = _check_square(A, "A")
    B = np.asarray(B, dtype=float)
    B = B.reshape(-1, 1) if B.ndim == 1 else _as_matrix(B, "B")
    Q = _as_matrix(Q, "Q")
    R = _as_matrix(R, "R")
    m = B.shape[1]
    if B.shape[0] != n or Q.shape != (n, n) or R.shape != (m, m):
        raise DimensionMismatch(
            f"inconsistent shapes A{A.shape} B{B.shape} Q{Q.shape} R{R.shape}")
    _check_spd(Q, "Q")
    _check_spd(R, "R")
    if not is_stabilizable(A, B):
        raise NotStabilizable("(A, B) is not stabilizable")

    G = B @ np.linalg.solve(R, B.T)
    G = 0.5 * (G + G.T)
    P = _hamiltonian_solution(A, G, Q, n)
    best, best_res = P, care_residual(A, B, Q, R, P)
    scale = max(1.0, np.linalg.norm(Q, "fro"), np.linalg.norm(P, "fro"))

    for _ in range(max_newton):
        if best_res <= 1e-14 * scale:
            break
        Ac = A - G @ P
        if not is_hurwitz(Ac):
            break
        # (A - G P_k)' P + P (A - G P_k) = -(Q + P_k G P_k)
        P_next = sla.solve_continuous_lyapunov(Ac.T, -(Q + P @ G @ P))
        P_next = 0.5 * (P_next + P_next.T)
        res = care_residual(A, B, Q, R, P_next)
        if not np.isfinite(res) or res >= best_res:
            break
        P, best, best_res = P_next, P_next, res

    if best_res >= CARE_TOL:
        raise ConvergenceFailure(f"CARE residual {best_res:.3e} after refinement")
    if not is_hurwitz(A - G @ best):
        raise ConvergenceFailure("refined solution is not stabilizing")
    return best


def synthesize_feedback_gain(P, B, R) -> np.ndarray:
    """``K = -R^-1 B' P``."""
    P = _as_matrix(P, "P")
    B = np.asarray(B, dtype=float)
    B = B.reshape(-1, 1) if B.ndim == 1 else B
    R = _as_matrix(R, "R")
    if P.shape[0] != P.shape[1] or B.shape[0] != P.shape[0] or R.shape != (B.shape[1],) * 2:
        raise DimensionMismatch(f"P{P.shape} B{B.shape} R{R.shape}")
    return -np.linalg.solve(R, B.T @ P)


def solve_regulator(A, B, S, tol: float = REGULATOR_TOL) -> np.ndarray:
    """Solve ``S = A + B Gamma`` for ``Gamma`` by column-wise least squares.

    Raises :class:`Unsolvable` when the residual ``||A + B Gamma - S||_F`` is
    not below ``tol``, i.e. ``S - A`` leaves the column span of ``B``.
    """
    A = _as_matrix(A, "A")
    S = _as_matrix(S, "S")
    B = np.asarray(B, dtype=float)
    B = B.reshape(-1, 1) if B.ndim == 1 else B
    if A.shape != S.shape or B.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"A{A.shape} B{B.shape} S{S.shape}")
    Gamma, *_ = np.linalg.lstsq(B, S - A, rcond=None)
    residual = regulator_residual(A, B, S, Gamma)
    if residual >= tol:
        raise Unsolvable(f"regulator residual {residual:.3e} >= {tol:g}")
    return Gamma


def regulator_residual(A, B, S, Gamma) -> float:
    return float(np.linalg.norm(np.asarray(A) + np.asarray(B) @ np.asarray(Gamma) - np.asarray(S), "fro"))


def synthesize_feedforward_gain(Gamma, K) -> np.ndarray:
    """``H = Gamma - K``."""
    Gamma = np.atleast_2d(np.asarray(Gamma, dtype=float))
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if Gamma.shape != K.shape:
        raise DimensionMismatch(f"Gamma{Gamma.shape} vs K{K.shape}")
    return Gamma - K


# --- augmented observer-error system ---------------------------------------

@dataclass(frozen=True, eq=False)
class AugmentedSystem:
    A: np.ndarray
    B: np.ndarray
    E: np.ndarray
    C: np.ndarray
    K: np.ndarray

    def __iter__(self):
        return iter((self.A, self.B, self.E, self.C, self.K))


def build_augmented_system(agent: LtiAgent, K, d_i: float) -> AugmentedSystem:
    """Block matrices acting on ``[psi; sensor-attack estimation error]``."""
    if not d_i > 0:
        raise NonPositiveDegree(f"in-degree must be positive, got {d_i}")
    A, B = agent.A, agent.B
    n, m = agent.n, agent.m
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape != (m, n):
        raise DimensionMismatch(f"K must be {m}x{n}, got {K.shape}")
    I = np.eye(n)
    Z = np.zeros((n, n))
    A_aug = np.block([[A, -(A + d_i * I)], [Z, -d_i * I]])
    B_aug = np.vstack([B, np.zeros((n, m))])
    E = np.vstack([-I, -I])
    C_aug = np.hstack([I, -I])
    K_aug = np.hstack([K, np.zeros((m, n))])
    return AugmentedSystem(A_aug, B_aug, E, C_aug, K_aug)


def augmented_weight(P, A, d_i: float, Q, M) -> np.ndarray:
    """``[[Q, PA + dP], [A'P + dP, 2 d M]]``."""
    P, A, Q, M = (np.atleast_2d(np.asarray(v, dtype=float)) for v in (P, A, Q, M))
    X = P @ A + d_i * P
    return np.block([[Q, X], [X.T, 2.0 * d_i * M]])


def select_observer_weight(P, A, d_i: float, Q, margin: float = OBSERVER_WEIGHT_MARGIN) -> np.ndarray:
    """Scaled identity ``M = beta I`` that makes the augmented weight SPD.

    ``beta = max(1, sigma_max(PA + dP)^2 / (2 d sigma_min(Q)) * (1 + margin))``.
    """
    if not d_i > 0:
        raise NonPositiveDegree(f"in-degree must be positive, got {d_i}")
    P, A, Q = (np.atleast_2d(np.asarray(v, dtype=float)) for v in (P, A, Q))
    X = P @ A + d_i * P
    s_max = np.linalg.svd(X, compute_uv=False).max()
    s_min_q = np.linalg.svd(Q, compute_uv=False).min()
    beta = max(1.0, s_max**2 / (2.0 * d_i * s_min_q) * (1.0 + margin))
    M = beta * np.eye(P.shape[0])
    Qa = augmented_weight(P, A, d_i, Q, M)
    if np.linalg.eigvalsh(0.5 * (Qa + Qa.T)).min() <= 0:
        raise VerificationFailed("augmented weight is not positive-definite")
    return M


def verify_augmented_riccati(P_aug, A_aug, B_aug, Q_aug, R) -> float:
    """Frobenius residual of the augmented Riccati equation."""
    P_aug, A_aug, Q_aug = (np.atleast_2d(np.asarray(v, dtype=float)) for v in (P_aug, A_aug, Q_aug))
    B_aug = np.asarray(B_aug, dtype=float)
    B_aug = B_aug.reshape(-1, 1) if B_aug.ndim == 1 else B_aug
    R = np.atleast_2d(np.asarray(R, dtype=float))
    k = P_aug.shape[0]
    if (P_aug.shape != (k, k) or A_aug.shape != (k, k) or Q_aug.shape != (k, k)
            or B_aug.shape[0] != k or R.shape != (B_aug.shape[1],) * 2):
        raise DimensionMismatch(
            f"P{P_aug.shape} A{A_aug.shape} B{B_aug.shape} Q{Q_aug.shape} R{R.shape}")
    return care_residual(A_aug, B_aug, Q_aug, R, P_aug)


# --- coupling gain ---------------------------------------------------------

def min_coupling_gain(S, psi_sum) -> float:
    """Smallest coupling gain making ``I (x) S - c PsiSum (x) I`` Hurwitz (any c above it works)."""
    s_re = np.linalg.eigvals(_as_matrix(S, "S")).real.max()
    if abs(s_re) <= EIG_TOL:
        s_re = 0.0
    psi_re = np.linalg.eigvals(_as_matrix(psi_sum, "PsiSum")).real.min()
    if psi_re <= 0:
        raise Lemma1Violated(f"PsiSum has an eigenvalue with real part {psi_re:.3e} <= 0")
    return max(0.0, s_re / psi_re) * (1.0 + COUPLING_MARGIN)


def compensator_matrix(S, psi_sum, c: float) -> np.ndarray:
    """System matrix of the compensator containment error, ``I_N (x) S - c PsiSum (x) I_n``."""
    S = _as_matrix(S, "S")
    psi_sum = _as_matrix(psi_sum, "PsiSum")
    return np.kron(np.eye(psi_sum.shape[0]), S) - c * np.kron(psi_sum, np.eye(S.shape[0]))


# --- full per-follower pipeline --------------------------------------------

def synthesize_gains(agent: LtiAgent, S, Q, R, d_i: float, c: float) -> GainSet:
    """Run the whole design chain for one follower and verify every invariant."""
    S = _as_matrix(S, "S")
    if S.shape != agent.A.shape:
        raise DimensionMismatch(f"S{S.shape} vs A{agent.A.shape}")
    Q = _as_matrix(Q, "Q")
    R = _as_matrix(R, "R")
    P = solve_care(agent.A, agent.B, Q, R)
    K = synthesize_feedback_gain(P, agent.B, R)
    Gamma = solve_regulator(agent.A, agent.B, S)
    H = synthesize_feedforward_gain(Gamma, K)
    M = select_observer_weight(P, agent.A, d_i, Q)
    n = agent.n
    P_aug = np.block([[P, np.zeros((n, n))], [np.zeros((n, n)), M]])
    closed = agent.A + agent.B @ K
    if not is_hurwitz(closed):
        raise VerificationFailed(f"A + BK of follower {agent.id} is not Hurwitz")
    return GainSet(
        P=P, K=K, Gamma=Gamma, H=H, M=M, P_aug=P_aug, Q=Q, R=R, c=float(c),
        care_residual=care_residual(agent.A, agent.B, Q, R, P),
        regulator_residual=regulator_residual(agent.A, agent.B, S, Gamma),
        hurwitz_margin=hurwitz_margin(closed),
    )
