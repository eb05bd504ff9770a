"""Closed-loop assembly, fixed-step integration and containment metrics.

The packed state vector of a run is laid out as::

    [x (N n) | x_hat (N n) | xi (N n) | ds_hat (N n) | chi (N) | leaders (M n)]

Follower blocks are ordered by follower id. In conventional mode the observer
blocks ``x_hat``, ``ds_hat`` and ``chi`` stay at zero.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.linalg as sla

from . import linalg_control as lc
from .attacks import AttackProfile
from .controllers import ResilienceParams
from .errors import (
    DimensionMismatch,
    GainVerificationFailed,
    NonFiniteState,
    ResilientMasError,
    SingularPsiSum,
    TooFewSamples,
    ValidationError,
)
from .topology import DiGraphTopology, lemma1_report, psi_matrices, unreachable_followers

MODES = ("conventional", "resilient")


def default_leader_states(M: int, n: int) -> np.ndarray:
    """Leaders spread on the unit circle of the first two coordinates."""
    x0 = np.zeros((M, n))
    for k in range(1, M + 1):
        ang = 2 * math.pi * k / M
        x0[k - 1, : min(n, 2)] = [math.cos(ang), math.sin(ang)][: min(n, 2)]
    return x0


@dataclass(eq=False)
class ScenarioConfig:
    topology: DiGraphTopology
    followers: list[lc.LtiAgent]
    leader: lc.LeaderExosystem
    attacks: AttackProfile
    resilience: ResilienceParams
    Q: list[np.ndarray]
    R: list[np.ndarray]
    c: float = 10.0
    mode: str = "resilient"
    dt: float = 1e-3
    T: float = 44.0
    store_every: int = 10
    leader_x0: np.ndarray | None = None
    x0: np.ndarray | None = None
    x_hat0: np.ndarray | None = None
    xi0: np.ndarray | None = None
    ds_hat0: np.ndarray | None = None
    chi0: np.ndarray | None = None
    allow_stable_leader: bool = False

    def __post_init__(self):
        n, N, M = self.n, self.N, self.M
        self.followers = list(self.followers)
        self.Q = [np.atleast_2d(np.asarray(q, dtype=float)) for q in self.Q]
        self.R = [np.atleast_2d(np.asarray(r, dtype=float)) for r in self.R]
        if self.leader_x0 is None:
            self.leader_x0 = default_leader_states(M, n)
        for name in ("x0", "x_hat0", "xi0", "ds_hat0"):
            val = getattr(self, name)
            setattr(self, name, np.zeros((N, n)) if val is None else np.asarray(val, dtype=float).reshape(N, n))
        self.leader_x0 = np.asarray(self.leader_x0, dtype=float).reshape(M, n)
        self.chi0 = np.zeros(N) if self.chi0 is None else np.asarray(self.chi0, dtype=float).reshape(N)

    @property
    def N(self) -> int:
        return self.topology.N

    @property
    def M(self) -> int:
        return self.topology.M

    @property
    def n(self) -> int:
        return self.leader.n

    @property
    def m(self) -> list[int]:
        return [f.m for f in self.followers]

    def with_mode(self, mode: str) -> "ScenarioConfig":
        return replace(self, mode=mode)


def validate_config(config: ScenarioConfig) -> None:
    """Check dimensions, Assumptions 1-4 and numerics; raise :class:`ValidationError`."""
    N, n = config.N, config.n
    if len(config.followers) != N:
        raise ValidationError("dimensions", f"{len(config.followers)} follower models for N={N}")
    if len(config.Q) != N or len(config.R) != N:
        raise ValidationError("dimensions", "one Q and one R per follower required")
    if config.attacks.N != N or config.resilience.mu.shape != (N,):
        raise ValidationError("dimensions", "attack profiles and adaptive rates must cover every follower")
    for i, f in enumerate(config.followers, start=1):
        if f.n != n:
            raise ValidationError("dimensions", f"follower {i} has n={f.n}, leader has n={n}")
        if config.Q[i - 1].shape != (n, n) or config.R[i - 1].shape != (f.m, f.m):
            raise ValidationError("dimensions", f"Q/R shape mismatch for follower {i}")
        if config.attacks.sensor[i - 1].dim != n or config.attacks.actuator[i - 1].dim != f.m:
            raise ValidationError("dimensions", f"attack dimension mismatch for follower {i}")
    if config.mode not in MODES:
        raise ValidationError("numerics", f"mode must be one of {MODES}")
    if not config.dt > 0 or not config.T >= config.dt or config.store_every < 1:
        raise ValidationError("numerics", "need dt > 0, T >= dt and store_every >= 1")
    if not config.c > 0:
        raise ValidationError("controller", "coupling gain c must be positive")

    missing = unreachable_followers(config.topology)
    if missing:
        raise ValidationError("Assumption 1", f"no leader reaches follower(s) {missing}")
    report = lemma1_report(psi_matrices(config.topology)[1])
    if not report.spectrum_ok:
        raise ValidationError("Lemma 1", f"PsiSum min Re(eig) = {report.min_real_eig:.3e}")
    if not config.allow_stable_leader and not config.leader.satisfies_assumption2():
        re = np.linalg.eigvals(config.leader.S).real.min()
        raise ValidationError("Assumption 2", f"S has an eigenvalue with real part {re:.6g} < 0")
    for i, f in enumerate(config.followers, start=1):
        if not lc.is_stabilizable(f.A, f.B):
            raise ValidationError("Assumption 3", f"(A, B) of follower {i} is not stabilizable")
        try:
            lc.solve_regulator(f.A, f.B, config.leader.S)
        except ResilientMasError as exc:
            raise ValidationError("Assumption 4", f"follower {i}: {exc}") from None
    c_min = lc.min_coupling_gain(config.leader.S, report_psi_sum(config))
    if config.c <= c_min:
        raise ValidationError("coupling gain", f"c={config.c} does not exceed c_min={c_min:.6g}")


def report_psi_sum(config: ScenarioConfig) -> np.ndarray:
    return psi_matrices(config.topology)[1]


def synthesize(config: ScenarioConfig) -> list[lc.GainSet]:
    d = config.topology.in_degree
    return [lc.synthesize_gains(f, config.leader.S, config.Q[i], config.R[i], d[i], config.c)
            for i, f in enumerate(config.followers)]


def verify_gains(config: ScenarioConfig, gains: Sequence[lc.GainSet]) -> None:
    if len(gains) != config.N:
        raise GainVerificationFailed(f"{len(gains)} gain sets for {config.N} followers")
    for i, (f, g) in enumerate(zip(config.followers, gains), start=1):
        if g.K.shape != (f.m, f.n) or g.H.shape != (f.m, f.n) or g.P.shape != (f.n, f.n):
            raise GainVerificationFailed(f"gain shapes of follower {i} do not match its plant")
        if lc.care_residual(f.A, f.B, g.Q, g.R, g.P) >= lc.CARE_TOL:
            raise GainVerificationFailed(f"CARE residual too large for follower {i}")
        if not lc.is_hurwitz(f.A + f.B @ g.K):
            raise GainVerificationFailed(f"A + BK not Hurwitz for follower {i}")
        if np.abs(g.H + g.K - g.Gamma).max() > 1e-12:
            raise GainVerificationFailed(f"H != Gamma - K for follower {i}")


# --- closed loop -----------------------------------------------------------

class _CompiledSignals:
    """Stacked ramp/sinusoid coefficients for fast evaluation of all followers at once."""

    def __init__(self, signals, t_on: float):
        self.t_on = t_on
        self.dims = [s.dim for s in signals]
        offsets = np.concatenate([[0], np.cumsum(self.dims)])
        total = int(offsets[-1])
        self.ramp = np.concatenate([s.ramp for s in signals]) if signals else np.zeros(0)
        rows = {"sin": [], "cos": []}
        for idx, s in enumerate(signals):
            for w in s.sinusoids:
                row = np.zeros(total)
                row[offsets[idx]:offsets[idx + 1]] = w.amplitude
                rows[w.waveform].append((row, w.frequency, w.phase))
        self._parts = []
        for wave, fn in (("sin", np.sin), ("cos", np.cos)):
            if rows[wave]:
                amp = np.array([r[0] for r in rows[wave]]).T
                freq = np.array([r[1] for r in rows[wave]])
                phase = np.array([r[2] for r in rows[wave]])
                self._parts.append((fn, amp, freq, phase))
        self.active = bool(self.ramp.any() or self._parts)
        self.size = total

    def __call__(self, t: float) -> np.ndarray:
        if not self.active or t < self.t_on:
            return np.zeros(self.size)
        tau = t - self.t_on
        out = self.ramp * tau
        for fn, amp, freq, phase in self._parts:
            out = out + amp @ fn(freq * tau + phase)
        return out


class ClosedLoop:
    """Callable right-hand side of one closed-loop run."""

    def __init__(self, config: ScenarioConfig, gains: Sequence[lc.GainSet], mode: str | None = None):
        mode = config.mode if mode is None else mode
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if len(config.followers) != config.N or len(gains) != config.N:
            raise DimensionMismatch("followers, gains and topology disagree on N")
        for f in config.followers:
            if f.n != config.n:
                raise DimensionMismatch("all followers must share the leader state dimension")
        verify_gains(config, gains)
        self.config, self.gains, self.mode = config, list(gains), mode
        N, M, n = config.N, config.M, config.n
        self.N, self.M, self.n = N, M, n
        self.m = config.m
        self.Nn = N * n
        In = np.eye(n)
        topo = config.topology

        A = sla.block_diag(*[f.A for f in config.followers])
        B = sla.block_diag(*[f.B for f in config.followers])
        K = sla.block_diag(*[g.K for g in gains])
        H = sla.block_diag(*[g.H for g in gains])
        self.A, self.B, self.K, self.H = A, B, K, H
        self.BK = B @ K
        self.BH = B @ H
        self.ABK = A + self.BK
        self.BtP = sla.block_diag(*[f.B.T @ g.P for f, g in zip(config.followers, gains)])
        self.owner = np.repeat(np.arange(N), self.m)
        self.m_offsets = np.concatenate([[0], np.cumsum(self.m)[:-1]]).astype(int)

        S = config.leader.S
        L = topo.laplacian
        pin_total = topo.pinning.sum(axis=0)
        c = config.c
        self.Xi = np.kron(np.eye(N), S) - c * np.kron(L + np.diag(pin_total), In)
        self.XiL = c * np.kron(topo.pinning.T, In)
        self.Lead = np.kron(np.eye(M), S)
        self.Dblk = np.kron(np.diag(topo.in_degree), In)
        self.Adjblk = np.kron(topo.adjacency, In)

        self.sensor = _CompiledSignals(config.attacks.sensor, config.attacks.t_on)
        self.actuator = _CompiledSignals(config.attacks.actuator, config.attacks.t_on)
        self.mu = config.resilience.mu
        self.rho_decay = config.resilience.rho_decay
        self.rho_floor = config.resilience.rho_floor

        o = np.cumsum([0, self.Nn, self.Nn, self.Nn, self.Nn, N, M * n])
        self.slices = {name: slice(o[k], o[k + 1]) for k, name in
                       enumerate(("x", "x_hat", "xi", "ds_hat", "chi", "leaders"))}
        self.size = int(o[-1])

    # -- packing ----------------------------------------------------------
    def pack(self, x, x_hat, xi, ds_hat, chi, leaders) -> np.ndarray:
        return np.concatenate([np.ravel(x), np.ravel(x_hat), np.ravel(xi), np.ravel(ds_hat),
                               np.ravel(chi), np.ravel(leaders)]).astype(float)

    def unpack(self, y) -> dict:
        return {name: y[..., sl] for name, sl in self.slices.items()}

    def initial_state(self) -> np.ndarray:
        cfg = self.config
        if self.mode == "conventional":
            zeros = np.zeros((self.N, self.n))
            return self.pack(cfg.x0, zeros, cfg.xi0, zeros, np.zeros(self.N), cfg.leader_x0)
        return self.pack(cfg.x0, cfg.x_hat0, cfg.xi0, cfg.ds_hat0, cfg.chi0, cfg.leader_x0)

    def rho(self, t: float) -> float:
        return max(math.exp(-self.rho_decay * t), self.rho_floor)

    # -- evaluation -------------------------------------------------------
    def _signals(self, t, y):
        s = self.slices
        x, x_hat, xi, ds_hat = y[s["x"]], y[s["x_hat"]], y[s["xi"]], y[s["ds_hat"]]
        chi = y[s["chi"]]
        x_bar = x + self.sensor(t)
        psi = x_bar - x_hat - ds_hat
        if self.mode == "conventional":
            u = self.K @ x_bar + self.H @ xi
            g = np.zeros(self.B.shape[1])
            g_norm = np.zeros(self.N)
            da_hat = g
        else:
            g = self.BtP @ psi
            g_norm = np.sqrt(np.add.reduceat(g * g, self.m_offsets))
            coef = chi * chi / (g_norm * chi + self.rho(t))
            da_hat = g * coef[self.owner]
            u = self.K @ x_hat + self.H @ xi - da_hat
        return x, x_hat, xi, ds_hat, x_bar, psi, g_norm, da_hat, u

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        s = self.slices
        x, x_hat, xi, ds_hat, x_bar, psi, g_norm, da_hat, u = self._signals(t, y)
        leaders = y[s["leaders"]]
        dy = np.empty_like(y)
        dy[s["x"]] = self.A @ x + self.B @ (u + self.actuator(t))
        dy[s["xi"]] = self.Xi @ xi + self.XiL @ leaders
        dy[s["leaders"]] = self.Lead @ leaders
        if self.mode == "conventional":
            dy[s["x_hat"]] = 0.0
            dy[s["ds_hat"]] = 0.0
            dy[s["chi"]] = 0.0
        else:
            dy[s["x_hat"]] = self.ABK @ x_hat + self.BH @ xi - self.BK @ psi
            dy[s["ds_hat"]] = -self.Dblk @ ds_hat + self.Adjblk @ (x_bar - x_hat)
            dy[s["chi"]] = self.mu * g_norm
        return dy

    def outputs(self, t: float, y: np.ndarray) -> dict:
        """Algebraic signals at one instant: measured state, psi, attack estimate, input."""
        _, _, _, _, x_bar, psi, _, da_hat, u = self._signals(t, y)
        return {"x_bar": x_bar, "psi": psi, "da_hat": da_hat, "u": u,
                "ds": self.sensor(t), "da": self.actuator(t)}


def assemble_closed_loop(config: ScenarioConfig, gains: Sequence[lc.GainSet] | None = None,
                         mode: str | None = None) -> ClosedLoop:
    return ClosedLoop(config, synthesize(config) if gains is None else gains, mode)


# --- integrator ------------------------------------------------------------

class Trajectory(NamedTuple):
    times: np.ndarray
    states: np.ndarray


def integrate_rk4(rhs: Callable, y0, dt: float, T: float, store_every: int = 10) -> Trajectory:
    """Classic fixed-step fourth-order Runge-Kutta on ``[0, T]``.

    The grid is ``t_k = k dt`` with ``round(T / dt)`` steps; every
    ``store_every``-th state is kept (the last one always is).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if store_every < 1:
        raise ValueError("store_every must be >= 1")
    steps = int(round(T / dt))
    y = np.array(y0, dtype=float, copy=True).reshape(-1)
    keep = list(range(0, steps + 1, store_every))
    if keep[-1] != steps:
        keep.append(steps)
    states = np.empty((len(keep), y.size))
    states[0] = y
    slot = 1
    half = 0.5 * dt
    sixth = dt / 6.0
    for k in range(steps):
        t = k * dt
        k1 = rhs(t, y)
        k2 = rhs(t + half, y + half * k1)
        k3 = rhs(t + half, y + half * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + sixth * (k1 + 2.0 * (k2 + k3) + k4)
        if not np.isfinite(y).all():
            raise NonFiniteState((k + 1) * dt, int(np.flatnonzero(~np.isfinite(y))[0]))
        if slot < len(keep) and keep[slot] == k + 1:
            states[slot] = y
            slot += 1
    return Trajectory(np.array(keep, dtype=float) * dt, states)


# --- containment metrics ---------------------------------------------------

def hull_weights(psi_list: Sequence[np.ndarray]) -> np.ndarray:
    """``W`` (N x M) such that the Psi-weighted leader combination for follower i is ``sum_k W[i,k] x_k``."""
    psi_sum = sum(psi_list)
    report = lemma1_report(psi_sum)
    if not report.nonsingular:
        raise SingularPsiSum("sum of Psi_k is singular")
    ones = np.ones(psi_sum.shape[0])
    return np.linalg.solve(psi_sum, np.column_stack([p @ ones for p in psi_list]))


def _containment(states, leader_states, psi_list):
    W = hull_weights(psi_list)
    N, M = W.shape
    leaders = np.asarray(leader_states, dtype=float)
    if leaders.ndim == 1:
        leaders = leaders.reshape(M, -1)
    n = leaders.shape[-1]
    states = np.asarray(states, dtype=float)
    shaped = states.reshape(leaders.shape[:-2] + (N, n))
    return (shaped - W @ leaders).reshape(states.shape)


def containment_error(x, leader_states, psi_list) -> np.ndarray:
    """Follower deviation from its Psi-weighted leader combination.

    ``x`` is stacked ``(N n,)`` or shaped ``(..., N, n)``; ``leader_states`` is
    ``(..., M, n)``. The result has the shape of ``x``.
    """
    return _containment(x, leader_states, psi_list)


def observer_containment_error(x_hat, leader_states, psi_list) -> np.ndarray:
    return _containment(x_hat, leader_states, psi_list)


def compensator_error(xi, leader_states, psi_list) -> np.ndarray:
    return _containment(xi, leader_states, psi_list)


def lyapunov_diagnostic(psi, ds_tilde, P_aug) -> float:
    v = np.concatenate([np.ravel(psi), np.ravel(ds_tilde)])
    return float(v @ np.asarray(P_aug) @ v)


# --- UUB classification ----------------------------------------------------

@dataclass(frozen=True)
class UubVerdict:
    verdict: str
    tail_sup: float
    growth_rate: float
    early_sup: float
    tail_mean: float
    criterion: str = ""

    @property
    def bounded(self) -> bool:
        return self.verdict == "bounded"


UUB_CRITERION = ("divergent iff the tail-window slope exceeds {slope_factor} * tail_mean / tail_window "
                 "and the least-squares trend over the last {trend_fraction:.0%} of the horizon, "
                 "multiplied by the horizon length, exceeds {trend_factor} * tail_mean; "
                 "tail window = last {tail_fraction:.0%}")


def classify_uub(times, norms, tail_fraction: float = 0.2, *, trend_fraction: float = 0.5,
                 slope_factor: float = 0.05, trend_factor: float = 0.5,
                 early_fraction: float = 0.2) -> UubVerdict:
    """Label an error-norm series as bounded or divergent.

    ``growth_rate`` is the least-squares slope of the norm over the tail
    window. A run is divergent when that slope is significant relative to the
    tail level *and* a linear trend fitted over the longer ``trend_fraction``
    window accounts for at least ``trend_factor`` of the tail level across the
    whole horizon (a bounded oscillation averages out over the long window, a
    ramp does not). Otherwise the verdict is bounded and ``tail_sup`` is the
    empirical ultimate bound. ``early_sup`` (first ``early_fraction``) is
    reported for reference only.
    """
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    if times.shape != norms.shape or times.ndim != 1:
        raise ValueError("times and norms must be 1-D arrays of equal length")
    if times.size < 10:
        raise TooFewSamples(f"need at least 10 samples, got {times.size}")
    if not 0 < tail_fraction < 1 or not 0 < trend_fraction < 1:
        raise ValueError("window fractions must lie in (0, 1)")
    t0, t1 = times[0], times[-1]
    span = t1 - t0

    def window(frac):
        sel = times >= t1 - frac * span - 1e-12 * span
        if sel.sum() < 2:
            sel[-2:] = True
        return sel

    tail = window(tail_fraction)
    tt, tv = times[tail], norms[tail]
    slope = float(np.polyfit(tt, tv, 1)[0])
    tail_window = float(tt[-1] - tt[0])
    tail_sup = float(tv.max())
    tail_mean = float(tv.mean())
    trend_sel = window(trend_fraction)
    trend = float(np.polyfit(times[trend_sel], norms[trend_sel], 1)[0])
    early_sup = float(norms[times <= t0 + early_fraction * span].max())
    divergent = (tail_mean > 0
                 and slope > slope_factor * tail_mean / tail_window
                 and trend * span > trend_factor * tail_mean)
    crit = UUB_CRITERION.format(slope_factor=slope_factor, trend_fraction=trend_fraction,
                                trend_factor=trend_factor, tail_fraction=tail_fraction)
    return UubVerdict("divergent" if divergent else "bounded", tail_sup, slope, early_sup, tail_mean, crit)


# --- traces ----------------------------------------------------------------

@dataclass(eq=False)
class SimTrace:
    mode: str
    times: np.ndarray
    x: np.ndarray          # (K, N, n)
    x_hat: np.ndarray
    xi: np.ndarray
    ds_hat: np.ndarray
    ds: np.ndarray         # true sensor attack
    psi: np.ndarray
    chi: np.ndarray        # (K, N)
    da_hat: np.ndarray     # (K, sum m)
    u: np.ndarray          # (K, sum m)
    leaders: np.ndarray    # (K, M, n)
    e: np.ndarray
    e_hat: np.ndarray
    eta: np.ndarray
    eps: np.ndarray
    V: np.ndarray          # (K, N)
    m: list[int] = field(default_factory=list)
    dt: float = float("nan")

    @property
    def e_norms(self) -> np.ndarray:
        """``||e_i(t)||`` per follower, shape (K, N)."""
        return np.linalg.norm(self.e, axis=-1)

    def input_of(self, series: np.ndarray, i: int) -> np.ndarray:
        """Columns of an input-sized series (``u`` or ``da_hat``) that belong to follower ``i``."""
        off = int(np.sum(self.m[: i - 1]))
        return series[:, off: off + self.m[i - 1]]

    def sample_index(self, t: float) -> int:
        return int(np.argmin(np.abs(self.times - t)))

    def classify(self, tail_fraction: float = 0.2, **kw) -> list[UubVerdict]:
        return [classify_uub(self.times, self.e_norms[:, i], tail_fraction, **kw)
                for i in range(self.e.shape[1])]

    def window_sup(self, start: float, stop: float | None = None) -> np.ndarray:
        sel = self.times >= start - 1e-12
        if stop is not None:
            sel &= self.times <= stop + 1e-12
        return self.e_norms[sel].max(axis=0)


def build_trace(loop: ClosedLoop, traj: Trajectory) -> SimTrace:
    cfg, N, M, n = loop.config, loop.N, loop.M, loop.n
    parts = loop.unpack(traj.states)
    K = traj.times.size
    outs = [loop.outputs(t, y) for t, y in zip(traj.times, traj.states)]
    stack = lambda key: np.array([o[key] for o in outs])  # noqa: E731
    shape3 = lambda a: a.reshape(K, N, n)  # noqa: E731
    x = shape3(parts["x"])
    x_hat = shape3(parts["x_hat"])
    xi = shape3(parts["xi"])
    ds_hat = shape3(parts["ds_hat"])
    leaders = parts["leaders"].reshape(K, M, n)
    psi = shape3(stack("psi"))
    ds = shape3(stack("ds"))
    psi_list, _ = psi_matrices(cfg.topology)
    e = containment_error(x, leaders, psi_list)
    e_hat = observer_containment_error(x_hat, leaders, psi_list)
    eta = compensator_error(xi, leaders, psi_list)
    theta = np.concatenate([psi, ds - ds_hat], axis=-1)
    P_aug = np.array([g.P_aug for g in loop.gains])
    V = np.einsum("kni,nij,knj->kn", theta, P_aug, theta)
    return SimTrace(
        mode=loop.mode, times=traj.times, x=x, x_hat=x_hat, xi=xi, ds_hat=ds_hat, ds=ds, psi=psi,
        chi=parts["chi"].copy(), da_hat=stack("da_hat"), u=stack("u"), leaders=leaders,
        e=e, e_hat=e_hat, eta=eta, eps=x_hat - xi, V=V, m=list(loop.m), dt=cfg.dt,
    )


def simulate(config: ScenarioConfig, gains: Sequence[lc.GainSet] | None = None,
             mode: str | None = None, *, dt: float | None = None, T: float | None = None,
             store_every: int | None = None) -> SimTrace:
    """Synthesize (unless ``gains`` is given), integrate and post-process one run."""
    loop = assemble_closed_loop(config, gains, mode)
    dt = config.dt if dt is None else dt
    T = config.T if T is None else T
    store_every = config.store_every if store_every is None else store_every
    traj = integrate_rk4(loop, loop.initial_state(), dt, T, store_every)
    trace = build_trace(loop, traj)
    trace.dt = dt
    return trace


def _simulate_job(args):
    config, mode = args
    return simulate(config, mode=mode)


def simulate_many(jobs: Sequence[tuple[ScenarioConfig, str | None]], max_workers: int | None = 1) -> list[SimTrace]:
    """Run independent simulations, optionally in worker processes (results keep job order)."""
    jobs = list(jobs)
    if max_workers == 1 or len(jobs) <= 1:
        return [_simulate_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(_simulate_job, jobs))
