"""Scenario files: a line-oriented ``key = value`` format with ``[section]`` headers.

Layout (``#`` starts a comment)::

    [topology]
    followers = 6
    leaders = 4
    edge = 1 -> 2 : 1          # follower src -> follower dst : weight
    pin = 1 -> 1 : 1           # leader -> follower : gain

    [followers]
    A[1..2] = 2x2: 2, -3; 4, -4
    B[1..2] = 2x1: 1; 3
    Q[1..6] = 2x2: 3, 0; 0, 3
    R[1..6] = 1x1: 1
    x0[3] = 0.5, 0

    [leaders]
    S = 2x2: 1, -2; 1, -1
    x0[1] = 1, 0
    allow_stable_leader = false

    [attacks]
    t_on = 0
    sensor.ramp[1..6] = 1, 0.5
    sensor.wave[1] = sin | -0.1, -0.1 | 1 | 0     # waveform | amplitude | frequency | phase
    actuator.ramp[1] = 0.1

    [controller]
    mode = resilient
    c = 10
    mu[1..6] = 2
    rho_decay = 0.01
    rho_floor = 1e-12
    xhat0[1] = 0, 0            # also xi0, dshat0, chi0

    [numerics]
    dt = 0.001
    T = 44
    store_every = 10

Matrices are row-major, rows split by ``;``; the ``RxC:`` prefix is optional
on input and checked when present. ``[ids]`` accepts ``3``, ``1..6`` or comma
lists of both. Omitted ``[numerics]`` / ``[controller]`` / ``[attacks]``
entries take the defaults shown above (attacks default to none).
"""
from __future__ import annotations

import re
from importlib import resources
from pathlib import Path

import numpy as np

from . import linalg_control as lc
from .attacks import AttackProfile, AttackSignal, Sinusoid
from .controllers import ResilienceParams
from .errors import ParseError, ResilientMasError, TopologyError, ValidationError
from .simulator import MODES, ScenarioConfig, validate_config
from .topology import build_topology

SECTIONS = ("topology", "followers", "leaders", "attacks", "controller", "numerics")

_KEYS = {
    "topology": {"followers": False, "leaders": False, "edge": False, "pin": False},
    "followers": {"A": True, "B": True, "Q": True, "R": True, "x0": True},
    "leaders": {"S": False, "x0": True, "allow_stable_leader": False},
    "attacks": {"t_on": False, "sensor.ramp": True, "sensor.wave": True,
                "actuator.ramp": True, "actuator.wave": True},
    "controller": {"mode": False, "c": False, "mu": True, "rho_decay": False, "rho_floor": False,
                   "xhat0": True, "xi0": True, "dshat0": True, "chi0": True},
    "numerics": {"dt": False, "T": False, "store_every": False},
}
_REPEATABLE = {("topology", "edge"), ("topology", "pin"), ("attacks", "sensor.wave"),
               ("attacks", "actuator.wave")}

_KEY_RE = re.compile(r"^(?P<name>[A-Za-z_][A-Za-z0-9_.]*)(?:\[(?P<ids>[^\]]*)\])?$")
_LINK_RE = re.compile(r"^\s*(\d+)\s*->\s*(\d+)\s*(?::\s*(\S+))?\s*$")

BUNDLED = ("paper_sec4.scenario",)


# --- value parsing ---------------------------------------------------------

def _float(tok: str, line: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(line, f"not a number: {tok!r}") from None


def _matrix(text: str, line: int) -> np.ndarray:
    dims = None
    if ":" in text:
        head, text = text.split(":", 1)
        m = re.fullmatch(r"\s*(\d+)\s*x\s*(\d+)\s*", head)
        if not m:
            raise ParseError(line, f"bad dimension prefix {head.strip()!r}")
        dims = (int(m.group(1)), int(m.group(2)))
    rows = [r for r in text.split(";")]
    data = [[_float(tok, line) for tok in row.split(",") if tok.strip()] for row in rows]
    if not data or any(len(r) == 0 for r in data) or len({len(r) for r in data}) != 1:
        raise ParseError(line, "matrix rows must be non-empty and equally long")
    mat = np.array(data, dtype=float)
    if dims is not None and mat.shape != dims:
        raise ParseError(line, f"declared {dims[0]}x{dims[1]} but found {mat.shape[0]}x{mat.shape[1]}")
    return mat


def _vector(text: str, line: int) -> np.ndarray:
    return _matrix(text, line).reshape(-1)


def _ids(spec: str | None, line: int) -> list[int]:
    if spec is None:
        raise ParseError(line, "this key needs an [id] suffix")
    out: list[int] = []
    for part in spec.split(","):
        part = part.strip()
        m = re.fullmatch(r"(\d+)(?:\s*\.\.\s*(\d+))?", part)
        if not m:
            raise ParseError(line, f"bad id list {spec!r}")
        lo, hi = int(m.group(1)), int(m.group(2) or m.group(1))
        if hi < lo:
            raise ParseError(line, f"empty id range {part!r}")
        out.extend(range(lo, hi + 1))
    return out


def _bool(text: str, line: int) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ParseError(line, f"not a boolean: {text!r}")


def _wave(text: str, line: int) -> Sinusoid:
    parts = [p.strip() for p in text.split("|")]
    if len(parts) != 4:
        raise ParseError(line, "wave needs 'waveform | amplitude | frequency | phase'")
    if parts[0] not in ("sin", "cos"):
        raise ParseError(line, f"waveform must be sin or cos, got {parts[0]!r}")
    return Sinusoid(_vector(parts[1], line), _float(parts[2], line), _float(parts[3], line), parts[0])


# --- tokenizing ------------------------------------------------------------

def _entries(text: str):
    section = None
    seen_sections = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            m = re.fullmatch(r"\[\s*([A-Za-z_]+)\s*\]", line)
            if not m or m.group(1) not in SECTIONS:
                raise ParseError(lineno, f"unknown section {line!r}")
            section = m.group(1)
            if section in seen_sections:
                raise ParseError(lineno, f"section [{section}] appears twice")
            seen_sections.add(section)
            continue
        if section is None:
            raise ParseError(lineno, "entry before the first [section]")
        if "=" not in line:
            raise ParseError(lineno, "expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        m = _KEY_RE.match(key)
        if not m:
            raise ParseError(lineno, f"malformed key {key!r}")
        name, ids = m.group("name"), m.group("ids")
        allowed = _KEYS[section]
        if name not in allowed:
            raise ParseError(lineno, f"unknown key {name!r} in [{section}]")
        if allowed[name] and ids is None:
            raise ParseError(lineno, f"{name} needs an [id] suffix")
        if not allowed[name] and ids is not None:
            raise ParseError(lineno, f"{name} does not take an [id] suffix")
        yield lineno, section, name, ids, value


class _Collector:
    def __init__(self):
        self.scalar: dict[tuple[str, str], tuple[int, str]] = {}
        self.indexed: dict[tuple[str, str], dict[int, tuple[int, str]]] = {}
        self.repeated: dict[tuple[str, str], list[tuple[int, str, str | None]]] = {}

    def add(self, lineno, section, name, ids, value):
        key = (section, name)
        if key in _REPEATABLE:
            self.repeated.setdefault(key, []).append((lineno, value, ids))
        elif ids is None:
            if key in self.scalar:
                raise ParseError(lineno, f"duplicate key {name!r} in [{section}]")
            self.scalar[key] = (lineno, value)
        else:
            slot = self.indexed.setdefault(key, {})
            for i in _ids(ids, lineno):
                if i in slot:
                    raise ParseError(lineno, f"{name}[{i}] assigned twice")
                slot[i] = (lineno, value)

    def get(self, section, name, default=None):
        return self.scalar.get((section, name), (0, default))


def _per_id(coll, section, name, count, parse, *, required, default=None, what="follower"):
    slot = coll.indexed.get((section, name), {})
    for i, (lineno, _) in slot.items():
        if not 1 <= i <= count:
            raise ParseError(lineno, f"{name}[{i}]: no {what} {i} (have {count})")
    out = []
    for i in range(1, count + 1):
        if i in slot:
            lineno, value = slot[i]
            out.append(parse(value, lineno))
        elif required:
            raise ParseError(0, f"[{section}] missing {name} for {what} {i}")
        else:
            out.append(default)
    return out


# --- public API ------------------------------------------------------------

def loads(text: str, *, validate: bool = True) -> ScenarioConfig:
    """Parse scenario text into a :class:`ScenarioConfig`."""
    coll = _Collector()
    for entry in _entries(text):
        coll.add(*entry)

    ln, val = coll.get("topology", "followers")
    if val is None:
        raise ParseError(0, "[topology] must set 'followers'")
    N = int(_float(val, ln))
    ln, val = coll.get("topology", "leaders")
    if val is None:
        raise ParseError(0, "[topology] must set 'leaders'")
    M = int(_float(val, ln))

    def links(name):
        out = []
        for lineno, value, _ in coll.repeated.get(("topology", name), []):
            m = _LINK_RE.match(value)
            if not m:
                raise ParseError(lineno, f"{name} must look like 'a -> b : weight'")
            w = _float(m.group(3), lineno) if m.group(3) else 1.0
            out.append((int(m.group(1)), int(m.group(2)), w))
        return out

    try:
        topology = build_topology(N, M, links("edge"), links("pin"), check_assumption1=False)
    except TopologyError as exc:
        raise ValidationError("topology", str(exc)) from None

    A = _per_id(coll, "followers", "A", N, _matrix, required=True)
    B = _per_id(coll, "followers", "B", N, _matrix, required=True)
    Q = _per_id(coll, "followers", "Q", N, _matrix, required=True)
    R = _per_id(coll, "followers", "R", N, _matrix, required=True)
    try:
        followers = [lc.LtiAgent(a, b, i + 1) for i, (a, b) in enumerate(zip(A, B))]
    except ResilientMasError as exc:
        raise ValidationError("dimensions", str(exc)) from None

    ln, val = coll.get("leaders", "S")
    if val is None:
        raise ParseError(0, "[leaders] must set 'S'")
    try:
        leader = lc.LeaderExosystem(_matrix(val, ln))
    except ResilientMasError as exc:
        raise ValidationError("dimensions", str(exc)) from None
    n = leader.n
    m = [f.m for f in followers]

    def states(section, name, count, what, dim=n):
        vals = _per_id(coll, section, name, count, _vector, required=False, what=what)
        if all(v is None for v in vals):
            return None
        out = np.zeros((count, dim))
        for i, v in enumerate(vals):
            if v is not None:
                if v.shape != (dim,):
                    raise ValidationError("dimensions", f"{name}[{i + 1}] must have {dim} entries")
                out[i] = v
        return out

    leader_x0 = states("leaders", "x0", M, "leader")
    ln, val = coll.get("leaders", "allow_stable_leader", "false")
    allow_stable = _bool(val, ln)
    x0 = states("followers", "x0", N, "follower")

    ln, val = coll.get("attacks", "t_on", "0")
    t_on = _float(val, ln)

    def signals(kind, dims):
        ramps = _per_id(coll, "attacks", f"{kind}.ramp", N, _vector, required=False)
        waves = {i: [] for i in range(1, N + 1)}
        for lineno, value, ids in coll.repeated.get(("attacks", f"{kind}.wave"), []):
            for i in _ids(ids, lineno):
                if not 1 <= i <= N:
                    raise ParseError(lineno, f"{kind}.wave[{i}]: no follower {i}")
                waves[i].append(_wave(value, lineno))
        out = []
        for i in range(1, N + 1):
            ramp = ramps[i - 1] if ramps[i - 1] is not None else np.zeros(dims[i - 1])
            try:
                out.append(AttackSignal(ramp, tuple(waves[i])))
            except ResilientMasError as exc:
                raise ValidationError("dimensions", f"{kind} attack of follower {i}: {exc}") from None
        return tuple(out)

    try:
        attacks = AttackProfile(signals("sensor", [n] * N), signals("actuator", m), t_on)
    except ValueError as exc:
        raise ValidationError("attacks", str(exc)) from None

    ln, mode = coll.get("controller", "mode", "resilient")
    if mode not in MODES:
        raise ParseError(ln, f"mode must be one of {MODES}")
    ln, val = coll.get("controller", "c", "10")
    c = _float(val, ln)
    mu = _per_id(coll, "controller", "mu", N, lambda v, l: _float(v, l), required=False, default=2.0)
    ln, val = coll.get("controller", "rho_decay", "0.01")
    rho_decay = _float(val, ln)
    ln, val = coll.get("controller", "rho_floor", "1e-12")
    rho_floor = _float(val, ln)
    try:
        resilience = ResilienceParams(np.array(mu), rho_decay, rho_floor)
    except ValueError as exc:
        raise ValidationError("controller", str(exc)) from None
    x_hat0 = states("controller", "xhat0", N, "follower")
    xi0 = states("controller", "xi0", N, "follower")
    ds_hat0 = states("controller", "dshat0", N, "follower")
    chi_vals = _per_id(coll, "controller", "chi0", N, lambda v, l: _float(v, l), required=False, default=0.0)

    ln, val = coll.get("numerics", "dt", "0.001")
    dt = _float(val, ln)
    ln, val = coll.get("numerics", "T", "44")
    T = _float(val, ln)
    ln, val = coll.get("numerics", "store_every", "10")
    store_every = int(_float(val, ln))

    config = ScenarioConfig(
        topology=topology, followers=followers, leader=leader, attacks=attacks,
        resilience=resilience, Q=Q, R=R, c=c, mode=mode, dt=dt, T=T, store_every=store_every,
        leader_x0=leader_x0, x0=x0, x_hat0=x_hat0, xi0=xi0, ds_hat0=ds_hat0,
        chi0=np.array(chi_vals), allow_stable_leader=allow_stable,
    )
    if validate:
        validate_config(config)
    return config


def resolve_path(path) -> Path:
    """Filesystem path, falling back to a bundled scenario of the same name."""
    p = Path(path)
    if p.exists() or p.name not in BUNDLED:
        return p
    return Path(str(resources.files("resilient_mas") / "data" / p.name))


def parse_scenario(path, *, validate: bool = True) -> ScenarioConfig:
    p = resolve_path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ParseError(0, f"cannot read {p}: {exc.strerror}") from None
    return loads(text, validate=validate)


def reference_scenario(**overrides) -> ScenarioConfig:
    """The bundled six-follower, four-leader scenario."""
    config = parse_scenario("paper_sec4.scenario")
    for key, value in overrides.items():
        setattr(config, key, value)
    return config


# --- serialization ---------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def _fmt_vector(v) -> str:
    return ", ".join(_fmt(x) for x in np.ravel(v))


def _fmt_matrix(a) -> str:
    a = np.atleast_2d(a)
    rows = "; ".join(", ".join(_fmt(x) for x in row) for row in a)
    return f"{a.shape[0]}x{a.shape[1]}: {rows}"


def dumps(config: ScenarioConfig) -> str:
    """Serialize a config; ``loads(dumps(c))`` reproduces ``c`` exactly."""
    topo = config.topology
    out = ["[topology]", f"followers = {topo.N}", f"leaders = {topo.M}"]
    out += [f"edge = {e.src} -> {e.dst} : {_fmt(e.weight)}" for e in topo.edges]
    out += [f"pin = {p.leader} -> {p.follower} : {_fmt(p.gain)}" for p in topo.pins]

    out += ["", "[followers]"]
    for i, f in enumerate(config.followers, start=1):
        out += [f"A[{i}] = {_fmt_matrix(f.A)}", f"B[{i}] = {_fmt_matrix(f.B)}",
                f"Q[{i}] = {_fmt_matrix(config.Q[i - 1])}", f"R[{i}] = {_fmt_matrix(config.R[i - 1])}",
                f"x0[{i}] = {_fmt_vector(config.x0[i - 1])}"]

    out += ["", "[leaders]", f"S = {_fmt_matrix(config.leader.S)}"]
    out += [f"x0[{k}] = {_fmt_vector(x)}" for k, x in enumerate(config.leader_x0, start=1)]
    out.append(f"allow_stable_leader = {'true' if config.allow_stable_leader else 'false'}")

    out += ["", "[attacks]", f"t_on = {_fmt(config.attacks.t_on)}"]
    for kind, sigs in (("sensor", config.attacks.sensor), ("actuator", config.attacks.actuator)):
        for i, s in enumerate(sigs, start=1):
            out.append(f"{kind}.ramp[{i}] = {_fmt_vector(s.ramp)}")
            for w in s.sinusoids:
                out.append(f"{kind}.wave[{i}] = {w.waveform} | {_fmt_vector(w.amplitude)} | "
                           f"{_fmt(w.frequency)} | {_fmt(w.phase)}")

    res = config.resilience
    out += ["", "[controller]", f"mode = {config.mode}", f"c = {_fmt(config.c)}",
            f"rho_decay = {_fmt(res.rho_decay)}", f"rho_floor = {_fmt(res.rho_floor)}"]
    for i in range(1, config.N + 1):
        out += [f"mu[{i}] = {_fmt(res.mu[i - 1])}", f"xhat0[{i}] = {_fmt_vector(config.x_hat0[i - 1])}",
                f"xi0[{i}] = {_fmt_vector(config.xi0[i - 1])}",
                f"dshat0[{i}] = {_fmt_vector(config.ds_hat0[i - 1])}", f"chi0[{i}] = {_fmt(config.chi0[i - 1])}"]

    out += ["", "[numerics]", f"dt = {_fmt(config.dt)}", f"T = {_fmt(config.T)}",
            f"store_every = {config.store_every}", ""]
    return "\n".join(out)


def configs_equal(a: ScenarioConfig, b: ScenarioConfig) -> bool:
    arrays = ("leader_x0", "x0", "x_hat0", "xi0", "ds_hat0", "chi0")
    scalars = ("c", "mode", "dt", "T", "store_every", "allow_stable_leader")
    return (a.topology == b.topology
            and len(a.followers) == len(b.followers)
            and all(np.array_equal(f.A, g.A) and np.array_equal(f.B, g.B) for f, g in zip(a.followers, b.followers))
            and np.array_equal(a.leader.S, b.leader.S)
            and a.attacks == b.attacks and a.resilience == b.resilience
            and all(np.array_equal(x, y) for x, y in zip(a.Q, b.Q))
            and all(np.array_equal(x, y) for x, y in zip(a.R, b.R))
            and all(np.array_equal(getattr(a, k), getattr(b, k)) for k in arrays)
            and all(getattr(a, k) == getattr(b, k) for k in scalars))
