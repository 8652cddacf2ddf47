"""Euler-Maruyama simulation of polynomial diffusions.

The generator is L = g^{ij} d_ij + b^i d_i, so the diffusion matrix is
sigma sigma^T = 2 g.  Paths are vectorised: a state is an (M, d) array.
Steps that leave the closed domain are pulled back to the boundary along
the step and counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NanState, PathEscaped
from .operator import Model
from .polyring import Poly
from .region import Region

SQRT_CLAMP = 1e-12
N_RATE_BATCHES = 20


@dataclass
class PathConfig:
    dt: float = 1e-3
    T: float = 1.0
    burn_in: float = 0.0
    seed: int = 0
    x0: tuple | None = None
    n_paths: int = 1000
    escape_delta: float = 1e-3
    max_escape_fraction: float = 0.05

    def __post_init__(self):
        if not 0 < self.dt < self.T:
            raise ValueError("need 0 < dt < T")
        if self.burn_in < 0 or self.burn_in >= self.T:
            raise ValueError("need 0 <= burn_in < T")

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))


class NoiseStream:
    """Counter-based normals keyed by (seed, step); columns are path ids."""

    def __init__(self, seed, n_paths, d):
        self.seed, self.n_paths, self.d = int(seed), n_paths, d

    def normals(self, step):
        bits = np.random.Philox(key=self.seed, counter=[0, 0, 0, int(step)])
        return np.random.Generator(bits).standard_normal((self.n_paths, self.d))


def diffusion_sqrt(g):
    """Symmetric square root of 2 g with negative eigenvalues clamped at zero."""
    if g.shape[-1] == 1:
        return np.sqrt(np.clip(2 * g, 0, None))
    w, V = np.linalg.eigh(2 * g)
    w = np.where(w < SQRT_CLAMP, 0.0, w)
    return (V * np.sqrt(w)[..., None, :]) @ np.swapaxes(V, -1, -2)


def step(m: Model, x, dt, noise):
    """One Euler-Maruyama step for every row of x."""
    x = np.atleast_2d(np.asarray(x, float))
    b = m.drift_at(x)
    s = diffusion_sqrt(m.metric_at(x))
    out = x + b * dt + math.sqrt(dt) * np.einsum("nij,nj->ni", s, noise)
    if not np.all(np.isfinite(out)):
        raise NanState("non-finite state")
    return out


@dataclass
class Domain:
    """Sign-pattern domain used to detect and undo overshoots."""

    region: Region | None
    fns: list = field(default_factory=list)

    @classmethod
    def of(cls, m: Model):
        if m.boundary is None or m.interior_point is None:
            return cls(None)
        reg = Region(m.boundary.factors, m.interior_point)
        return cls(reg, [f.lambdify() for f in m.boundary.factors])

    def inside(self, pts):
        if self.region is None:
            return np.ones(len(pts), bool)
        return self.region.pattern_ok(pts)

    def pull_back(self, prev, new, iters=40):
        """Clamp steps that left the domain to a point on the segment just inside.

        Returns the corrected states and the overshoot length of each row.
        """
        out = self.inside(new)
        over = np.zeros(len(new))
        bad = np.flatnonzero(~out)
        if not bad.size:
            return new, over
        a, b = prev[bad], new[bad]
        lo = np.zeros(len(bad))
        hi = np.ones(len(bad))
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            ok = self.inside(a + mid[:, None] * (b - a))
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        fixed = a + lo[:, None] * (b - a)
        res = new.copy()
        res[bad] = fixed
        over[bad] = (1 - lo) * np.linalg.norm(b - a, axis=1)
        return res, over


@dataclass
class SimulationResult:
    checkpoints: np.ndarray  # times
    states: list  # arrays (M, d) at the checkpoints
    escapes: int  # steps landing outside by more than delta
    overshoots: int  # all steps landing outside
    steps: int


def simulate(m: Model, cfg: PathConfig, observe=None, checkpoints=None, domain=None):
    """Run cfg.n_paths paths from cfg.x0 (default: interior point).

    ``observe(t, x)`` is called after every step past the burn-in; states are
    recorded at the requested checkpoint times.
    """
    d = m.dimension
    x0 = cfg.x0 if cfg.x0 is not None else m.interior_point
    if x0 is None:
        raise ValueError("no initial point")
    x = np.tile(np.array([float(v) for v in x0]), (cfg.n_paths, 1))
    domain = domain or Domain.of(m)
    if not domain.inside(x[:1])[0]:
        raise ValueError("initial point is not interior")
    noise = NoiseStream(cfg.seed, cfg.n_paths, d)
    steps = cfg.n_steps
    cps = sorted(checkpoints or [])
    cp_steps = {int(round(t / cfg.dt)): t for t in cps}
    states, times = [], []
    escapes = overshoots = 0
    burn = int(round(cfg.burn_in / cfg.dt))
    for k in range(1, steps + 1):
        new = step(m, x, cfg.dt, noise.normals(k))
        new, over = domain.pull_back(x, new)
        overshoots += int(np.count_nonzero(over))
        escapes += int(np.count_nonzero(over > cfg.escape_delta))
        x = new
        if k in cp_steps:
            times.append(cp_steps[k])
            states.append(x.copy())
        if observe is not None and k > burn:
            observe(k * cfg.dt, x)
    total = steps * cfg.n_paths
    if escapes > cfg.max_escape_fraction * total:
        raise PathEscaped(
            f"{escapes} of {total} steps left the domain by more than {cfg.escape_delta}",
            escapes=escapes,
        )
    return SimulationResult(np.array(times), states, escapes, overshoots, total)


# ---------------------------------------------------------------------------
# checks


@dataclass
class MomentVerdict:
    monomial: tuple
    estimate: float
    stderr: float
    expected: float
    z: float
    passed: bool


@dataclass
class InvariantReport:
    verdicts: list
    escapes: int
    overshoots: int
    steps: int

    @property
    def passed(self):
        return all(v.passed for v in self.verdicts)


def invariant_check(m: Model, cfg: PathConfig, monomials, moments, sigmas=3.0) -> InvariantReport:
    """Time averages of monomials after burn-in versus moment-table values.

    Each path contributes one time average; the error bar is the spread of
    those averages over paths (batch means with one batch per path).
    """
    E = np.array([tuple(e) for e in monomials], dtype=float)
    acc = np.zeros((cfg.n_paths, len(E)))
    count = [0]

    def observe(t, x):
        acc[:] += np.prod(x[:, None, :] ** E[None, :, :], axis=2)
        count[0] += 1

    res = simulate(m, cfg, observe)
    means = acc / max(count[0], 1)
    verdicts = []
    for i, e in enumerate(monomials):
        est = float(means[:, i].mean())
        se = float(means[:, i].std(ddof=1) / math.sqrt(cfg.n_paths))
        exp = float(moments.value(tuple(e)))
        z = (est - exp) / se if se > 0 else (0.0 if est == exp else math.inf)
        verdicts.append(MomentVerdict(tuple(e), est, se, exp, z, abs(z) <= sigmas))
    return InvariantReport(verdicts, res.escapes, res.overshoots, res.steps)


@dataclass
class DecayReport:
    times: np.ndarray
    means: np.ndarray
    stderrs: np.ndarray
    expected: np.ndarray
    rate: float  # fitted decay rate
    rate_stderr: float
    eigenvalue: float
    passed: bool
    escapes: int = 0

    @property
    def z(self):
        return (self.rate - self.eigenvalue) / self.rate_stderr if self.rate_stderr else math.inf


def eigen_decay_check(m: Model, eigenvalue: float, P: Poly, cfg: PathConfig, checkpoints=None,
                      sigmas=3.0) -> DecayReport:
    """Ensemble mean of P(X_t) against exp(lambda t) P(x0).

    The decay rate is fitted by weighted least squares of log-means; its
    standard error comes from the per-checkpoint ensemble errors.  Each
    checkpoint is also compared directly at ``sigmas``.
    """
    if eigenvalue >= 0:
        raise ValueError("eigenvalue must be negative")
    if checkpoints is None:
        tmax = min(cfg.T, 1.5 / abs(eigenvalue))
        checkpoints = list(np.linspace(tmax / 5, tmax, 5))
    checkpoints = [cfg.dt * round(t / cfg.dt) for t in checkpoints]
    f = P.lambdify()
    x0 = np.array([float(v) for v in (cfg.x0 if cfg.x0 is not None else m.interior_point)])
    p0 = float(f(x0[None, :])[0])
    if p0 == 0:
        raise ValueError("P vanishes at the initial point")
    run_cfg = PathConfig(cfg.dt, max(checkpoints) + cfg.dt, 0.0, cfg.seed, tuple(x0), cfg.n_paths,
                         cfg.escape_delta, cfg.max_escape_fraction)
    res = simulate(m, run_cfg, checkpoints=checkpoints)
    vals = [f(s) for s in res.states]
    means = np.array([v.mean() for v in vals])
    ses = np.array([v.std(ddof=1) / math.sqrt(len(v)) for v in vals])
    times = res.checkpoints
    expected = p0 * np.exp(eigenvalue * times)
    rate, w = _fit_rate(times, means / p0, ses / abs(p0))
    # batch means over groups of paths: checkpoints share paths, so their errors correlate
    V = np.array(vals)
    B = min(N_RATE_BATCHES, V.shape[1] // 2)
    batch_rates = [
        _fit_rate(times, V[:, idx].mean(1) / p0, None, w)[0]
        for idx in np.array_split(np.arange(V.shape[1]), B)
    ]
    batch_rates = np.array([r for r in batch_rates if np.isfinite(r)])
    rate_se = float(batch_rates.std(ddof=1) / math.sqrt(len(batch_rates))) if len(batch_rates) > 1 else math.inf
    point_ok = np.all(np.abs(means - expected) <= sigmas * ses)
    passed = bool(abs(rate - eigenvalue) <= sigmas * rate_se and point_ok)
    return DecayReport(times, means, ses, expected, rate, rate_se, eigenvalue, passed, res.escapes)


def _fit_rate(times, ratio, ratio_se, weights=None):
    """Least-squares slope of log(ratio) against t through the origin."""
    ok = ratio > 0
    if not ok.any():
        return math.nan, weights
    t, ly = times[ok], np.log(ratio[ok])
    if weights is None:
        weights = np.ones(len(times)) if ratio_se is None else (ratio / np.maximum(ratio_se, 1e-300)) ** 2
    w = weights[ok]
    return float(np.sum(w * t * ly) / np.sum(w * t * t)), weights


def dump_trajectory(states, path, binary=False):
    """Trajectory dump: JSON text, or little-endian f64 row-major (steps, paths, d)."""
    arr = np.ascontiguousarray(np.asarray(states, dtype="<f8"))
    if binary:
        arr.tofile(path)
    else:
        import json

        with open(path, "w") as fh:
            json.dump({"schema": "polydiff/1", "shape": list(arr.shape), "states": arr.tolist()}, fh)
