"""Online LSPE(lambda): stepsizes, the per-step recursion, the deterministic
reference iterate y_n and the error-decomposition diagnostics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.special import zeta

from . import _kernels
from .chain import MarkovRewardChain, path_generator
from .errors import InvalidSchedule, InvalidState, NumericalBreakdown
from .model import ExactModel, FeatureBasis, HGeometry

DEFAULT_RHO = 0.1
SANDWICH_CHECK_N = 10**6


@dataclass(frozen=True)
class StepSchedule:
    """a(n) = c n^{-mu2} for n >= 1, with a(0) := a(1) = c."""

    c: float
    mu1: float
    mu2: float
    mu3: float
    theta: float

    def a(self, n):
        n = np.maximum(np.asarray(n, dtype=float), 1.0)
        out = self.c * n ** (-self.mu2)
        return float(out) if out.ndim == 0 else out

    def steps(self, start: int, stop: int) -> np.ndarray:
        """a(start), ..., a(stop - 1)."""
        return self.a(np.arange(start, stop))

    def square_sum_estimate(self, n: int) -> float:
        """Closed-form estimate of sum_{k=1}^n a(k)^2 (zeta value minus an
        Euler-Maclaurin tail)."""
        p = 2.0 * self.mu2
        if p <= 1.0:
            return np.inf
        tail = n ** (1.0 - p) / (p - 1.0) - 0.5 * n ** (-p)
        return self.c**2 * (zeta(p) - tail)

    def to_dict(self) -> dict:
        return {"c": self.c, "mu1": self.mu1, "mu2": self.mu2, "mu3": self.mu3,
                "theta": self.theta}


def build_schedule(c, mu1, mu2, mu3, theta) -> StepSchedule:
    if not 0.0 < theta < 0.5:
        raise InvalidSchedule(f"theta must lie in (0, 1/2), got {theta}")
    if not 0.5 + theta < mu2 <= 1.0:
        raise InvalidSchedule(f"mu2 must exceed 1/2 + theta = {0.5 + theta} and be <= 1, got {mu2}")
    if not 0.0 < c < 1.0:
        raise InvalidSchedule(f"a(n) < 1 requires 0 < c < 1, got c={c}")
    if mu1 <= 0 or mu3 <= 0:
        raise InvalidSchedule("mu1 and mu3 must be positive")
    # mu1/n <= c n^{-mu2} <= mu3 n^{-mu2} for all n >= 1  <=>  mu1 <= c <= mu3
    if mu1 > c:
        raise InvalidSchedule(f"lower sandwich mu1/n <= a(n) fails at n=1 (mu1={mu1} > c={c})")
    if c > mu3:
        raise InvalidSchedule(f"upper sandwich a(n) <= mu3 n^-mu2 fails (c={c} > mu3={mu3})")
    sched = StepSchedule(float(c), float(mu1), float(mu2), float(mu3), float(theta))
    grid = np.unique(np.geomspace(1, SANDWICH_CHECK_N, 2000).astype(np.int64))
    a = sched.a(grid)
    if np.any(a < mu1 / grid * (1 - 1e-12)) or np.any(a > mu3 * grid ** (-mu2) * (1 + 1e-12)):
        raise InvalidSchedule("stepsize sandwich violated on the spot-check grid")
    return sched


@dataclass
class RunnerState:
    """Mutable LSPE state at step index n (quantities built from X_0..X_{n-1})."""

    n: int
    r: np.ndarray
    z: np.ndarray
    A_bar: np.ndarray
    b_bar: np.ndarray
    G_inv: np.ndarray
    rho: float

    @classmethod
    def initial(cls, M: int, rho: float = DEFAULT_RHO, r0=None) -> "RunnerState":
        r = np.zeros(M) if r0 is None else np.array(r0, dtype=float)
        return cls(0, r, np.zeros(M), np.zeros((M, M)), np.zeros(M), np.eye(M) / rho, rho)

    def B_n_inv(self) -> np.ndarray:
        # B_{n-1}^{-1} for the last completed step: G_inv covers n terms
        return self.n * self.G_inv

    def copy(self) -> "RunnerState":
        return RunnerState(self.n, self.r.copy(), self.z.copy(), self.A_bar.copy(),
                           self.b_bar.copy(), self.G_inv.copy(), self.rho)


def step(state: RunnerState, x_m: int, x_m1: int, schedule: StepSchedule, *,
         phi: np.ndarray, cost: np.ndarray, alpha: float, lam: float) -> RunnerState:
    """One LSPE(lambda) update using the transition X_m -> X_{m+1} (m = state.n).

    Mutates and returns ``state``.  After the call the state holds r_{m+1} and
    the averages A_m, b_m together with G_inv = (rho I + sum_{t<=m} phi phi^T)^{-1}.
    """
    m = state.n
    f, f1 = phi[x_m], phi[x_m1]
    state.z = alpha * lam * state.z + f
    inv = 1.0 / (m + 1)
    state.A_bar += (np.outer(state.z, alpha * f1 - f) - state.A_bar) * inv
    state.b_bar += (state.z * cost[x_m] - state.b_bar) * inv
    g = state.G_inv @ f
    denom = 1.0 + f @ g
    if denom <= _kernels.SMW_FLOOR:
        raise NumericalBreakdown(f"Sherman-Morrison denominator {denom!r} at step {m}")
    state.G_inv -= np.outer(g, g) / denom
    direction = state.G_inv @ (state.A_bar @ state.r + state.b_bar)
    state.r = state.r + schedule.a(m) * (m + 1) * direction
    state.n = m + 1
    return state


@dataclass
class TrajectoryRun:
    n: np.ndarray          # 0..horizon
    r: np.ndarray          # r_n, shape (horizon + 1, M)
    err_H: np.ndarray      # ||r_n - r*||_H
    final: RunnerState
    seed: int
    diagnostics: dict | None = field(default=None)

    def write_csv(self, path) -> None:
        cols = ["n", "err_H"]
        series = [self.n, self.err_H]
        if self.diagnostics is not None:
            cols += ["delta_H", "eps1_H", "eps2_H"]
            series += [self.diagnostics[k] for k in ("delta_H", "eps1_H", "eps2_H")]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in zip(*series):
                w.writerow([str(int(row[0]))] + [format(float(v), ".17g") for v in row[1:]])


class BatchRunner:
    """A batch of independent trajectories advanced through the compiled kernel.

    Every trajectory owns its generator; the uniforms it consumes are exactly
    those of :func:`chain.sample_path` with the same seed.
    """

    def __init__(self, chain: MarkovRewardChain, basis: FeatureBasis, model: ExactModel,
                 schedule: StepSchedule, rho: float, seeds, x0=0, r0=None):
        self.chain = chain
        self.phi = np.ascontiguousarray(basis.phi)
        self.cost = np.ascontiguousarray(chain.cost)
        self.cdf = chain.cdf()
        self.model = model
        self.schedule = schedule
        self.rho = rho
        self.seeds = [int(s) for s in seeds]
        R, M = len(self.seeds), basis.M
        x0 = np.broadcast_to(np.asarray(x0, dtype=np.int64), (R,))
        if np.any(x0 < 0) or np.any(x0 >= chain.num_states):
            raise InvalidState("initial state out of range")
        self.x = x0.copy()
        self.gens = [path_generator(s) for s in self.seeds]
        self.r = np.zeros((R, M)) if r0 is None else np.tile(np.asarray(r0, float), (R, 1))
        self.z = np.zeros((R, M))
        self.A_bar = np.zeros((R, M, M))
        self.b_bar = np.zeros((R, M))
        self.G_inv = np.tile(np.eye(M) / rho, (R, 1, 1))
        self.n = 0
        self._H = np.ascontiguousarray(model.H)
        self._r_star = np.ascontiguousarray(model.r_star)

    @property
    def size(self) -> int:
        return len(self.seeds)

    def advance(self, steps: int, rows=None, record_r=False, record_snap=False):
        """Run ``steps`` updates for trajectories ``rows`` (a slice; all by default).

        Returns a dict with ``err`` (rows, steps) and optional ``r``/snapshots.
        The step counter is shared, so callers advancing subsets must cover all
        rows before calling :meth:`commit`.
        """
        rows = slice(None) if rows is None else rows
        idx = range(self.size)[rows]
        R, M = len(idx), self.phi.shape[1]
        u = np.empty((R, steps))
        for j, i in enumerate(idx):
            u[j] = self.gens[i].random(steps)
        err = np.empty((R, steps))
        r_out = np.empty((R, steps, M) if record_r else (0, 0, 0))
        snap_A = np.empty((R, steps, M, M) if record_snap else (0, 0, 0, 0))
        snap_b = np.empty((R, steps, M) if record_snap else (0, 0, 0))
        snap_G = np.empty((R, steps, M, M) if record_snap else (0, 0, 0, 0))
        views = [self.x[rows], self.r[rows], self.z[rows], self.A_bar[rows],
                 self.b_bar[rows], self.G_inv[rows]]
        # basic slices are views, so the kernel updates the batch state in place
        status = _kernels.lspe_block(
            self.phi, self.cost, self.cdf, self.model.alpha, self.model.alpha * self.model.lam,
            self.schedule.steps(self.n, self.n + steps), self.n, u, *views,
            self._H, self._r_star, err, r_out, snap_A, snap_b, snap_G, record_r, record_snap)
        if status != _kernels.OK:
            raise NumericalBreakdown("Sherman-Morrison denominator collapsed")
        out = {"err": err}
        if record_r:
            out["r"] = r_out
        if record_snap:
            out["A_bar"], out["b_bar"], out["G_inv"] = snap_A, snap_b, snap_G
        return out

    def commit(self, steps: int) -> None:
        self.n += steps

    def state(self, i: int) -> RunnerState:
        return RunnerState(self.n, self.r[i].copy(), self.z[i].copy(), self.A_bar[i].copy(),
                           self.b_bar[i].copy(), self.G_inv[i].copy(), self.rho)


def run_trajectory(chain, basis, model, schedule, rho, r0, horizon, seed,
                   diagnostics=False, x0=0) -> TrajectoryRun:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    batch = BatchRunner(chain, basis, model, schedule, rho, [seed], x0=x0, r0=r0)
    r_init = batch.r[0].copy()
    out = batch.advance(horizon, record_r=True, record_snap=diagnostics)
    batch.commit(horizon)
    geo = model.geometry
    r = np.vstack([r_init, out["r"][0]])
    err = np.concatenate([[geo.vec(r_init - model.r_star)], out["err"][0]])
    diag = None
    if diagnostics:
        n_terms = np.arange(1, horizon + 1)
        B_n_inv = out["G_inv"][0] * n_terms[:, None, None]
        d = diagnostic_norms(out["A_bar"][0], out["b_bar"][0], B_n_inv, model)
        # row n carries delta(n) etc., the terms that produce r_{n+1}; none at the horizon
        pad = np.array([np.nan])
        diag = {k: np.concatenate([v, pad]) for k, v in d.items()}
    return TrajectoryRun(np.arange(horizon + 1), r, err, batch.state(0), int(seed), diag)


def run_reference(model: ExactModel, schedule: StepSchedule, y0, n0: int, horizon: int):
    """Deterministic iterate y_{n+1} = y_n + a(n) B^{-1}(A y_n + b) from y_{n0} = y0.

    Returns (y, err_H) with rows for n = n0..horizon.
    """
    if horizon < n0:
        raise ValueError("horizon must be >= n0")
    drift = np.linalg.solve(model.B, model.A)
    offset = np.linalg.solve(model.B, model.b)
    a = schedule.steps(n0, horizon)
    y = np.empty((horizon - n0 + 1, model.M))
    y[0] = y0
    _kernels.reference_iterate(drift, offset, a, y)
    return y, model.geometry.vec(y - model.r_star)


@dataclass(frozen=True)
class Diagnostics:
    delta: np.ndarray
    eps1: np.ndarray
    eps2: np.ndarray
    delta_H: float
    eps1_H: float
    eps2_H: float


def diagnostics(state: RunnerState, model: ExactModel) -> Diagnostics:
    """delta(n), eps1(n), eps2(n) for the averages held by ``state``.

    ``state`` must have completed at least one step; the averages then index
    n = state.n - 1.
    """
    if state.n < 1:
        raise ValueError("diagnostics need at least one completed step")
    B_n_inv = state.B_n_inv()
    B_inv = model.B_inv
    dBinv = B_n_inv - B_inv
    delta = dBinv @ state.A_bar + B_inv @ (state.A_bar - model.A)
    eps1 = B_n_inv @ (state.A_bar - model.A) + dBinv @ model.A
    eps2 = B_n_inv @ (state.b_bar - model.b) + dBinv @ model.b
    geo = model.geometry
    return Diagnostics(delta, eps1, eps2, float(geo.op(delta)), float(geo.op(eps1)),
                       float(geo.vec(eps2)))


def diagnostic_norms(A_bar, b_bar, B_n_inv, model: ExactModel) -> dict:
    """Batched H-norms of delta, eps1, eps2 over a leading axis."""
    B_inv = model.B_inv
    dBinv = B_n_inv - B_inv
    dA = A_bar - model.A
    delta = dBinv @ A_bar + B_inv @ dA
    eps1 = B_n_inv @ dA + dBinv @ model.A
    eps2 = np.einsum("...ij,...j->...i", B_n_inv, b_bar - model.b) + dBinv @ model.b
    geo = model.geometry
    return {"delta_H": geo.op(delta), "eps1_H": geo.op(eps1), "eps2_H": geo.vec(eps2)}


def chi_weights(schedule: StepSchedule, n0: int, m: int) -> np.ndarray:
    """chi(m, k+1) a(k) for k = n0..m."""
    a = schedule.steps(n0, m + 1)
    one_minus = 1.0 - a
    # chi(m, k+1) = prod_{l=k+1}^{m} (1 - a(l)), built from the right
    tail = np.ones_like(a)
    if a.size > 1:
        tail[:-1] = np.cumprod(one_minus[:0:-1])[::-1]
    return tail * a


def decay_products(schedule: StepSchedule, n: int, m: int, beta: float) -> tuple[float, float]:
    """chi(n, m) = prod_{k=m}^{n} (1 - a(k)) and psi(n, m) = prod_{k=m}^{n-1} (1 - (1-beta) a(k))."""
    chi = float(np.prod(1.0 - schedule.steps(m, n + 1))) if n >= m else 1.0
    psi = float(np.prod(1.0 - (1.0 - beta) * schedule.steps(m, n))) if n > m else 1.0
    return chi, psi
