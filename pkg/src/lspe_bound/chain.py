"""Finite Markov reward chains: stationary law, TV mixing profile, sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

from . import _kernels
from .errors import (DimensionMismatch, InvalidState, NotIrreducible,
                     NotMixedByTmax, NotStochastic)

ROW_SUM_TOL = 1e-12
STATIONARY_TOL = 1e-12
DEFAULT_T_MAX = 200


@dataclass(frozen=True)
class MarkovRewardChain:
    """Transition matrix ``transition[i, j] = p(j|i)`` with per-state cost k(i)."""

    transition: np.ndarray
    cost: np.ndarray

    def __post_init__(self):
        P = np.array(self.transition, dtype=float)
        k = np.array(self.cost, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
            raise DimensionMismatch(f"transition must be square, got shape {P.shape}")
        if k.shape != (P.shape[0],):
            raise DimensionMismatch(f"cost has shape {k.shape}, expected ({P.shape[0]},)")
        if not np.all(np.isfinite(P)) or P.min() < 0.0 or P.max() > 1.0:
            raise NotStochastic("transition entries must lie in [0, 1]")
        bad = np.flatnonzero(np.abs(P.sum(axis=1) - 1.0) > ROW_SUM_TOL)
        if bad.size:
            raise NotStochastic(f"rows {bad.tolist()} do not sum to 1")
        P.setflags(write=False)
        k.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "cost", k)

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def k_max(self) -> float:
        return float(np.abs(self.cost).max())

    def is_irreducible(self) -> bool:
        ncomp, _ = connected_components(self.transition > 0, directed=True, connection="strong")
        return ncomp == 1

    def cdf(self) -> np.ndarray:
        """Row-wise cumulative distribution, pinned to exactly 1 from the last positive entry on."""
        c = np.cumsum(self.transition, axis=1)
        for i, row in enumerate(self.transition):
            last = np.flatnonzero(row > 0)[-1]
            c[i, last:] = 1.0
        return c


@dataclass(frozen=True)
class StationaryInfo:
    pi: np.ndarray

    @property
    def D(self) -> np.ndarray:
        return np.diag(self.pi)


@dataclass(frozen=True)
class MixingProfile:
    d_values: np.ndarray  # d(1), ..., d(t_max)
    t_max_used: int
    tau_min: float | None = None


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray  # X_0 .. X_{n+1}
    seed: int


def load_chain(path) -> MarkovRewardChain:
    doc = json.loads(Path(path).read_text())
    return MarkovRewardChain(doc["transition"], doc["cost"])


def stationary_distribution(chain: MarkovRewardChain) -> StationaryInfo:
    """Solve pi P = pi with the normalisation row appended to the system."""
    if not chain.is_irreducible():
        raise NotIrreducible("positive-entry graph of the transition matrix is not strongly connected")
    s = chain.num_states
    P = chain.transition
    system = np.vstack([P.T - np.eye(s), np.ones((1, s))])
    rhs = np.zeros(s + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    # one step of power iteration cleans up the last few ulps
    pi = pi @ P
    pi = pi / pi.sum()
    resid = np.abs(pi @ P - pi).max()
    if resid > STATIONARY_TOL or pi.min() <= 0:
        raise NotIrreducible(f"stationary solve failed (residual {resid:.3e})")
    pi.setflags(write=False)
    return StationaryInfo(pi)


def tv_distance(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatch(f"{p.shape} vs {q.shape}")
    return 0.5 * float(np.abs(p - q).sum())


def mixing_profile(chain: MarkovRewardChain, pi, t_max: int = DEFAULT_T_MAX) -> MixingProfile:
    """d(t) = max_x TV(P^t(x, .), pi) for t = 1..t_max."""
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    pi = _as_pi(pi)
    P = chain.transition
    Pt = P.copy()
    d = np.empty(t_max)
    for t in range(t_max):
        d[t] = 0.5 * np.abs(Pt - pi).sum(axis=1).max()
        Pt = Pt @ P
    return MixingProfile(d, t_max)


def tau_min(profile: MixingProfile) -> float:
    """Paulin's tau_min = inf_{0 <= eps < 1} tau(eps) ((2 - eps)/(1 - eps))^2.

    tau(.) only jumps at the values d(t), so the infimum is searched over that
    candidate set (plus 0 if the chain mixes exactly).
    """
    d = np.asarray(profile.d_values, dtype=float)
    if d[-1] >= 1.0 - 1e-15:
        raise NotMixedByTmax(f"d(t_max={profile.t_max_used}) = {d[-1]!r}; cannot certify tau_min")
    eps = d[d < 1.0]
    if np.any(d == 0.0):
        eps = np.append(eps, 0.0)
    best = np.inf
    for e in np.unique(eps):
        tau_e = int(np.argmax(d <= e)) + 1
        best = min(best, tau_e * ((2.0 - e) / (1.0 - e)) ** 2)
    return float(best)


def mixing(chain: MarkovRewardChain, pi=None, t_max: int = DEFAULT_T_MAX) -> MixingProfile:
    """Profile with tau_min filled in."""
    if pi is None:
        pi = stationary_distribution(chain)
    prof = mixing_profile(chain, pi, t_max)
    return MixingProfile(prof.d_values, prof.t_max_used, tau_min(prof))


def path_generator(seed: int) -> np.random.Generator:
    """Counter-based stream for one trajectory."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def trajectory_seed(master_seed: int, index: int, stream: int = 0) -> int:
    """64-bit seed for trajectory ``index`` of an ensemble; independent of scheduling.

    ``stream`` separates ensembles drawn from the same master seed.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(stream), int(index)))
    return int(ss.generate_state(1, np.uint64)[0])


def sample_path(chain: MarkovRewardChain, x0: int, n: int, seed: int) -> Trajectory:
    """Sample X_0 = x0, ..., X_{n+1} (n + 1 transitions)."""
    if not 0 <= x0 < chain.num_states:
        raise InvalidState(f"x0={x0} outside 0..{chain.num_states - 1}")
    if n < 0:
        raise ValueError("n must be >= 0")
    u = path_generator(seed).random(n + 1)
    states = np.empty(n + 2, dtype=np.int64)
    _kernels.walk(chain.cdf(), int(x0), u, states)
    return Trajectory(states, int(seed))


def time_marginals(chain: MarkovRewardChain, initial, n: int) -> np.ndarray:
    """Rows mu_0, ..., mu_{n+1} with mu_t = initial P^t."""
    mu = np.asarray(initial, dtype=float)
    if mu.shape != (chain.num_states,):
        raise DimensionMismatch(f"initial has shape {mu.shape}")
    out = np.empty((n + 2, chain.num_states))
    out[0] = mu
    for t in range(1, n + 2):
        out[t] = out[t - 1] @ chain.transition
    return out


def _as_pi(pi) -> np.ndarray:
    if isinstance(pi, StationaryInfo):
        return pi.pi
    return np.asarray(pi, dtype=float)
