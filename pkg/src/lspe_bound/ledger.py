"""Constants of the concentration bound, tail bounds and the theorem envelope.

Closed-form constants are evaluated straight from their formulas.  The bias
constants C1-C3 and the uniform bound C' on ||B_n^{-1}||_H have no closed form
here; they are estimated (exact expectations for the biases, an ensemble sup for
C') and tagged ``estimated``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincc, gammaln

from . import _kernels
from .chain import MarkovRewardChain, StationaryInfo, stationary_distribution, time_marginals, trajectory_seed
from .errors import (ConditionViolated, HorizonTooLarge, MissingConstant,
                     NonPlateau, UnknownSelector)
from .model import ExactModel, FeatureBasis, HGeometry
from .runner import DEFAULT_RHO, BatchRunner, StepSchedule

N_ORACLE = 5000
C_PRIME_SAFETY = 1.25
ESTIMATION_STREAM = 1
M_SUP = 10**5
M_SUP_CEILING = 10**7


@dataclass(frozen=True)
class Entry:
    value: float
    provenance: str  # "closed_form" | "estimated"
    formula_id: str


@dataclass
class ConstantLedger:
    """Named constants with provenance; ``ledger["K1"]`` gives the value."""

    entries: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def put(self, name, value, provenance, formula_id):
        self.entries[name] = Entry(float(value), provenance, formula_id)

    def __getitem__(self, name) -> float:
        try:
            return self.entries[name].value
        except KeyError:
            raise MissingConstant(name) from None

    def __contains__(self, name) -> bool:
        return name in self.entries

    def to_dict(self) -> dict:
        return {
            "entries": {k: {"value": e.value, "provenance": e.provenance, "formula_id": e.formula_id}
                        for k, e in sorted(self.entries.items())},
            "notes": _jsonable(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc) -> "ConstantLedger":
        led = cls()
        for k, e in doc["entries"].items():
            led.put(k, e["value"], e["provenance"], e["formula_id"])
        led.notes = dict(doc.get("notes", {}))
        return led


# ---------------------------------------------------------------- closed forms

def derived_constants(model: ExactModel, basis: FeatureBasis, chain: MarkovRewardChain,
                      tau_min: float) -> dict:
    """Bounded-difference coefficients d1-d3, gamma1-gamma3, m1 and C5."""
    if not np.isfinite(tau_min) or tau_min <= 0:
        raise ValueError("tau_min must be finite and positive")
    al = model.alpha * model.lam
    pm, km = basis.phi_max, chain.k_max
    geo = model.geometry
    d1 = 2.0 * pm * km * (1.0 + 2.0 * al / (1.0 - al))
    d2 = 2.0 * pm**2
    d3 = 2.0 * pm**2 * (1.0 + 2.0 * (1.0 + al) / (1.0 - al))
    m1 = float(geo.vec(basis.phi).max())
    return {
        "d1": d1,
        "d2": d2,
        "d3": d3,
        "gamma1": geo.lam_max * d1**2 * tau_min / 2.0,
        "gamma2": geo.lam_max * d3**2 * tau_min / (2.0 * geo.lam_min),
        "gamma3": geo.lam_max * d2**2 * tau_min / (2.0 * geo.lam_min),
        "m1": m1,
        "C5": m1**2 * (1.0 + model.alpha) / (1.0 - al),
    }


FORMULAS = {
    "d1": "2*phi_max*k_max*(1 + 2*al/(1 - al)), al = alpha*lambda",
    "d2": "2*phi_max^2",
    "d3": "2*phi_max^2*(1 + 2*(1 + al)/(1 - al))",
    "gamma1": "lam_max(H)*d1^2*tau_min/2",
    "gamma2": "lam_max(H)*d3^2*tau_min/(2*lam_min(H))",
    "gamma3": "lam_max(H)*d2^2*tau_min/(2*lam_min(H))",
    "m1": "max_i ||phi(i)||_H",
    "C5": "m1^2*(1 + alpha)/(1 - al)",
    "C1": "max_{init, n<=N} (n+1)*||E[b_n] - b||_H",
    "C2": "max_{init, n<=N} (n+1)*||E[A_n] - A||_H",
    "C3": "max_{init, n<=N} (n+1)*||E[B_n] - B||_H",
    "C_prime": "safety * sup_{ensemble, n<=N} ||B_n^{-1}||_H",
    "C4": "C_prime*||B^{-1}||_H*C3",
    "K1": "C5*C4 + ||B^{-1}||_H*C2",
    "K2": "max(4*C5^2*C_prime^2*||B^{-1}||_H^2*gamma3, 4*||B^{-1}||_H^2*gamma2)",
    "K5": "C2*C_prime + C4*||A||_H",
    "K6": "C1*C_prime + C4*||b||_H",
    "K7": "max(4*C_prime^2*gamma2, 4*C_prime^2*||B^{-1}||_H^2*gamma3*||A||_H^2)",
    "K8": "max(4*C_prime^2*gamma1, 4*C_prime^2*||B^{-1}||_H^2*gamma3*||b||_H^2)",
    "K4": "max(K7, K8)",
    "K3_prime": "max(2, 2*||B^{-1}b||_H/(1-beta), K5, K5*||B^{-1}b||_H/(1-beta) + K6)",
    "K3_star": "sup_{n0<=m<=M_sup} sum_k chi(m,k+1)a(k)/(k+1)^(1/2-theta) / m^(1/2+theta-mu2)",
    "K3_dstar": "sup_{n0<=m<=M_sup} sum_k chi(m,k+1)a(k)/(k+1) / m^(-mu2)",
    "K3": "K3_prime*max(K3_star, K3_dstar)",
    "tau_min": "inf_eps tau(eps)*((2-eps)/(1-eps))^2",
    "beta": "sqrt(1 - 1/lam_max(H))",
    "lam_max_H": "largest eigenvalue of H",
    "lam_min_H": "smallest eigenvalue of H",
    "norm_B_inv": "||B^{-1}||_H",
    "norm_A": "||A||_H",
    "norm_b": "||b||_H",
    "norm_B_inv_b": "||B^{-1}b||_H",
}


def model_norms(model: ExactModel) -> dict:
    geo = model.geometry
    B_inv = model.B_inv
    return {
        "norm_B_inv": float(geo.op(B_inv)),
        "norm_A": float(geo.op(model.A)),
        "norm_b": float(geo.vec(model.b)),
        "norm_B_inv_b": float(geo.vec(B_inv @ model.b)),
        "lam_max_H": geo.lam_max,
        "lam_min_H": geo.lam_min,
        "beta": model.beta,
    }


# ---------------------------------------------------------- exact expectations

def expectation_curves(chain: MarkovRewardChain, basis: FeatureBasis, initial, alpha: float,
                       lam: float, n_max: int, rho: float = DEFAULT_RHO):
    """E[b_n], E[A_n], E[B_n] for n = 0..n_max when X_0 ~ ``initial``.

    The trace mass W_m(j) = E[z_m 1{X_m = j}] obeys
    W_m = alpha*lam*P^T W_{m-1} + diag(mu_m) Phi, so every expectation is a
    contraction of W_m with k, P Phi or Phi.  Cost O(n s M^2).
    """
    if n_max > N_ORACLE:
        raise HorizonTooLarge(f"n={n_max} exceeds the oracle limit {N_ORACLE}")
    Phi = basis.phi
    P = chain.transition
    M = basis.M
    mu = time_marginals(chain, initial, n_max)
    drift = alpha * (P @ Phi) - Phi
    W = np.zeros((chain.num_states, M))
    sb = np.zeros((n_max + 1, M))
    sA = np.zeros((n_max + 1, M, M))
    sB = np.zeros((n_max + 1, M, M))
    for m in range(n_max + 1):
        W = alpha * lam * (P.T @ W) + mu[m][:, None] * Phi
        sb[m] = W.T @ chain.cost
        sA[m] = W.T @ drift
        sB[m] = (Phi.T * mu[m]) @ Phi
    counts = np.arange(1, n_max + 2, dtype=float)
    Eb = np.cumsum(sb, axis=0) / counts[:, None]
    EA = np.cumsum(sA, axis=0) / counts[:, None, None]
    EB = (np.cumsum(sB, axis=0) + rho * np.eye(M)) / counts[:, None, None]
    return Eb, EA, EB


def exact_expectations(chain, basis, initial, alpha, lam, n, rho: float = DEFAULT_RHO):
    Eb, EA, EB = expectation_curves(chain, basis, initial, alpha, lam, n, rho)
    return Eb[-1], EA[-1], EB[-1]


# ------------------------------------------------------ cited-constant oracles

@dataclass
class CitedEstimate:
    C1: float
    C2: float
    C3: float
    C4: float
    C_prime: float
    plateau: dict
    certified: bool


def _scaled_bias_curves(chain, basis, model, rho, n_max, initials):
    geo = model.geometry
    n1 = np.arange(1, n_max + 2, dtype=float)
    curves = {"C1": np.zeros(n_max + 1), "C2": np.zeros(n_max + 1), "C3": np.zeros(n_max + 1)}
    for init in initials:
        Eb, EA, EB = expectation_curves(chain, basis, init, model.alpha, model.lam, n_max, rho)
        curves["C1"] = np.maximum(curves["C1"], n1 * geo.vec(Eb - model.b))
        curves["C2"] = np.maximum(curves["C2"], n1 * geo.op(EA - model.A))
        curves["C3"] = np.maximum(curves["C3"], n1 * geo.op(EB - model.B))
    return curves


def sup_B_inv_norm(chain, basis, model, schedule, rho, n_max, ensemble, master_seed=0,
                   block=512) -> float:
    """Observed sup over trajectories and n <= n_max of ||B_n^{-1}||_H.

    Starting states cycle through the state space.
    """
    seeds = [trajectory_seed(master_seed, i, ESTIMATION_STREAM) for i in range(ensemble)]
    x0 = np.arange(ensemble) % chain.num_states
    batch = BatchRunner(chain, basis, model, schedule, rho, seeds, x0=x0)
    geo = model.geometry
    best = 0.0
    done = 0
    while done <= n_max:
        steps = min(block, n_max + 1 - done)
        out = batch.advance(steps, record_snap=True)
        batch.commit(steps)
        terms = np.arange(done + 1, done + steps + 1, dtype=float)
        best = max(best, float(geo.op(out["G_inv"] * terms[None, :, None, None]).max()))
        done += steps
    return best


def estimate_cited_constants(chain, basis, model, schedule, rho=DEFAULT_RHO, n_max=2000,
                             ensemble=200, master_seed=0, pi=None,
                             safety=C_PRIME_SAFETY) -> CitedEstimate:
    if ensemble < 100:
        raise ValueError("C' needs an ensemble of at least 100 trajectories")
    if pi is None:
        pi = stationary_distribution(chain)
    pi = pi.pi if isinstance(pi, StationaryInfo) else np.asarray(pi)
    initials = list(np.eye(chain.num_states)) + [pi]
    curves = _scaled_bias_curves(chain, basis, model, rho, n_max, initials)
    plateau = {}
    certified = True
    for name, curve in curves.items():
        peak = int(np.argmax(curve))
        tail = curve[peak:]
        # still climbing if the last half of the sweep gained more than 1e-6 relative
        rising = bool(curve[-1] - curve[n_max // 2] > 1e-6 * max(curve[peak], 1e-300)
                      and peak >= n_max - max(1, n_max // 100))
        plateau[name] = {"argmax_n": peak, "max": float(curve[peak]),
                         "value_at_n_max": float(curve[-1]),
                         "tail_monotone": bool(np.all(np.diff(tail) <= 1e-12 * max(1.0, curve[peak]))),
                         "rising_at_n_max": bool(rising)}
        if rising:
            certified = False
            warnings.warn(f"{name}: scaled bias still rising at N_max={n_max}", NonPlateau)
    c_prime = safety * sup_B_inv_norm(chain, basis, model, schedule, rho, n_max, ensemble,
                                      master_seed)
    C1, C2, C3 = (plateau[k]["max"] for k in ("C1", "C2", "C3"))
    norm_B_inv = float(model.geometry.op(model.B_inv))
    return CitedEstimate(C1=C1, C2=C2, C3=C3, C4=c_prime * norm_B_inv * C3, C_prime=c_prime,
                         plateau=plateau, certified=certified)


# ---------------------------------------------------------------- K constants

def k_constants(c: dict) -> dict:
    """K1, K2, K4-K8 and K3' from the C's, gamma's and model norms in ``c``."""
    need = ["C1", "C2", "C4", "C5", "C_prime", "gamma1", "gamma2", "gamma3",
            "norm_B_inv", "norm_A", "norm_b", "norm_B_inv_b", "beta"]
    for name in need:
        if name not in c:
            raise MissingConstant(name)
    Bi, Cp = c["norm_B_inv"], c["C_prime"]
    K1 = c["C5"] * c["C4"] + Bi * c["C2"]
    K2 = max(4 * c["C5"]**2 * Cp**2 * Bi**2 * c["gamma3"], 4 * Bi**2 * c["gamma2"])
    K5 = c["C2"] * Cp + c["C4"] * c["norm_A"]
    K6 = c["C1"] * Cp + c["C4"] * c["norm_b"]
    K7 = max(4 * Cp**2 * c["gamma2"], 4 * Cp**2 * Bi**2 * c["gamma3"] * c["norm_A"]**2)
    K8 = max(4 * Cp**2 * c["gamma1"], 4 * Cp**2 * Bi**2 * c["gamma3"] * c["norm_b"]**2)
    slack = c["norm_B_inv_b"] / (1.0 - c["beta"])
    K3p = max(2.0, 2.0 * slack, K5, K5 * slack + K6)
    return {"K1": K1, "K2": K2, "K5": K5, "K6": K6, "K7": K7, "K8": K8,
            "K4": max(K7, K8), "K3_prime": K3p}


# ------------------------------------------------------- schedule functionals

class ScheduleFunctions:
    """xi_n(eps), partial stepsize sums b_m(n) and the suprema K3*, K3**.

    The suprema are swept over m in [n0, m_sup]; when the peak is too close to
    the end of the sweep it is extended tenfold, up to ``M_SUP_CEILING``.
    """

    def __init__(self, schedule: StepSchedule, n0: int, m_sup: int = M_SUP, k3_prime=None):
        if n0 < 2:
            raise ValueError("n0 must be >= 2")
        self.schedule = schedule
        self.n0 = n0
        self._cum = None
        m_sup = max(m_sup, 10 * n0)
        while True:
            self.m_sup = m_sup
            star, dstar = self._sweep(m_sup)
            if (star[2]["certified"] and dstar[2]["certified"]) or m_sup >= M_SUP_CEILING:
                break
            m_sup = min(10 * m_sup, M_SUP_CEILING)
        (self.K3_star, self.ratio_star, self.star_report) = star
        (self.K3_dstar, self.ratio_dstar, self.dstar_report) = dstar
        self.certified = self.star_report["certified"] and self.dstar_report["certified"]
        for name, rep in (("K3_star", self.star_report), ("K3_dstar", self.dstar_report)):
            if not rep["certified"]:
                warnings.warn(f"{name}: ratio still growing at m={self.m_sup}; "
                              "supremum not certified", NonPlateau)
        self.K3 = None if k3_prime is None else k3_prime * max(self.K3_star, self.K3_dstar)

    def _sweep(self, m_sup):
        mu2, th = self.schedule.mu2, self.schedule.theta
        m = np.arange(self.n0, m_sup + 1, dtype=float)
        a = self.schedule.a(m)
        s_star = _kernels.chi_weighted_sums(a, (m + 1.0) ** -(0.5 - th))
        s_dstar = _kernels.chi_weighted_sums(a, 1.0 / (m + 1.0))
        r_star = s_star / m ** (0.5 + th - mu2)
        r_dstar = s_dstar * m ** mu2
        v_star, rep_star = _certified_sup(r_star, m)
        v_dstar, rep_dstar = _certified_sup(r_dstar, m)
        return (v_star, r_star, rep_star), (v_dstar, r_dstar, rep_dstar)

    def xi(self, n, eps):
        n1 = np.asarray(n, dtype=float) - 1.0
        th, mu2 = self.schedule.theta, self.schedule.mu2
        return eps * n1 ** (0.5 + th - mu2) + n1 ** (-mu2)

    def _cumulative(self, upto: int) -> np.ndarray:
        if self._cum is None or self._cum.size <= upto + 1:
            size = max(upto + 2, 2 * (0 if self._cum is None else self._cum.size))
            self._cum = np.concatenate([[0.0], np.cumsum(self.schedule.steps(0, size))])
        return self._cum

    def b_sum(self, m, n):
        """sum_{k=m}^{n} a(k); zero when n < m."""
        m = np.asarray(m)
        n = np.asarray(n)
        cum = self._cumulative(int(np.max(n)) + 1)
        return cum[np.maximum(n + 1, m)] - cum[m]


def _certified_sup(ratio, m):
    """Supremum of a swept ratio, certified when the peak sits well inside the
    sweep with a non-increasing tail, or the final decade is flat."""
    peak = int(np.argmax(ratio))
    value = float(ratio[peak])
    after = ratio[peak:]
    decreasing = bool(np.all(np.diff(after) <= 1e-12 * value))
    interior = bool(m[peak] <= 0.5 * m[-1] and decreasing)
    last_decade = ratio[m >= m[-1] / 10.0]
    spread = float((last_decade.max() - last_decade.min()) / max(value, 1e-300))
    flat = spread < 1e-3
    return value, {"argmax_m": int(m[peak]), "tail_spread": spread, "interior": interior,
                   "flat_tail": bool(flat), "certified": bool(interior or flat)}


def schedule_functions(schedule, n0, m_sup=M_SUP, k3_prime=None) -> ScheduleFunctions:
    return ScheduleFunctions(schedule, n0, m_sup, k3_prime)


# ------------------------------------------------------------------ tail bounds

def paulin_tail(c_norm_sq: float, tau_min: float, t):
    """2 exp(-2 t^2 / (||c||^2 tau_min)); not clamped at 1."""
    return 2.0 * np.exp(-2.0 * np.asarray(t, dtype=float) ** 2 / (c_norm_sq * tau_min))


SELECTORS = ("b", "A", "B", "Binv", "delta", "eps_pair")


def _gauss_tail(prefactor, num, denom):
    # a zero variance proxy means the statistic is deterministic: no failure mass
    if denom == 0.0:
        return 0.0
    return prefactor * math.exp(-num / denom)


def lemma_tail_bounds(ledger, M: int, n: int, dev: float, which: str):
    """(threshold, failure probability) of one deviation statement at step n.

    ``dev`` is the free deviation parameter: ``a`` for b/A/B/Binv, ``delta`` for
    delta, ``epsilon`` for eps_pair (whose threshold is an (eps1, eps2) pair).
    """
    n1 = n + 1.0
    L = ledger
    if which == "b":
        return dev + L["C1"] / n1, _gauss_tail(2 * M, n1 * dev**2, M * L["gamma1"])
    if which == "A":
        return dev + L["C2"] / n1, _gauss_tail(2 * M**2, n1 * dev**2, M**2 * L["gamma2"])
    if which == "B":
        return dev + L["C3"] / n1, _gauss_tail(2 * M**2, n1 * dev**2, M**2 * L["gamma3"])
    if which == "Binv":
        denom = M**2 * L["C_prime"]**2 * L["norm_B_inv"]**2 * L["gamma3"]
        return dev + L["C4"] / n1, _gauss_tail(2 * M**2, n1 * dev**2, denom)
    if which == "delta":
        return dev + L["K1"] / n1, _gauss_tail(4 * M**2, n1 * dev**2, M**2 * L["K2"])
    if which == "eps_pair":
        th = L["theta"]
        base = dev / n1 ** (0.5 - th)
        thr = (base + L["K5"] / n1, base + L["K6"] / n1)
        return thr, _gauss_tail(8 * M**2, n1 ** (2 * th) * dev**2, M**2 * L["K4"])
    raise UnknownSelector(f"{which!r}; expected one of {SELECTORS}")


def deviation_for_probability(ledger, M: int, n: int, p: float, which: str) -> float:
    """Deviation parameter at which :func:`lemma_tail_bounds` reports failure probability p."""
    L = ledger
    power = 1.0
    if which == "b":
        prefactor, denom = 2 * M, M * L["gamma1"]
    elif which == "A":
        prefactor, denom = 2 * M**2, M**2 * L["gamma2"]
    elif which == "B":
        prefactor, denom = 2 * M**2, M**2 * L["gamma3"]
    elif which == "Binv":
        prefactor, denom = 2 * M**2, M**2 * L["C_prime"]**2 * L["norm_B_inv"]**2 * L["gamma3"]
    elif which == "delta":
        prefactor, denom = 4 * M**2, M**2 * L["K2"]
    elif which == "eps_pair":
        prefactor, denom, power = 8 * M**2, M**2 * L["K4"], 2 * L["theta"]
    else:
        raise UnknownSelector(f"{which!r}; expected one of {SELECTORS}")
    if not 0 < p < prefactor:
        raise ValueError(f"target probability must lie in (0, {prefactor})")
    return math.sqrt(denom * math.log(prefactor / p) / (n + 1.0) ** power)


# ------------------------------------------------------------------ theorem

@dataclass
class TheoremInputs:
    n0: int
    n: int
    delta: float
    epsilon: float
    schedule: StepSchedule
    ledger: ConstantLedger
    r_n0_norm_H: float
    r_n0_err_H: float
    functions: ScheduleFunctions | None = None


@dataclass
class TheoremResult:
    rhs: float
    success_prob_per_n: float
    success_prob_uniform: float
    failure_per_n_raw: float
    failure_uniform_raw: float
    vacuous_per_n: bool
    vacuous_uniform: bool
    tails: dict


def standing_margin(ledger, delta: float, n0: int) -> float:
    """1 - (beta + delta + K1/(n0+1)); must be positive."""
    return 1.0 - (ledger["beta"] + delta + ledger["K1"] / (n0 + 1.0))


def smallest_n0(ledger, delta: float, n_min: int = 2) -> int:
    """Smallest n0 >= n_min with beta + delta + K1/(n0+1) < 1."""
    gap = 1.0 - ledger["beta"] - delta
    if gap <= 0:
        raise ConditionViolated(f"beta + delta = {ledger['beta'] + delta} >= 1")
    n0 = max(n_min, int(math.floor(ledger["K1"] / gap)))
    while standing_margin(ledger, delta, n0) <= 0:
        n0 += 1
    return n0


class TheoremEnvelope:
    """rhs(n) = u(n) ||r_{n0} - r*||_H + v(n) (||r_{n0}||_H + 1) and its failure probabilities."""

    def __init__(self, ledger, schedule, n0, delta, epsilon, functions=None):
        margin = standing_margin(ledger, delta, n0)
        if margin <= 0:
            raise ConditionViolated(f"beta + delta + K1/(n0+1) = {1 - margin} >= 1")
        self.ledger = ledger
        self.n0 = n0
        self.delta = delta
        self.epsilon = epsilon
        self.margin = margin
        self.fn = functions or ScheduleFunctions(schedule, n0, k3_prime=ledger["K3_prime"])
        K3 = self.fn.K3 if self.fn.K3 is not None else ledger["K3_prime"] * max(self.fn.K3_star, self.fn.K3_dstar)
        self.K3 = K3
        M = int(ledger["M"])
        self.prefactor = 8.0 * M**2
        self.c_delta = delta**2 / (M**2 * ledger["K2"])
        self.c_eps = epsilon**2 / (M**2 * ledger["K4"])
        self.two_theta = 2.0 * schedule.theta

    def u(self, n):
        n = np.asarray(n)
        return np.exp(-(1.0 - self.ledger["beta"]) * self.fn.b_sum(self.n0, n - 1))

    def v(self, n):
        return self.K3 * self.fn.xi(n, self.epsilon) / self.margin

    def rhs(self, n, err0, norm0):
        return self.u(n) * err0 + self.v(n) * (norm0 + 1.0)

    def failure_per_n(self, n):
        """Raw 8M^2 sum_{k=n0}^{n-1}(...) for each n (zero at n = n0)."""
        n = np.atleast_1d(np.asarray(n, dtype=np.int64))
        top = int(n.max())
        k1 = np.arange(self.n0 + 1, top + 1, dtype=float)  # k + 1 for k = n0..top-1
        terms = np.exp(-k1 * self.c_delta) + np.exp(-(k1 ** self.two_theta) * self.c_eps)
        cum = np.concatenate([[0.0], np.cumsum(terms)])
        return self.prefactor * cum[n - self.n0]

    def failure_uniform(self):
        """Raw 8M^2 sum_{k=n0}^{inf}(...) and the parts it is built from."""
        geo = _geometric_tail(self.c_delta, self.n0 + 1)
        stretched, explicit_terms, tail = _stretched_tail(self.c_eps, self.two_theta, self.n0 + 1)
        total = self.prefactor * (geo + stretched)
        return total, {"geometric_series": geo, "stretched_series": stretched,
                       "stretched_explicit_terms": explicit_terms,
                       "stretched_integral_tail": tail}


def _geometric_tail(c: float, j0: int) -> float:
    """sum_{j>=j0} exp(-c j) in closed form."""
    if c <= 0:
        return math.inf
    return math.exp(-c * j0) / -math.expm1(-c)


def _stretched_tail(c: float, p: float, j0: int, chunk: int = 1 << 16, max_terms: int = 10**6):
    """Upper bound on sum_{j>=j0} exp(-c j^p): explicit terms until they drop below
    1e-16 (or max_terms), then the integral comparison int_J^inf exp(-c x^p) dx."""
    if c <= 0:
        return math.inf, 0, math.inf
    total = 0.0
    j = j0
    while j - j0 < max_terms:
        js = np.arange(j, j + chunk, dtype=float)
        terms = np.exp(-c * js**p)
        total += float(terms.sum())
        j += chunk
        if terms[-1] < 1e-16:
            break
    # terms up to j-1 were summed; the remainder is bounded by the integral from j-1
    s = 1.0 / p
    x = c * (j - 1.0) ** p
    q = gammaincc(s, x)
    if q == 0.0:
        tail = 0.0
    else:
        tail = math.exp(-math.log(p) - s * math.log(c) + gammaln(s) + math.log(q))
    return total + tail, j - j0, tail


def theorem_evaluate(inputs: TheoremInputs) -> TheoremResult:
    if inputs.n < inputs.n0:
        raise ValueError("need n >= n0")
    env = TheoremEnvelope(inputs.ledger, inputs.schedule, inputs.n0, inputs.delta,
                          inputs.epsilon, inputs.functions)
    rhs = float(env.rhs(inputs.n, inputs.r_n0_err_H, inputs.r_n0_norm_H))
    per_n = float(env.failure_per_n(inputs.n)[0])
    uniform, tails = env.failure_uniform()
    return TheoremResult(
        rhs=rhs,
        success_prob_per_n=max(0.0, 1.0 - per_n),
        success_prob_uniform=max(0.0, 1.0 - uniform),
        failure_per_n_raw=per_n,
        failure_uniform_raw=uniform,
        vacuous_per_n=per_n >= 1.0,
        vacuous_uniform=uniform >= 1.0,
        tails=tails,
    )


# ------------------------------------------------------------------ assembly

def build_ledger(chain, basis, model, schedule, tau_min, rho=DEFAULT_RHO, n_max=2000,
                 ensemble=200, master_seed=0, pi=None) -> ConstantLedger:
    """Everything except the n0-dependent K3*, K3**, K3 (see :func:`attach_schedule`)."""
    led = ConstantLedger()
    for name, val in derived_constants(model, basis, chain, tau_min).items():
        led.put(name, val, "closed_form", FORMULAS[name])
    for name, val in model_norms(model).items():
        led.put(name, val, "closed_form", FORMULAS[name])
    led.put("tau_min", tau_min, "closed_form", FORMULAS["tau_min"])
    cited = estimate_cited_constants(chain, basis, model, schedule, rho, n_max, ensemble,
                                     master_seed, pi)
    for name in ("C1", "C2", "C3", "C_prime"):
        led.put(name, getattr(cited, name), "estimated", FORMULAS[name])
    led.put("C4", cited.C4, "closed_form", FORMULAS["C4"])
    led.notes["cited_plateau"] = cited.plateau
    led.notes["cited_certified"] = cited.certified
    led.notes["estimation"] = {"n_max": n_max, "ensemble": ensemble, "master_seed": master_seed,
                               "rho": rho, "c_prime_safety": C_PRIME_SAFETY}
    values = {k: e.value for k, e in led.entries.items()}
    for name, val in k_constants(values).items():
        led.put(name, val, "closed_form", FORMULAS[name])
    led.put("M", basis.M, "closed_form", "number of features")
    led.put("theta", schedule.theta, "closed_form", "schedule parameter")
    return led


def attach_schedule(ledger: ConstantLedger, schedule, n0, m_sup=M_SUP) -> ScheduleFunctions:
    fn = ScheduleFunctions(schedule, n0, m_sup, ledger["K3_prime"])
    ledger.put("K3_star", fn.K3_star, "estimated", FORMULAS["K3_star"])
    ledger.put("K3_dstar", fn.K3_dstar, "estimated", FORMULAS["K3_dstar"])
    ledger.put("K3", fn.K3, "closed_form", FORMULAS["K3"])
    ledger.notes["K3_sweep"] = {"n0": n0, "m_sup": fn.m_sup, "star": fn.star_report,
                                "dstar": fn.dstar_report}
    return fn


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj
