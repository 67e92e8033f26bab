"""Limit quantities B, A, b, N, r*, the Lyapunov weight H and H-norm helpers."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chain import MarkovRewardChain, StationaryInfo
from .errors import (DimensionMismatch, NotPositiveDefinite, SingularA,
                     SingularB, UnstableN)

STABILITY_MARGIN = 1e-10


@dataclass(frozen=True)
class FeatureBasis:
    """Feature matrix Phi (s x M); row i is phi(i)."""

    phi: np.ndarray

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.ndim != 2:
            raise DimensionMismatch(f"phi must be 2-d, got shape {phi.shape}")
        s, M = phi.shape
        if M > s or np.linalg.matrix_rank(phi) < M:
            raise SingularB(f"feature columns are not linearly independent (rank < {M})")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def M(self) -> int:
        return self.phi.shape[1]

    @property
    def phi_max(self) -> float:
        # max absolute entry; see the bounded-difference constants
        return float(np.abs(self.phi).max())


def load_basis(path) -> FeatureBasis:
    doc = json.loads(Path(path).read_text())
    return FeatureBasis(doc["phi"])


class HGeometry:
    """Norms induced by a symmetric positive definite H, batched over leading axes."""

    def __init__(self, H):
        H = np.asarray(H, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise DimensionMismatch(f"H must be square, got {H.shape}")
        if not np.allclose(H, H.T, rtol=0, atol=1e-12 * max(1.0, np.abs(H).max())):
            raise NotPositiveDefinite("H is not symmetric")
        w, U = np.linalg.eigh(H)
        if w[0] <= 0:
            raise NotPositiveDefinite(f"smallest eigenvalue {w[0]!r}")
        self.H = H
        self.eigenvalues = w
        self.root = (U * np.sqrt(w)) @ U.T
        self.root_inv = (U / np.sqrt(w)) @ U.T

    @property
    def lam_max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def lam_min(self) -> float:
        return float(self.eigenvalues[0])

    def vec(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", x, self.H, x), 0.0))

    def op(self, V) -> np.ndarray | float:
        V = np.asarray(V, dtype=float)
        W = self.root @ V @ self.root_inv
        return np.linalg.norm(W, ord=2, axis=(-2, -1))


def h_norm(x, H) -> float:
    return float(HGeometry(H).vec(x))


def h_opnorm(V, H) -> float:
    """Operator norm of V induced by ||.||_H: sigma_max(H^{1/2} V H^{-1/2})."""
    return float(HGeometry(H).op(V))


def norm_from_infinity(a: float, H, M: int, kind: str = "vector") -> float:
    """Upper bound on the H-norm of anything with entrywise magnitude <= a."""
    geo = HGeometry(H)
    if kind == "vector":
        return float(np.sqrt(geo.lam_max * M) * a)
    if kind == "matrix":
        return float(np.sqrt(geo.lam_max / geo.lam_min) * M * a)
    raise ValueError(f"kind must be 'vector' or 'matrix', got {kind!r}")


def solve_lyapunov(N) -> tuple[np.ndarray, float]:
    """Solve N^T H N - H = -I through the Kronecker-vectorised linear system.

    Returns H (symmetrised) and the contraction factor beta = sqrt(1 - 1/lam_max(H)).
    """
    N = np.asarray(N, dtype=float)
    M = N.shape[0]
    rho = np.abs(np.linalg.eigvals(N)).max() if M else 0.0
    if rho >= 1.0 - STABILITY_MARGIN:
        raise UnstableN(f"spectral radius of N is {rho!r}")
    K = np.eye(M * M) - np.kron(N.T, N.T)
    H = np.linalg.solve(K, np.eye(M).ravel()).reshape(M, M)
    H = 0.5 * (H + H.T)
    lam_max = np.linalg.eigvalsh(H)[-1]
    beta = float(np.sqrt(max(0.0, 1.0 - 1.0 / lam_max)))
    return H, beta


@dataclass(frozen=True)
class ExactModel:
    A: np.ndarray
    b: np.ndarray
    B: np.ndarray
    N: np.ndarray
    H: np.ndarray
    beta: float
    r_star: np.ndarray
    alpha: float
    lam: float
    k_max: float
    phi_max: float

    @property
    def M(self) -> int:
        return self.b.shape[0]

    @property
    def B_inv(self) -> np.ndarray:
        return np.linalg.inv(self.B)

    @property
    def geometry(self) -> HGeometry:
        return HGeometry(self.H)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "lambda": self.lam,
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "B": self.B.tolist(),
            "N": self.N.tolist(),
            "H": self.H.tolist(),
            "beta": self.beta,
            "r_star": self.r_star.tolist(),
            "k_max": self.k_max,
            "phi_max": self.phi_max,
            "spectral_radius_N": float(np.abs(np.linalg.eigvals(self.N)).max()),
        }


def build_model(chain: MarkovRewardChain, pi, basis: FeatureBasis,
                alpha: float, lam: float) -> ExactModel:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if lam < 0.0 or alpha * lam >= 1.0:
        raise ValueError(f"need lambda >= 0 and alpha*lambda < 1, got lambda={lam}")
    if basis.phi.shape[0] != chain.num_states:
        raise DimensionMismatch("basis rows do not match the number of states")
    pi = pi.pi if isinstance(pi, StationaryInfo) else np.asarray(pi, dtype=float)
    Phi = basis.phi
    P = chain.transition
    s = chain.num_states
    PhiTD = Phi.T * pi

    B = PhiTD @ Phi
    try:
        np.linalg.cholesky(B)
    except np.linalg.LinAlgError:
        raise SingularB("Phi^T D Phi is not positive definite") from None
    if np.linalg.cond(B) > 1e12:
        raise SingularB(f"Phi^T D Phi is ill-conditioned (cond {np.linalg.cond(B):.3e})")

    # sum_j (alpha lambda P)^j = (I - alpha lambda P)^{-1}
    resolvent_Phi = np.linalg.solve(np.eye(s) - alpha * lam * P, Phi)
    resolvent_k = np.linalg.solve(np.eye(s) - alpha * lam * P, chain.cost)
    A = PhiTD @ (alpha * P - np.eye(s)) @ resolvent_Phi
    b = PhiTD @ resolvent_k

    N = np.eye(basis.M) + np.linalg.solve(B, A)
    H, beta = solve_lyapunov(N)
    if np.linalg.cond(A) > 1e12:
        raise SingularA(f"A is ill-conditioned (cond {np.linalg.cond(A):.3e})")
    r_star = np.linalg.solve(A, -b)
    for arr in (A, b, B, N, H, r_star):
        arr.setflags(write=False)
    return ExactModel(A=A, b=b, B=B, N=N, H=H, beta=beta, r_star=r_star,
                      alpha=float(alpha), lam=float(lam), k_max=chain.k_max,
                      phi_max=basis.phi_max)
