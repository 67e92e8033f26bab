import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_discrete_lyapunov

from conftest import fixture, random_stochastic
from lspe_bound.chain import MarkovRewardChain, stationary_distribution
from lspe_bound.errors import (DimensionMismatch, NotPositiveDefinite, SingularB,
                               UnstableN)
from lspe_bound.model import (FeatureBasis, HGeometry, build_model, h_norm, h_opnorm,
                              norm_from_infinity, solve_lyapunov)


@pytest.mark.parametrize("lam", [0.0, 0.5])
def test_tabular_fixed_point(lam):
    ch, basis = fixture("tabular_four")
    m = build_model(ch, stationary_distribution(ch), basis, 0.9, lam)
    V = np.linalg.solve(np.eye(4) - 0.9 * ch.transition, ch.cost)
    np.testing.assert_allclose(m.r_star, V, atol=1e-9)


def test_two_state_frozen(two_state):
    m = two_state.model
    # the value function (1.25, -1.25) is representable, so r* reproduces it exactly
    np.testing.assert_allclose(two_state.basis.phi @ m.r_star, [1.25, -1.25], atol=1e-12)
    np.testing.assert_allclose(m.r_star, [1.25, -1.875], atol=1e-12)
    assert m.beta == pytest.approx(0.09131579723398889, rel=1e-10)
    np.testing.assert_allclose(m.H, [[1.0061886160714284, 0.003525545634920641],
                                     [0.003525545634920641, 1.0028100198412697]], rtol=1e-10)


@pytest.mark.parametrize("name", ["two_state", "five_state", "iid_two_state", "tabular_four"])
def test_fixed_point_equation(name):
    ch, basis = fixture(name)
    m = build_model(ch, stationary_distribution(ch), basis, 0.5, 0.9)
    assert np.abs(m.A @ m.r_star + m.b).max() <= 1e-10
    NtHN = m.N.T @ m.H @ m.N
    assert np.linalg.norm(NtHN - m.H + np.eye(m.M)) <= 1e-10


def test_lyapunov_scalar_multiple_of_identity():
    H, beta = solve_lyapunov(0.6 * np.eye(3))
    np.testing.assert_allclose(H, np.eye(3) / (1 - 0.36), atol=1e-14)
    assert beta == pytest.approx(0.6, abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_lyapunov_matches_scipy(M, seed):
    rng = np.random.default_rng(seed)
    N = rng.normal(size=(M, M))
    N *= 0.9 / max(np.abs(np.linalg.eigvals(N)).max(), 1e-3)
    H, _ = solve_lyapunov(N)
    ref = solve_discrete_lyapunov(N.T, np.eye(M))
    np.testing.assert_allclose(H, ref, rtol=1e-8, atol=1e-8)


def test_unstable_N():
    with pytest.raises(UnstableN):
        solve_lyapunov(np.diag([0.5, 1.0]))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_contraction_in_H_norm(s, M, seed):
    rng = np.random.default_rng(seed)
    M = min(M, s)
    ch = MarkovRewardChain(random_stochastic(rng, s), rng.normal(size=s))
    basis = FeatureBasis(rng.normal(size=(s, M)))
    m = build_model(ch, stationary_distribution(ch), basis, rng.uniform(0.1, 0.95),
                    rng.uniform(0, 1))
    geo = m.geometry
    x = rng.normal(size=(500, M))
    assert np.all(geo.vec(x @ m.N.T) <= m.beta * geo.vec(x) * (1 + 1e-10) + 1e-14)
    assert geo.op(m.N) <= m.beta * (1 + 1e-10)


def test_opnorm_is_sup_of_ratios(rng):
    H = np.array([[2.0, 0.3], [0.3, 1.0]])
    V = rng.normal(size=(2, 2))
    x = rng.normal(size=(20000, 2))
    geo = HGeometry(H)
    ratios = geo.vec(x @ V.T) / geo.vec(x)
    op = h_opnorm(V, H)
    assert ratios.max() <= op * (1 + 1e-12)
    assert ratios.max() >= op * (1 - 1e-3)


def test_norm_helpers():
    H = np.diag([4.0, 1.0])
    assert h_norm([1.0, 0.0], H) == 2.0
    assert h_opnorm(np.eye(2), H) == pytest.approx(1.0)
    assert norm_from_infinity(1.0, H, 2) == pytest.approx(np.sqrt(8.0))
    with pytest.raises(ValueError):
        norm_from_infinity(1.0, H, 2, kind="tensor")


def test_h_geometry_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        HGeometry(np.diag([1.0, -1.0]))
    with pytest.raises(DimensionMismatch):
        HGeometry(np.ones(3))


def test_basis_rank_checked():
    with pytest.raises(SingularB):
        FeatureBasis([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularB):
        FeatureBasis([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def test_build_model_dimension_mismatch():
    ch, _ = fixture("two_state")
    _, basis = fixture("five_state")
    with pytest.raises(DimensionMismatch):
        build_model(ch, stationary_distribution(ch), basis, 0.5, 0.9)


def test_model_dump(two_state):
    d = two_state.model.to_dict()
    assert d["lambda"] == 0.9 and len(d["H"]) == 2
    np.testing.assert_allclose(d["r_star"], two_state.model.r_star)
