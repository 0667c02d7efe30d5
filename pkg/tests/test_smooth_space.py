import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wbdg.smooth_space import (DualVector, SpaceDescriptor, check_psi_estimates, constant_relations,
                               dual_norm_sampled, estimate_CH, estimate_Csm, make_space, norm,
                               phi, phi_gradient)

import oracle_values as ov

SPACES = [
    make_space("scalar"),
    make_space("euclidean", dim=4),
    make_space("lq", q=3, dim=4),
    make_space("lq", q=4, dim=8),
    make_space("lq", p=1.5, q=1.5, dim=4),
    make_space("scalar", p=1.1),
    make_space("euclidean", p=1.25, dim=3),
]
IDS = [str(s) for s in SPACES]


def test_norm_examples():
    assert norm(make_space("scalar"), -3.0) == 3.0
    assert norm(make_space("lq", q=2, dim=2), np.array([3.0, 4.0])) == pytest.approx(5.0, rel=1e-15)
    assert norm(make_space("lq", q=3, dim=2), np.ones(2)) == pytest.approx(ov.NORM_Q3_11, rel=1e-14)


def test_norm_zero_only_at_zero():
    sp = make_space("lq", q=3, dim=4)
    assert norm(sp, np.zeros(4)) == 0.0
    assert norm(sp, np.array([0, 0, 1e-300, 0])) > 0


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        norm(make_space("euclidean", dim=3), np.ones(2))


def test_gradient_examples():
    g = phi_gradient(make_space("euclidean", dim=2), np.array([1.0, 2.0]))
    h = np.array([0.3, -0.7])
    assert g.apply(h) == pytest.approx(2 * (0.3 - 1.4), rel=1e-14)
    g0 = phi_gradient(make_space("scalar"), 0.0)
    assert np.all(g0.coords == 0)
    g3 = phi_gradient(make_space("lq", q=3, dim=2), np.ones(2))
    assert g3.apply(h) == pytest.approx(2 * 2 ** (-1 / 3) * (h[0] + h[1]), rel=1e-14)


@pytest.mark.parametrize("sp", SPACES, ids=IDS)
def test_gradient_dual_norm_bound(sp):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((200, sp.dim)) * 10 ** rng.uniform(-3, 3, (200, 1))
    g = phi_gradient(sp, x)
    assert np.all(g.dual_norm <= sp.p * norm(sp, x) ** (sp.p - 1) * (1 + 1e-12))


@pytest.mark.parametrize("sp", SPACES, ids=IDS)
def test_dual_vector_pairing_bound(sp):
    rng = np.random.default_rng(2)
    g = phi_gradient(sp, rng.standard_normal(sp.dim))
    y = rng.standard_normal((500, sp.dim))
    assert np.all(np.abs(g.apply(y)) <= g.dual_norm * norm(sp, y) * (1 + 1e-12))


def test_sampled_dual_norm_is_lower_bound():
    sp = make_space("lq", q=3, dim=4)
    c = np.array([1.0, -2.0, 0.5, 0.0])
    est = dual_norm_sampled(sp, c, 20000, seed=0)
    exact = DualVector(c, sp).dual_norm
    assert est <= exact * (1 + 1e-12)
    assert est >= 0.95 * exact


@pytest.mark.parametrize("sp", SPACES, ids=IDS)
def test_finite_difference(sp):
    rng = np.random.default_rng(3)
    for _ in range(50):
        x = rng.standard_normal(sp.dim) * 10 ** rng.uniform(-2, 2)
        y = rng.standard_normal(sp.dim)
        y /= norm(sp, y)
        h = 1e-6 * (1 + norm(sp, x))
        fd = (phi(sp, x + h * y) - phi(sp, x - h * y)) / (2 * h)
        exact = phi_gradient(sp, x).apply(y)
        assert abs(fd - exact) <= 1e-5 * (abs(exact) + norm(sp, x) ** (sp.p - 1))


@pytest.mark.parametrize("sp", SPACES, ids=IDS)
@given(lam=st.floats(1e-3, 1e3))
@settings(max_examples=30, deadline=None)
def test_gradient_homogeneity(sp, lam):
    x = np.linspace(-1.3, 2.1, sp.dim) + 0.1
    a = phi_gradient(sp, lam * x).coords
    b = lam ** (sp.p - 1) * phi_gradient(sp, x).coords
    assert np.allclose(a, b, rtol=1e-12, atol=0)


def test_estimator_examples():
    assert estimate_Csm(make_space("euclidean", dim=4), 100_000, seed=1) == pytest.approx(1.0, abs=1e-9)
    assert estimate_Csm(make_space("scalar"), 100_000, seed=1) == pytest.approx(1.0, abs=1e-9)
    assert estimate_CH(make_space("scalar"), 10_000) == pytest.approx(math.sqrt(2), rel=1e-12)
    assert estimate_CH(make_space("euclidean", dim=3), 10_000) == pytest.approx(math.sqrt(2), rel=1e-9)
    c = estimate_Csm(make_space("lq", q=4, dim=8), 200_000, seed=0)
    assert 1 < c <= math.sqrt(3) * (1 + 1e-9)
    assert estimate_CH(make_space("lq", q=3, dim=4), 200_000) <= 2 * (1 + 1e-9)


def test_estimator_rejects_zero_samples():
    with pytest.raises(ValueError):
        estimate_Csm(make_space("scalar"), 0)
    with pytest.raises(ValueError):
        estimate_CH(make_space("scalar"), 0)


def test_estimator_deterministic():
    sp = make_space("lq", q=3, dim=4)
    assert estimate_CH(sp, 5000, seed=9) == estimate_CH(sp, 5000, seed=9)


@pytest.mark.parametrize("sp", SPACES, ids=IDS)
def test_default_relations(sp):
    assert all(constant_relations(sp).values())


def test_make_space_rejects_unknown_combination():
    with pytest.raises(ValueError):
        make_space("lq", p=2, q=1.5, dim=3)
    sp = make_space("lq", p=1.8, q=3, dim=2, C_H=5.0, C_sm=2.0)
    assert sp.C_H == 5.0


@pytest.mark.parametrize("kw", [dict(kind="scalar", p=2.5, C_H=1, C_sm=1),
                                dict(kind="cube", p=2, C_H=1, C_sm=1),
                                dict(kind="lq", p=2, C_H=1, C_sm=1),
                                dict(kind="scalar", p=2, C_H=-1, C_sm=1)])
def test_descriptor_validation(kw):
    with pytest.raises(ValueError):
        SpaceDescriptor(**kw)


def test_record_roundtrip():
    sp = make_space("lq", q=3, dim=4)
    rec = sp.to_record()
    assert set(rec) == {"kind", "q", "dim", "p", "C_H", "C_sm"}
    assert SpaceDescriptor.from_record(rec) == sp


def test_psi_zero_perturbation():
    sp = make_space("scalar")
    rep = check_psi_estimates(sp, 1.3, 0.0, 2.0)
    assert rep.ok
    assert rep.slack["psi_size"] == pytest.approx(0.0, abs=1e-15)
    assert rep.slack["psi_linear_approx"] == 0.0


def test_psi_linear_approx_equality():
    rep = check_psi_estimates(make_space("scalar"), 1.0, 1.0, 4.0)
    assert rep.ok
    assert rep.slack["psi_linear_approx"] == pytest.approx(0.0, abs=1e-14)


def test_psi_holder_at_origin():
    rep = check_psi_estimates(make_space("scalar"), 0.0, 1.0, 0.0)
    assert rep.ok
    assert rep.slack["psi_holder"] >= 0
    assert not rep.applicable["sloppy"]


@pytest.mark.parametrize("sp", SPACES, ids=IDS)
def test_psi_random(sp):
    rng = np.random.default_rng(4)
    for _ in range(40):
        x = rng.standard_normal(sp.dim) * 10 ** rng.uniform(-2, 2)
        d = rng.standard_normal(sp.dim) * 10 ** rng.uniform(-2, 2)
        q = 10 ** rng.uniform(-3, 3)
        assert check_psi_estimates(sp, x, d, q, t_grid=33).ok


def test_psi_detects_wrong_constant():
    # an understated C_H breaks the Hoelder estimate for the scalar case
    bad = SpaceDescriptor("scalar", 2.0, C_H=1.2, C_sm=0.5)
    rep = check_psi_estimates(bad, 0.0, 1.0, 0.0)
    assert rep.violations["psi_holder"]


def test_psi_grid_validation():
    with pytest.raises(ValueError):
        check_psi_estimates(make_space("scalar"), 1.0, 1.0, 1.0, t_grid=1)
