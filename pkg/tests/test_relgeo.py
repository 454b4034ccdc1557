from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracle
from hyperpar import jet as J
from hyperpar.errors import DegenerateImmersion, OrderExceeded, RankViolation, ZeroSupport
from hyperpar.euclid import build_frame
from hyperpar.relgeo import (
    assemble,
    beltrami1,
    build_relative_frame,
    relative_image_forms,
    support_function,
    tchebychev_gradient,
)
from hyperpar.surfaces import NormalizationDef, catalog

ELLIPSOID = catalog("ellipsoid", a=1, b=1.2, c=1.5)
EUC, AFF = NormalizationDef.euclidean(), NormalizationDef.equiaffine()


def test_sphere_euclidean():
    s = catalog("sphere", r=2)
    rel = build_relative_frame(s, EUC, s.sample(10, seed=1))
    assert np.allclose(rel.y.value, rel.frame.xi.value)
    assert np.allclose(rel.B_mix.bvalue, -0.5 * np.eye(2), atol=1e-12)
    assert np.allclose(rel.A_dar, 0, atol=1e-12)
    assert np.allclose(rel.T, 0, atol=1e-12)
    # constant q is homothetic to the equiaffine normalization: phi constant
    q3 = build_relative_frame(s, NormalizationDef.custom("3", 2), s.sample(10, seed=1))
    # q_aff = 2^(-1/2) on the sphere of radius 2, exponent (n+2)/(2n) = 1
    assert np.allclose(q3.phi.value, 3 * np.sqrt(2), rtol=1e-12)
    assert np.allclose(q3.T, 0, atol=1e-12)


def test_conormal_and_metric():
    rel = build_relative_frame(ELLIPSOID, NormalizationDef.custom("1+0.1*sin(u1)", 2), ELLIPSOID.sample(20, seed=4))
    assert rel.residuals["conormal_tangent"].max() < 1e-13
    assert rel.residuals["conormal_y"].max() < 1e-13
    assert np.allclose(rel.X.value * rel.q.value, rel.frame.xi.value)
    assert np.allclose(rel.G.value * rel.q.value, rel.frame.h.value)
    assert np.allclose(J.matmul(rel.G, rel.G_inv).value, np.eye(2)[:, :, None], atol=1e-12)


@given(a=st.floats(-0.3, 0.3), b=st.floats(-0.3, 0.3), c=st.floats(0.5, 2))
def test_relative_normal_is_admissible(a, b, c):
    """Derivatives of y are tangent and B_ij is symmetric for any positive support function."""
    nd = NormalizationDef.custom(f"{c} + {a}*sin(u1) + {b}*u2^2", 2)
    rel = build_relative_frame(ELLIPSOID, nd, ELLIPSOID.restrict([None, (-1.2, 1.2)]).sample(6, seed=0))
    assert rel.residuals["normal_dy"].max() < 1e-10
    assert rel.residuals["B_symmetry"].max() < 1e-10
    assert rel.residuals["darboux_symmetry"].max() < 1e-10


def test_support_function_matches_expression():
    pts = ELLIPSOID.sample(5, seed=2)
    nd = NormalizationDef.custom("1+0.1*sin(u1)", 2)
    rel = build_relative_frame(ELLIPSOID, nd, pts)
    assert np.allclose(rel.q.bvalue, 1 + 0.1 * np.sin(pts[:, 0]), rtol=1e-13)


def test_zero_support_is_rejected():
    frame = build_frame(ELLIPSOID, [[0.5, 0.1], [0.0, 0.2]], order=3)
    with pytest.raises(ZeroSupport) as info:
        support_function(NormalizationDef.custom("u1", 2), frame, [[0.5, 0.1], [0.0, 0.2]])
    assert info.value.indices == [1]


def test_equiaffine_normal_matches_nested_oracle():
    pts = ELLIPSOID.sample(4, seed=8)
    rel = build_relative_frame(ELLIPSOID, AFF, pts)
    for b, u in enumerate(pts):
        assert np.allclose(rel.y.bvalue[b], oracle.affine_normal(ELLIPSOID, u), rtol=1e-4, atol=1e-4)


@pytest.mark.parametrize("nd", [EUC, AFF, NormalizationDef.custom("1+0.1*sin(u1)", 2)], ids=lambda n: n.kind)
def test_weingarten_matrix_matches_differences_of_y(nd):
    pts = ELLIPSOID.sample(6, seed=3)
    rel = build_relative_frame(ELLIPSOID, nd, pts)

    def y_of(u):
        return build_relative_frame(ELLIPSOID, nd, np.asarray(u)[None], full=False).y.bvalue[0]

    for b, u in enumerate(pts):
        ref = oracle.weingarten_from_y(y_of, ELLIPSOID, u)
        assert np.allclose(rel.B_mix.bvalue[b], ref, rtol=1e-6, atol=1e-7)


def test_equiaffine_quadrics_have_vanishing_cubic_form_trace():
    for s in [ELLIPSOID, catalog("paraboloid", n=3)]:
        rel = build_relative_frame(s, AFF, s.sample(10, seed=6))
        assert np.abs(rel.T).max() < 1e-11
        # quadrics: the whole cubic form vanishes, hence so does the Pick invariant
        assert np.abs(rel.A_dar).max() < 1e-10
        assert np.abs(rel.J_pick).max() < 1e-10


@pytest.mark.parametrize("nd", [EUC, AFF, NormalizationDef.custom("1+0.1*sin(u1)", 2)], ids=lambda n: n.kind)
def test_two_route_consistency(nd):
    for s in [ELLIPSOID, catalog("torus", R=2, rho=0.5)]:
        rel = build_relative_frame(s, nd, s.sample(15, seed=5))
        comps, ambient = tchebychev_gradient(rel)
        assert np.allclose(comps, rel.T, atol=1e-10)
        assert np.allclose(ambient, rel.T_vec, atol=1e-10)
        assert np.allclose(rel.L, rel.L_laplace, atol=1e-10)


def test_beltrami_duality():
    rel = build_relative_frame(ELLIPSOID, EUC, ELLIPSOID.sample(8, seed=1))
    f = rel.frame.Ktilde
    total = beltrami1(rel.frame, f, "II", "x") + beltrami1(rel.frame, f, "III", "xi")
    assert np.abs(total.value).max() < 1e-12


def test_order_and_rank_errors():
    with pytest.raises(OrderExceeded):
        build_relative_frame(ELLIPSOID, AFF, ELLIPSOID.sample(3, seed=0), order=3)
    frame = build_frame(ELLIPSOID, ELLIPSOID.sample(3, seed=0), order=4)
    u1 = J.Jet.variable(0, ELLIPSOID.sample(3, seed=0), 4)
    with pytest.raises(RankViolation):
        assemble(frame, frame.xi * (1 + u1))


def test_relative_image_forms():
    rel = build_relative_frame(ELLIPSOID, NormalizationDef.custom("1+0.1*sin(u1)", 2), ELLIPSOID.sample(8, seed=2))
    img = relative_image_forms(rel)
    assert np.allclose(img.gbar, img.gbar_from_B, atol=1e-10)
    assert np.allclose(img.hbar, img.hbar_from_B, atol=1e-10)
    assert np.allclose(img.hbar, img.IIbar_from_q, atol=1e-10)
    assert np.allclose(img.K, img.K_check, rtol=1e-10)
    flat = catalog("paraboloid", n=2)
    rel = build_relative_frame(flat, AFF, flat.sample(4, seed=2))
    with pytest.raises(DegenerateImmersion):
        relative_image_forms(rel)
