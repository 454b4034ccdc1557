from __future__ import annotations

import itertools
from math import comb
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyperpar import jet as J
from hyperpar.curvature import (
    charpoly,
    clusters,
    elementary_symmetric,
    matrix_charpoly,
    mean_curvatures,
    principal_curvatures,
)
from hyperpar.errors import ComplexEigenvalues
from hyperpar.relgeo import build_relative_frame
from hyperpar.surfaces import NormalizationDef, catalog

ks = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=5)


@given(ks)
def test_mean_curvatures_brute_force(k):
    n = len(k)
    H = mean_curvatures(np.array(k))
    for r in range(n + 1):
        brute = sum(np.prod(c) for c in itertools.combinations(k, r)) if r else 1.0
        assert H[r] == pytest.approx(brute / comb(n, r), rel=1e-9, abs=1e-9)


@given(ks)
def test_charpoly_roots_are_curvatures(k):
    n = len(k)
    coeffs = charpoly(mean_curvatures(np.array(k)))
    assert np.allclose(coeffs, matrix_charpoly(np.diag(k)), atol=1e-8 * (1 + np.max(np.abs(k))) ** n)
    # value at each k_i vanishes
    for ki in k:
        val = sum(c * ki**p for p, c in enumerate(coeffs))
        assert abs(val) <= 1e-8 * (1 + max(abs(x) for x in k)) ** n


@given(st.integers(0, 1000), st.integers(1, 5))
def test_matrix_charpoly_against_determinant(seed, n):
    m = np.random.default_rng(seed).normal(size=(n, n))
    coeffs = matrix_charpoly(m)
    for t in (-1.3, 0.2, 2.1):
        val = sum(c * t**p for p, c in enumerate(coeffs))
        assert val == pytest.approx(np.linalg.det(m - t * np.eye(n)), rel=1e-9, abs=1e-9)


def test_elementary_symmetric_batch():
    e = elementary_symmetric(np.array([[1.0, 2.0, 3.0], [0.0, 1.0, -1.0]]))
    assert np.allclose(e, [[1, 6, 11, 6], [1, 0, -1, 0]])


def test_ellipsoid_eigen_structure():
    s = catalog("ellipsoid", a=1, b=1.2, c=1.5)
    for nd in [NormalizationDef.euclidean(), NormalizationDef.equiaffine(), NormalizationDef.custom("1+0.1*sin(u1)", 2)]:
        rel = build_relative_frame(s, nd, s.restrict([None, (-1.2, 1.2)]).sample(40, seed=4), full=False)
        cd = principal_curvatures(rel)
        op = rel.operator
        assert np.all(np.diff(cd.k, axis=1) >= 0)
        assert np.allclose(op @ cd.U, cd.U * cd.k[:, None, :], atol=1e-9)
        assert np.allclose(cd.H[:, -1], np.linalg.det(rel.B_mix.bvalue), rtol=1e-10)
        assert np.allclose(cd.H[:, 1], np.trace(op, axis1=1, axis2=2) / 2, rtol=1e-10, atol=1e-12)
        for b in range(len(cd.k)):
            u = cd.U[b]
            gram = u.T @ rel.G.bvalue[b] @ u
            bform = u.T @ rel.B_cov.bvalue[b] @ u
            if abs(cd.k[b, 0] - cd.k[b, 1]) > 1e-6:
                assert abs(gram[0, 1]) < 1e-9
                assert abs(bform[0, 1]) < 1e-9
            assert np.allclose(np.abs(np.diag(gram)), 1.0)


def test_umbilic_cluster_gets_a_basis():
    s = catalog("sphere", r=1, n=3)
    rel = build_relative_frame(s, NormalizationDef.euclidean(), s.sample(5, seed=1), full=False)
    cd = principal_curvatures(rel)
    # k = -1 for the outward normal, +1 for the inward one
    sigma = -np.sign(np.einsum("za,za->z", rel.frame.xi.bvalue, rel.frame.x.bvalue))
    assert np.allclose(cd.k, sigma[:, None])
    assert clusters(cd.k[0]) == [[0, 1, 2]]
    assert np.all(np.abs(np.linalg.det(cd.U)) > 1e-3)
    assert np.allclose(cd.R, sigma[:, None])


def test_radii_undefined_when_curvature_vanishes():
    s = catalog("paraboloid", n=2)
    rel = build_relative_frame(s, NormalizationDef.equiaffine(), s.sample(4, seed=0), full=False)
    cd = principal_curvatures(rel)
    assert not cd.radii_defined.any()
    assert np.isnan(cd.R).all()


def test_complex_eigenvalues_rejected():
    rot = J.Jet.constant(np.array([[[0.0], [1.0]], [[-1.0], [0.0]]]), 2, 0)
    fake = SimpleNamespace(operator=np.array([[[0.0, -1.0], [1.0, 0.0]]]), G=rot, B_mix=rot)
    with pytest.raises(ComplexEigenvalues) as info:
        principal_curvatures(fake)
    assert info.value.indices == [0]
