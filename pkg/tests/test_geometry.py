import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rechmc.errors import NoConvergence, NormalCapExceeded, SingularGram
from rechmc.geometry import (DEFAULT_SOLVER, ConstraintModel, SolverConfig, cotangent_projector,
                             fd_hessian_error, fd_jacobian_error, gram, project_to_manifold,
                             reconstruct, tangent_basis)
from rechmc.models import build_ellipse_suite, build_tetrahedron, circle, ellipse
from rechmc.models.ellipses import EllipseSuiteParams, ellipse_point
from rechmc.models.tetrahedron import REFERENCE

CIRCLE = circle().model
ELLIPSE = ellipse(1.6, 0.6).model


def test_solver_defaults():
    cfg = SolverConfig()
    assert (cfg.tol, cfg.recon_tol, cfg.max_iter, cfg.max_backtrack) == (1e-10, 1e-8, 50, 20)
    assert cfg.rev_tol == 1e-8 and cfg.involution_tol == 1e-6
    assert DEFAULT_SOLVER == cfg


def test_gram_circle():
    g = gram(CIRCLE, np.array([1.0, 0.0]))
    np.testing.assert_allclose(g.value, [[4.0]])
    assert g.log_det == pytest.approx(np.log(4.0))


def test_gram_ellipse():
    g = gram(ELLIPSE, np.array([1.6, 0.0]))
    np.testing.assert_allclose(g.value, [[1.5625]], rtol=1e-14)


def test_gram_tetrahedron_positive_definite():
    g = gram(build_tetrahedron().model, REFERENCE)
    assert g.value.shape == (6, 6)
    np.testing.assert_allclose(g.value, g.value.T, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(g.value) > 0)
    assert np.isfinite(g.log_det)


def test_gram_singular_raises():
    flat = ConstraintModel(2, 1, lambda x: np.array([0.0]), lambda x: np.zeros((2, 1)),
                           lambda x: np.zeros((1, 2, 2)))
    with pytest.raises(SingularGram):
        gram(flat, np.zeros(2))


def test_tangent_basis_circle():
    np.testing.assert_allclose(tangent_basis(CIRCLE, np.array([1.0, 0.0])).columns, [[0.0], [1.0]],
                               atol=1e-15)
    np.testing.assert_allclose(tangent_basis(CIRCLE, np.array([0.0, 1.0])).columns, [[1.0], [0.0]],
                               atol=1e-15)


def test_tangent_basis_tetrahedron():
    model = build_tetrahedron().model
    u = tangent_basis(model, REFERENCE).columns
    assert u.shape == (9, 3)
    np.testing.assert_allclose(u.T @ u, np.eye(3), atol=1e-10)
    np.testing.assert_allclose(np.asarray(model.jacobian(REFERENCE)).T @ u, 0.0, atol=1e-10)


def test_tangent_basis_deterministic_sign():
    q = np.array([0.6, 0.8])
    u1 = tangent_basis(CIRCLE, q).columns
    u2 = tangent_basis(CIRCLE, q.copy()).columns
    np.testing.assert_array_equal(u1, u2)
    first = u1[np.flatnonzero(np.abs(u1[:, 0]) > 1e-8)[0], 0]
    assert first > 0


def test_cotangent_projector_idempotent():
    q = np.array([0.6, 0.8])
    p = cotangent_projector(CIRCLE, q)
    np.testing.assert_allclose(p @ p, p, atol=1e-14)
    np.testing.assert_allclose(p @ q, 0.0, atol=1e-14)


def test_project_circle_outside():
    dec = project_to_manifold(CIRCLE, np.array([1.2, 0.0]))
    np.testing.assert_allclose(dec.base, [1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(dec.normal, [0.1], atol=1e-12)
    np.testing.assert_array_equal(dec.source, [1.2, 0.0])


def test_project_point_on_manifold():
    dec = project_to_manifold(CIRCLE, np.array([1.0, 0.0]))
    np.testing.assert_allclose(dec.base, [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(dec.normal, [0.0], atol=1e-15)


def test_project_center_fails():
    with pytest.raises((NoConvergence, NormalCapExceeded)):
        project_to_manifold(CIRCLE, np.array([0.0, 0.0]))


def test_project_cap():
    with pytest.raises(NormalCapExceeded) as info:
        project_to_manifold(CIRCLE, np.array([5.0, 5.0]))
    assert info.value.norm > info.value.cap == 1.0


def test_reconstruct_examples():
    np.testing.assert_allclose(reconstruct(CIRCLE, np.array([1.0, 0.0]), [0.05]), [1.1, 0.0])
    np.testing.assert_array_equal(reconstruct(CIRCLE, np.array([0.0, 1.0]), [0.0]), [0.0, 1.0])
    np.testing.assert_allclose(reconstruct(ELLIPSE, np.array([0.0, 0.6]), [0.03]), [0.0, 0.7],
                               atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(t=st.floats(0, 2 * np.pi), v=st.floats(-0.05, 0.05))
def test_round_trip_ellipse(t, v):
    q = np.array([1.6 * np.cos(t), 0.6 * np.sin(t)])
    x = reconstruct(ELLIPSE, q, [v])
    dec = project_to_manifold(ELLIPSE, x)
    np.testing.assert_allclose(reconstruct(ELLIPSE, dec.base, dec.normal), x, atol=1e-8)
    np.testing.assert_allclose(dec.base, q, atol=1e-9)
    np.testing.assert_allclose(dec.normal, [v], atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(k=st.integers(0, 3), t=st.floats(0, 2 * np.pi))
def test_idempotent_on_suite(k, t):
    model = build_ellipse_suite().model
    q = ellipse_point(EllipseSuiteParams(), k, t)
    dec = project_to_manifold(model, reconstruct(model, q, [0.0]))
    np.testing.assert_allclose(dec.base, q, atol=1e-10)


def test_derivatives_match_finite_differences():
    model = build_ellipse_suite().model
    rng = np.random.default_rng(3)
    pts = rng.uniform(-3.5, 3.5, size=(100, 2))
    assert max(fd_jacobian_error(model, x) for x in pts) <= 1e-5
    assert max(fd_hessian_error(model, x) for x in pts) <= 1e-4


def test_tangent_orthogonal_at_sampled_points():
    model = build_ellipse_suite().model
    rng = np.random.default_rng(4)
    for _ in range(30):
        q = ellipse_point(EllipseSuiteParams(), int(rng.integers(4)), rng.uniform(0, 2 * np.pi))
        u = tangent_basis(model, q).columns
        assert np.max(np.abs(np.asarray(model.jacobian(q)).T @ u)) <= 1e-10


def test_finite_difference_hessian_fallback():
    m = ConstraintModel(2, 1, CIRCLE.residual, CIRCLE.jacobian)
    assert m.hessians_fd
    np.testing.assert_allclose(m.hessians(np.array([0.3, 0.4])), [2 * np.eye(2)], atol=1e-8)


def test_model_validation():
    with pytest.raises(ValueError):
        ConstraintModel(2, 2, CIRCLE.residual, CIRCLE.jacobian)
    assert CIRCLE.manifold_dim == 1
    assert CIRCLE.violation(np.array([2.0, 0.0])) == pytest.approx(3.0)
