import math

import numpy as np
import pytest

from degdiff.bench import (
    MMS_DIFFUSIVITY,
    MMS_LAME,
    UnknownCaseError,
    case_catalog,
    case_names,
    concentration_centroid,
    convergence_study,
    error_norms,
    lookup,
    manufactured_gradients,
    manufactured_solution,
    observed_rates,
)
from degdiff.materials import Strain2D, evaluate_diffusivity, lame
from degdiff.mesh import generate_structured_rect

PI = math.pi


# Hand-written derivatives of the manufactured fields, kept separate from the
# package so the finite-difference checks below are independent of it.
def _grad_c(x, y):
    return np.array([0.5 * math.cos(PI * x / 2) * math.sin(PI * y / 2), 0.5 * math.sin(PI * x / 2) * math.cos(PI * y / 2)])


def _strain(x, y):
    sx, cx, sy, cy = math.sin(PI * x / 2), math.cos(PI * x / 2), math.sin(PI * y / 2), math.cos(PI * y / 2)
    exx = 0.5 * cx * sy
    eyy = -0.5 * cx * sy
    exy = 0.5 * (0.5 * sx * cy - 0.5 * sx * cy)
    return Strain2D(exx, eyy, exy)


def _conc(x, y):
    return 1.0 + math.sin(PI * x / 2) * math.sin(PI * y / 2) / PI


def _flux(x, y):
    return evaluate_diffusivity(MMS_DIFFUSIVITY, _strain(x, y)) @ _grad_c(x, y)


def _stress(x, y):
    lam, mu = lame(MMS_LAME, _conc(x, y))
    E = _strain(x, y)
    eps = np.array([[E.exx, E.exy], [E.exy, E.eyy]])
    return lam * np.trace(eps) * np.eye(2) + 2 * mu * eps


def _central_div(field, x, y, h=1e-5):
    dx = (field(x + h, y) - field(x - h, y)) / (2 * h)
    dy = (field(x, y + h) - field(x, y - h)) / (2 * h)
    return dx, dy


def test_manufactured_corner_values():
    m = manufactured_solution(0.0, 0.0)
    np.testing.assert_allclose(m.u, [0.0, 1 / PI], atol=1e-16)
    assert m.c == 1.0
    m = manufactured_solution(1.0, 1.0)
    np.testing.assert_allclose(m.u, [1 / PI, 0.0], atol=1e-16)
    assert m.c == pytest.approx(1 + 1 / PI, rel=1e-15)


@pytest.mark.parametrize("point", [(0.5, 0.5), (0.3, 0.8), (0.9, 0.15)])
def test_source_matches_finite_difference_divergence(point):
    x, y = point
    dx, dy = _central_div(_flux, x, y)
    fd = -(dx[0] + dy[1])
    assert float(manufactured_solution(x, y).f) == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("point", [(0.5, 0.5), (0.2, 0.7)])
def test_body_force_balances_stress(point):
    x, y = point
    dx, dy = _central_div(_stress, x, y)
    div = dx[:, 0] + dy[:, 1]
    np.testing.assert_allclose(manufactured_solution(x, y).b, -div, rtol=1e-6, atol=1e-8)


def test_manufactured_gradients_consistent():
    x, y = 0.37, 0.61
    grad_u, grad_c = manufactured_gradients(x, y)
    np.testing.assert_allclose(grad_c, _grad_c(x, y), rtol=1e-14)
    E = _strain(x, y)
    np.testing.assert_allclose([grad_u[0, 0], grad_u[1, 1]], [E.exx, E.eyy], rtol=1e-14)


def test_error_norms_zero_for_linear_interpolant():
    mesh = generate_structured_rect(0, 0, 1, 1, 4, 4, "tri")
    X, Y = mesh.nodes.T
    u_h = np.column_stack([2 * X + Y, -X])
    c_h = 3 - X + 0.5 * Y
    err = error_norms(
        mesh,
        u_h,
        c_h,
        u_exact=lambda x, y: np.stack([2 * x + y, -x]),
        grad_u_exact=lambda x, y: np.array([[2 + 0 * x, 1 + 0 * x], [-1 + 0 * x, 0 * x]]),
        c_exact=lambda x, y: 3 - x + 0.5 * y,
        grad_c_exact=lambda x, y: np.stack([-1 + 0 * x, 0.5 + 0 * x]),
    )
    assert max(err.as_dict().values()) <= 1e-12


def test_error_norms_constant_offset():
    mesh = generate_structured_rect(0, 0, 1, 1, 3, 3, "quad")
    zero = lambda x, y: np.zeros((2,) + np.shape(x))  # noqa: E731
    err = error_norms(
        mesh,
        np.zeros((mesh.n_nodes, 2)),
        np.zeros(mesh.n_nodes),
        u_exact=zero,
        grad_u_exact=lambda x, y: np.zeros((2, 2) + np.shape(x)),
        c_exact=lambda x, y: np.ones_like(x),
        grad_c_exact=zero,
    )
    assert err.l2_c == pytest.approx(1.0, rel=1e-14)
    assert err.h1_c == 0.0 and err.l2_u == 0.0


def test_observed_rates():
    h = [0.5, 0.25, 0.125]
    assert observed_rates(h, [4.0, 1.0, 0.25]) == pytest.approx([2.0, 2.0])


def test_lookup_examples():
    case = lookup("cantilever_edge_shear", phi_s=10)
    assert case.loads.source == 1e4
    assert lookup("cantilever_edge_shear", row=2).params == case.params
    with pytest.raises(UnknownCaseError):
        lookup("nonexistent")
    with pytest.raises(UnknownCaseError):
        lookup("fixed_beam", row=9)
    with pytest.raises(UnknownCaseError):
        lookup("fixed_beam")


def test_catalog_is_complete_and_buildable():
    cat = case_catalog()
    assert {"cantilever_edge_shear", "simply_supported_beam", "fixed_beam", "plate_with_hole", "beam_three_holes"} <= set(cat)
    assert [len(cat[k]) for k in ("cantilever_edge_shear", "simply_supported_beam", "fixed_beam")] == [3, 3, 3]
    assert len(cat["plate_with_hole"]) == len(cat["beam_three_holes"]) == 5
    assert "convergence_q4" in case_names()
    for rows in cat.values():
        for case in rows:
            case.config()
    beam = cat["fixed_beam"][0].build_mesh()
    assert beam.n_nodes == 441


def test_fixed_beam_weak_coupling_row():
    rep = lookup("fixed_beam", phi_t=1).run()
    assert rep.converged and rep.iterations == 2
    assert rep.max_c == pytest.approx(1.250e-1, rel=0.01)


def test_resolution_override():
    case = lookup("cantilever_edge_shear", row=1).with_resolution(11)
    assert case.build_mesh().n_nodes == 121
    with pytest.raises(ValueError):
        lookup("plate_with_hole", row=1).with_resolution(11)


def test_centroid_of_uniform_field():
    mesh = generate_structured_rect(0, 0, 1, 0.1, 6, 5, "quad")
    assert concentration_centroid(mesh, np.ones(mesh.n_nodes)) == pytest.approx((0.5, 0.05))
    with pytest.raises(ValueError):
        concentration_centroid(mesh, np.zeros(mesh.n_nodes))


def test_convergence_tables_have_identical_shape():
    q4 = convergence_study("quad", (3, 5, 9))
    t3 = convergence_study("tri", (3, 5, 9))
    assert len(q4.rows()) == len(t3.rows()) == 3
    assert list(q4.rows()[0]) == list(t3.rows()[0])
    assert all(len(v) == 2 for v in q4.rates().values())
    with pytest.raises(ValueError):
        convergence_study("quad", (5, 9))


def test_error_ratio_on_refinement():
    # displacement errors drop by the optimal factors between 9 and 17 nodes
    table = convergence_study("tri", (5, 9, 17))
    e9, e17 = table.errors[1], table.errors[2]
    assert e9.l2_u / e17.l2_u == pytest.approx(4.0, rel=0.1)
    assert e9.h1_u / e17.h1_u == pytest.approx(2.0, rel=0.1)
