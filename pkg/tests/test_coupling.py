import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degdiff.assembly import assemble_diffusion, assemble_elasticity
from degdiff.bench import LAME, lookup
from degdiff.coupling import (
    CoupledConfig,
    Loads,
    StaggeredError,
    degradation_index,
    relative_modulus_field,
    staggered_solve,
)
from degdiff.materials import Constant, InvariantTension, rotated_tensor
from degdiff.mesh import BoundaryCondition, generate_structured_rect
from degdiff.solvers import solve_nonneg_qp, solve_spd


def test_degradation_index_examples():
    assert degradation_index(np.array([0.0, 1.0, 2.0])) == 0.0
    assert degradation_index(np.array([-1e-3, 1.0, 1.0, 1.0])) == 25.0
    # roundoff-sized negatives are not violations
    assert degradation_index(np.array([-1e-13, 1.0])) == 0.0
    assert degradation_index(np.zeros(0)) == 0.0


def test_relative_modulus_examples():
    np.testing.assert_array_equal(relative_modulus_field(LAME, np.zeros(3)), 1.0)
    assert relative_modulus_field(LAME, np.array([0.5]))[0] == pytest.approx(0.55)
    # negative concentration with a softening coefficient reads as healing
    assert relative_modulus_field(LAME, np.array([-0.1]))[0] > 1.0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"formulation": "upwind"},
        {"eps_tol_c": 0.0},
        {"max_iters": 0},
        {"max_iters": 2.5},
        {"ellipticity": "sometimes"},
        {"initial_c": np.array([-1.0, 0.0])},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        CoupledConfig(**kwargs)


def test_decoupled_case_converges_in_two_iterations():
    case = lookup("decoupled_smoke")
    mesh = case.build_mesh()
    rep = case.run(mesh)
    assert rep.converged and rep.iterations == 2
    assert rep.dc_history[0] > 0 and rep.dc_history[1] < case.eps_tol_c

    # the same fields from two independent solves
    es = assemble_elasticity(mesh, case.lame, None, case.loads.body_force, case.bcs, case.loads.density)
    u = es.expand(solve_spd(es.K, es.f))
    ds = assemble_diffusion(mesh, case.diffusivity, None, case.loads.source, case.bcs)
    c = ds.expand(solve_nonneg_qp(ds.K, ds.f).x)
    np.testing.assert_allclose(rep.u.ravel(), u, rtol=1e-12, atol=1e-300)
    np.testing.assert_allclose(rep.c, c, rtol=1e-12)


def test_non_convergence_reported_not_raised():
    case = lookup("cantilever_edge_shear", phi_s=10)
    rep = case.run(max_iters=2)
    assert not rep.converged and rep.iterations == 2
    assert len(rep.dc_history) == len(rep.qp_iterations) == 2


def test_beam_history_and_report_fields():
    case = lookup("fixed_beam", row=2)
    rep = case.run()
    assert rep.converged
    assert np.all(np.diff(rep.dc_history) < 0)
    assert rep.min_c >= 0.0 and rep.degradation_index == 0.0
    assert rep.max_c == pytest.approx(rep.c.max())
    assert rep.u.shape == (len(rep.c), 2)
    assert all(q >= 1 for q in rep.qp_iterations)
    s = rep.summary()
    assert list(s)[:3] == ["formulation", "converged", "iterations"]


def _compressed_block():
    # uniaxial compression of a block: strongly negative dilation everywhere
    mesh = generate_structured_rect(0, 0, 1, 1, 5, 5, "quad")
    bcs = (
        BoundaryCondition("dirichlet_displacement", "bottom", (None, 0.0)),
        BoundaryCondition("dirichlet_displacement", "left", (0.0, None)),
        BoundaryCondition("neumann_traction", "top", (0.0, -1e3)),
        BoundaryCondition("dirichlet_concentration", "bottom", 0.0),
    )
    diff = InvariantTension.scaled(np.eye(2), 10.0, 1.0, 1.0, 1.0, 1e-4)
    return mesh, bcs, diff


def test_pointwise_ellipticity_loss_is_an_error():
    mesh, bcs, diff = _compressed_block()
    with pytest.raises(StaggeredError) as info:
        staggered_solve(mesh, LAME, diff, Loads(source=1.0), bcs, CoupledConfig())
    assert info.value.iteration == 1
    assert "not positive definite" in str(info.value)


def test_assembled_ellipticity_still_needs_spd_matrix():
    # everywhere indefinite: counted, then the factorisation refuses
    mesh, bcs, diff = _compressed_block()
    with pytest.raises(StaggeredError):
        staggered_solve(mesh, LAME, diff, Loads(source=1.0), bcs, CoupledConfig(ellipticity="assembled"))


@pytest.fixture(scope="module")
def plate_strong():
    case = lookup("plate_with_hole", row=5)
    mesh = case.build_mesh()
    return mesh, case, case.run(mesh, formulation="galerkin"), case.run(mesh, formulation="nonneg")


def test_galerkin_plate_violates_and_nonneg_does_not(plate_strong):
    _, case, gal, nn = plate_strong
    assert gal.min_c < -1e-3 and gal.degradation_index > 10
    # negative concentration shows up as spurious healing
    assert gal.relative_modulus.max() > 1.0
    assert nn.min_c >= 0.0 and nn.degradation_index == 0.0
    assert all(m >= 0 for m in nn.min_c_history)
    assert nn.relative_modulus.max() <= 1.0
    assert max(gal.nonelliptic_history) > 0


def test_plate_galerkin_iteration_count_matches_table(plate_strong):
    _, case, gal, nn = plate_strong
    assert gal.iterations == case.reference["iterations_galerkin"]
    assert nn.converged and nn.iterations <= case.max_iters


def test_identical_inputs_give_bit_identical_reports():
    case = lookup("cantilever_edge_shear", row=2)
    a, b = case.run(), case.run()
    assert a.dc_history == b.dc_history and a.qp_iterations == b.qp_iterations
    assert np.array_equal(a.c, b.c) and np.array_equal(a.u, b.u)


@settings(max_examples=20, deadline=None)
@given(theta=st.floats(0, 3.2), ratio=st.floats(1, 1e4), source=st.floats(0, 10))
def test_nonneg_iterates_stay_nonnegative(theta, ratio, source):
    # anisotropic diffusion on triangles breaks the Galerkin maximum principle
    mesh = generate_structured_rect(0, 0, 1, 1, 9, 9, "tri")
    bcs = (
        BoundaryCondition("dirichlet_displacement", "bottom", (0.0, 0.0)),
        BoundaryCondition("dirichlet_concentration", "left", 1.0),
        BoundaryCondition("dirichlet_concentration", "right", 0.0),
        BoundaryCondition("dirichlet_concentration", "top", 0.0),
        BoundaryCondition("dirichlet_concentration", "bottom", 0.0),
    )
    diff = Constant(rotated_tensor(theta, ratio, 1.0))
    loads = Loads(body_force=(0.0, -10.0), source=source)
    rep = staggered_solve(mesh, LAME, diff, loads, bcs, CoupledConfig(max_iters=20))
    assert rep.converged
    assert all(m >= -1e-14 for m in rep.min_c_history)
    gal = staggered_solve(mesh, LAME, diff, loads, bcs, CoupledConfig(formulation="galerkin", max_iters=20))
    if gal.min_c >= 0:
        np.testing.assert_allclose(rep.c, gal.c, rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("name", ["plate_with_hole", "beam_three_holes"])
@pytest.mark.parametrize("row", [4, 5])
def test_hole_cases_strong_anisotropy_rows_violate(name, row):
    rep = lookup(name, row=row).run(formulation="galerkin")
    assert rep.min_c < -1e-2 and rep.degradation_index > 0
