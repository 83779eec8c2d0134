"""Staggered (fixed-point) coupling of elasticity and diffusion solves."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .assembly import assemble_diffusion, assemble_elasticity, dirichlet_values, strain_at_quadrature
from .materials import LameModel, nonelliptic_mask
from .mesh import Mesh
from .solvers import solve_nonneg_qp, solve_spd

__all__ = [
    "Loads",
    "CoupledConfig",
    "RunReport",
    "staggered_solve",
    "degradation_index",
    "relative_modulus_field",
    "NEGATIVE_THRESHOLD",
]

log = logging.getLogger(__name__)

# concentrations below this count as violations; separates sign from roundoff
NEGATIVE_THRESHOLD = -1e-12

FORMULATIONS = ("galerkin", "nonneg")
# "pointwise": D(E) must be positive definite at every quadrature point.
# "assembled": pointwise loss is tolerated and counted; the assembled
# diffusion matrix must still be positive definite (enforced by the solver).
ELLIPTICITY = ("pointwise", "assembled")


@dataclass(frozen=True)
class Loads:
    body_force: object = None
    source: object = None
    density: float = 1.0


@dataclass(frozen=True)
class CoupledConfig:
    formulation: str = "nonneg"
    eps_tol_c: float = 1e-8
    max_iters: int = 100
    initial_c: np.ndarray | None = None
    ellipticity: str = "pointwise"

    def __post_init__(self):
        if self.formulation not in FORMULATIONS:
            raise ValueError(f"formulation must be one of {FORMULATIONS}, got {self.formulation!r}")
        if self.ellipticity not in ELLIPTICITY:
            raise ValueError(f"ellipticity must be one of {ELLIPTICITY}, got {self.ellipticity!r}")
        if not self.eps_tol_c > 0:
            raise ValueError(f"eps_tol_c must be positive, got {self.eps_tol_c}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError(f"max_iters must be an integer >= 1, got {self.max_iters}")
        if self.initial_c is not None and self.formulation == "nonneg":
            if np.any(np.asarray(self.initial_c) < 0):
                raise ValueError("initial concentration must be non-negative for the nonneg formulation")


@dataclass
class RunReport:
    converged: bool
    iterations: int
    dc_history: list[float]
    qp_iterations: list[int]
    min_c: float
    max_c: float
    degradation_index: float
    u: np.ndarray
    c: np.ndarray
    relative_modulus: np.ndarray
    formulation: str = "nonneg"
    min_c_history: list[float] = field(default_factory=list)
    # quadrature points with a non positive definite D, per iteration
    nonelliptic_history: list[int] = field(default_factory=list)

    def summary(self) -> dict:
        """Scalar fields only, in a fixed order."""
        return {
            "formulation": self.formulation,
            "converged": self.converged,
            "iterations": self.iterations,
            "min_c": self.min_c,
            "max_c": self.max_c,
            "degradation_index": self.degradation_index,
            "final_dc": self.dc_history[-1] if self.dc_history else float("nan"),
            "total_qp_iterations": int(sum(self.qp_iterations)),
            "max_nonelliptic_points": int(max(self.nonelliptic_history, default=0)),
        }


def degradation_index(c) -> float:
    """Percentage of nodes whose concentration is negative (below -1e-12)."""
    c = np.asarray(c, dtype=float)
    if c.size == 0:
        return 0.0
    return 100.0 * np.count_nonzero(c < NEGATIVE_THRESHOLD) / c.size


def relative_modulus_field(model: LameModel, c) -> np.ndarray:
    """Shear modulus relative to the virgin material, ``mu(c) / mu0``, per node.

    Values below one mean degradation, above one healing.
    """
    c = np.asarray(c, dtype=float)
    return (model.mu0 + model.mu1 * c / model.c_ref) / model.mu0


class StaggeredError(RuntimeError):
    """A sub-solve failed; ``iteration`` is the staggered iteration index.

    ``dc_history`` holds the increments of the iterations that completed.
    """

    def __init__(self, iteration: int, cause: Exception, dc_history=()):
        super().__init__(f"staggered iteration {iteration}: {type(cause).__name__}: {cause}")
        self.iteration = iteration
        self.cause = cause
        self.dc_history = list(dc_history)


def staggered_solve(mesh: Mesh, lame_model: LameModel, diff, loads: Loads, bcs, cfg: CoupledConfig) -> RunReport:
    """Alternate deformation and diffusion solves until ``|c_i - c_{i-1}|_2 < tol``.

    The first concentration iterate is ``cfg.initial_c`` or zero on free
    nodes with the prescribed values on Dirichlet nodes. The returned
    iteration count includes the iteration whose check passes.
    With ``cfg.ellipticity == "assembled"`` the diffusivity may lose
    positive definiteness at isolated quadrature points; those are counted in
    ``nonelliptic_history`` and the run fails only if the assembled matrix
    itself is not positive definite.
    """
    cdofs, cvals = dirichlet_values(mesh, bcs, "c")
    if cfg.initial_c is None:
        c_prev = np.zeros(mesh.n_nodes)
        c_prev[cdofs] = cvals
    else:
        c_prev = np.array(cfg.initial_c, dtype=float)
        if c_prev.shape != (mesh.n_nodes,):
            raise ValueError(f"initial_c has shape {c_prev.shape}, expected ({mesh.n_nodes},)")

    strict = cfg.ellipticity == "pointwise"
    history, qp_counts, min_hist, bad_hist = [], [], [], []
    converged = False
    u = np.zeros(2 * mesh.n_nodes)
    c = c_prev
    for i in range(1, int(cfg.max_iters) + 1):
        try:
            es = assemble_elasticity(mesh, lame_model, c_prev, loads.body_force, bcs, loads.density)
            u = es.expand(solve_spd(es.K, es.f))
            strain = strain_at_quadrature(mesh, u)
            if not strict:
                bad_hist.append(int(np.count_nonzero(nonelliptic_mask(diff.evaluate(strain)))))
            ds = assemble_diffusion(mesh, diff, strain, loads.source, bcs, pointwise_check=strict)
            if cfg.formulation == "nonneg":
                qp = solve_nonneg_qp(ds.K, ds.f)
                c = ds.expand(qp.x)
                qp_counts.append(qp.iterations)
            else:
                c = ds.expand(solve_spd(ds.K, ds.f))
                qp_counts.append(0)
        except Exception as exc:  # noqa: BLE001 - re-raised with the iteration index
            raise StaggeredError(i, exc, history) from exc
        dc = float(np.linalg.norm(c - c_prev))
        history.append(dc)
        min_hist.append(float(c.min()))
        log.debug("iteration %d: |dc| = %.3e, min c = %.3e", i, dc, c.min())
        c_prev = c
        if dc < cfg.eps_tol_c:
            converged = True
            break
    if not converged:
        log.warning("solution did not converge in %d staggered iterations", cfg.max_iters)

    return RunReport(
        converged=converged,
        iterations=len(history),
        dc_history=history,
        qp_iterations=qp_counts,
        min_c=float(c.min()),
        max_c=float(c.max()),
        degradation_index=degradation_index(c),
        u=u.reshape(-1, 2),
        c=c,
        relative_modulus=relative_modulus_field(lame_model, c),
        formulation=cfg.formulation,
        min_c_history=min_hist,
        nonelliptic_history=bad_hist if not strict else [0] * len(history),
    )
