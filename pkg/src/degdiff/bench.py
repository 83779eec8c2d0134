"""Benchmark problems: manufactured solution, error norms, convergence rates
and the catalog of beam and perforated-domain cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Callable, NamedTuple

import numpy as np

from .assembly import element_geometry, gradient_at_quadrature, interpolate_at_quadrature
from .coupling import CoupledConfig, Loads, RunReport, staggered_solve
from .materials import (
    Constant,
    FrobeniusNorm,
    InvariantTension,
    LameModel,
    rotated_tensor,
)
from .mesh import BoundaryCondition, Mesh, generate_structured_rect, nearest_node, read_mesh, with_sets

__all__ = [
    "CaseSpec",
    "UnknownCaseError",
    "ErrorNorms",
    "ConvergenceTable",
    "manufactured_solution",
    "error_norms",
    "convergence_study",
    "case_catalog",
    "lookup",
    "fixture_path",
    "concentration_centroid",
]

PI = math.pi

# parameters shared by all physical test problems
RHO = 1.0
C_REF = 1.0
E_REF = 1e-4
LAME = LameModel(lambda0=1e6, mu0=1e6, lambda1=-9e5, mu1=-9e5, c_ref=C_REF)

SELF_WEIGHT = (0.0, -10.0)


class UnknownCaseError(KeyError):
    pass


# -- manufactured solution on the unit square ---------------------------------

MMS_LAME = LameModel(lambda0=2.0, mu0=PI + 2.0, lambda1=-1.0, mu1=-PI, c_ref=1.0)
MMS_BETA = 2.0
MMS_ETA = 1.0
MMS_DIFFUSIVITY = InvariantTension.scaled(2.0 * np.eye(2), MMS_BETA, MMS_BETA, MMS_ETA, MMS_ETA, E_REF)
MMS_GAMMA_S = (MMS_BETA - 1.0) / math.expm1(MMS_ETA * E_REF)


class Manufactured(NamedTuple):
    u: np.ndarray
    c: np.ndarray
    f: np.ndarray
    b: np.ndarray


def manufactured_solution(x, y) -> Manufactured:
    """Closed-form displacement, concentration, source and body force.

    Vector entries are stacked on the leading axis, e.g. ``u.shape == (2,) + x.shape``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sx, cx = np.sin(PI * x / 2), np.cos(PI * x / 2)
    sy, cy = np.sin(PI * y / 2), np.cos(PI * y / 2)
    g = MMS_GAMMA_S
    e = np.exp(cx * sy)
    u = np.stack([sx * sy / PI, cx * cy / PI])
    c = 1.0 + sx * sy / PI
    f = PI * sx * sy * ((1.0 - g) + g * e) - PI * g / 4.0 * np.sin(PI * x) * np.cos(PI * y) * e
    b = np.stack(
        [
            PI * sx * sy + PI / 4.0 * np.cos(PI * x) * (1.0 - np.cos(PI * y)),
            PI * cx * cy - PI / 4.0 * np.sin(PI * x) * np.sin(PI * y),
        ]
    )
    return Manufactured(u, c, f, b)


def manufactured_gradients(x, y):
    """Exact gradients: ``grad_u[i, j] = d u_i / d x_j`` and ``grad_c``."""
    sx, cx = np.sin(PI * x / 2), np.cos(PI * x / 2)
    sy, cy = np.sin(PI * y / 2), np.cos(PI * y / 2)
    grad_c = np.stack([0.5 * cx * sy, 0.5 * sx * cy])
    grad_u = np.stack([grad_c, np.stack([-0.5 * sx * cy, -0.5 * cx * sy])])
    return grad_u, grad_c


def _mms_bcs():
    def disp(x, y):
        return manufactured_solution(x, y).u

    def conc(x, y):
        return manufactured_solution(x, y).c

    bcs = []
    for side in ("left", "right", "bottom", "top"):
        bcs.append(BoundaryCondition("dirichlet_displacement", side, disp))
        bcs.append(BoundaryCondition("dirichlet_concentration", side, conc))
    return bcs


# -- error norms and rates -----------------------------------------------------


@dataclass(frozen=True)
class ErrorNorms:
    l2_u: float
    h1_u: float
    l2_c: float
    h1_c: float

    def as_dict(self) -> dict:
        return {"l2_u": self.l2_u, "h1_u": self.h1_u, "l2_c": self.l2_c, "h1_c": self.h1_c}


def scalar_errors(mesh: Mesh, vh, exact: Callable, grad_exact: Callable) -> tuple[float, float]:
    """L2 and H1-seminorm of ``v_h - v`` by element quadrature."""
    geo = element_geometry(mesh)
    x, y = geo.xq[..., 0], geo.xq[..., 1]
    ev = interpolate_at_quadrature(mesh, vh) - exact(x, y)
    eg = gradient_at_quadrature(mesh, vh) - np.moveaxis(np.asarray(grad_exact(x, y)), 0, -1)
    l2 = math.sqrt(max(float(np.sum(geo.wdet * ev**2)), 0.0))
    h1 = math.sqrt(max(float(np.sum(geo.wdet * np.sum(eg**2, axis=-1))), 0.0))
    return l2, h1


def error_norms(mesh: Mesh, u_h, c_h, u_exact=None, grad_u_exact=None, c_exact=None, grad_c_exact=None) -> ErrorNorms:
    """Displacement and concentration errors; exact fields default to the manufactured solution.

    ``u_exact(x, y)`` returns ``(2, ...)`` and ``grad_u_exact(x, y)`` ``(2, 2, ...)``.
    """
    if u_exact is None:
        u_exact = lambda x, y: manufactured_solution(x, y).u  # noqa: E731
        grad_u_exact = lambda x, y: manufactured_gradients(x, y)[0]  # noqa: E731
    if c_exact is None:
        c_exact = lambda x, y: manufactured_solution(x, y).c  # noqa: E731
        grad_c_exact = lambda x, y: manufactured_gradients(x, y)[1]  # noqa: E731
    u_h = np.asarray(u_h, dtype=float).reshape(-1, 2)
    l2u2 = h1u2 = 0.0
    for comp in range(2):
        l2, h1 = scalar_errors(
            mesh,
            u_h[:, comp],
            lambda x, y, k=comp: np.asarray(u_exact(x, y))[k],
            lambda x, y, k=comp: np.asarray(grad_u_exact(x, y))[k],
        )
        l2u2 += l2**2
        h1u2 += h1**2
    l2c, h1c = scalar_errors(mesh, c_h, c_exact, grad_c_exact)
    return ErrorNorms(math.sqrt(l2u2), math.sqrt(h1u2), l2c, h1c)


def observed_rates(h, errors) -> list[float]:
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    return (np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])).tolist()


@dataclass
class ConvergenceTable:
    kind: str
    resolutions: list[int]
    h: list[float]
    errors: list[ErrorNorms]
    iterations: list[int]

    def rates(self) -> dict[str, list[float]]:
        return {
            key: observed_rates(self.h, [getattr(e, key) for e in self.errors])
            for key in ("l2_u", "h1_u", "l2_c", "h1_c")
        }

    def rows(self) -> list[dict]:
        """One row per mesh; rates refer to the step from the previous mesh."""
        rates = self.rates()
        out = []
        for k, (n, h, e, it) in enumerate(zip(self.resolutions, self.h, self.errors, self.iterations)):
            row = {"element": self.kind, "nodes_per_side": n, "h": h, "iterations": it}
            for key, val in e.as_dict().items():
                row[key] = val
                row[f"rate_{key}"] = rates[key][k - 1] if k else float("nan")
            out.append(row)
        return out


class ConvergenceError(RuntimeError):
    pass


def manufactured_case(kind: str = "quad", resolution: int = 9, formulation: str = "nonneg") -> "CaseSpec":
    return CaseSpec(
        name=f"manufactured_{'q4' if kind == 'quad' else 't3'}",
        geometry={"type": "rect", "extent": (0.0, 0.0, 1.0, 1.0), "nx": resolution, "ny": resolution, "kind": kind},
        bcs=tuple(_mms_bcs()),
        lame=MMS_LAME,
        diffusivity=MMS_DIFFUSIVITY,
        loads=Loads(
            body_force=lambda x, y: manufactured_solution(x, y).b,
            source=lambda x, y: manufactured_solution(x, y).f,
            density=RHO,
        ),
        eps_tol_c=1e-8,
        formulation=formulation,
        params={"element": kind},
    )


def convergence_study(kind: str = "quad", resolutions=(5, 9, 17, 33), tol: float = 1e-8) -> ConvergenceTable:
    """Coupled manufactured-solution runs on a hierarchy of uniform meshes."""
    resolutions = [int(n) for n in resolutions]
    if len(resolutions) < 3:
        raise ValueError("a convergence study needs at least three resolutions")
    errors, iters, hs = [], [], []
    for n in resolutions:
        case = manufactured_case(kind, n)
        mesh = case.build_mesh()
        report = case.run(mesh=mesh, eps_tol_c=tol)
        if not report.converged:
            raise ConvergenceError(f"staggered scheme did not converge on the {n}x{n} {kind} mesh")
        errors.append(error_norms(mesh, report.u, report.c))
        iters.append(report.iterations)
        hs.append(1.0 / (n - 1))
    return ConvergenceTable(kind, resolutions, hs, errors, iters)


# -- case catalog ----------------------------------------------------------------


def fixture_path(name: str) -> str:
    return str(resources.files("degdiff") / "fixtures" / "v1" / name)


@dataclass(frozen=True)
class CaseSpec:
    """A fully specified coupled problem (one table row)."""

    name: str
    geometry: dict
    bcs: tuple
    lame: LameModel
    diffusivity: object
    loads: Loads
    eps_tol_c: float
    formulation: str = "nonneg"
    max_iters: int = 100
    ellipticity: str = "pointwise"
    row: int | None = None
    params: dict = field(default_factory=dict)
    reference: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        if self.row is None:
            return self.name
        return f"{self.name}[{self.row}]"

    def with_resolution(self, n: int) -> "CaseSpec":
        if self.geometry["type"] != "rect":
            raise ValueError(f"case {self.name!r} uses a fixture mesh; resolution cannot be overridden")
        geo = dict(self.geometry)
        # keep the node-count ratio of the original grid
        scale = n / geo["nx"]
        geo["nx"] = int(n)
        geo["ny"] = max(2, int(round(geo["ny"] * scale)))
        return replace(self, geometry=geo)

    def build_mesh(self) -> Mesh:
        geo = self.geometry
        if geo["type"] == "rect":
            x0, y0, x1, y1 = geo["extent"]
            mesh = generate_structured_rect(x0, y0, x1, y1, geo["nx"], geo["ny"], geo.get("kind", "quad"))
            corners = {
                "corner_bl": [nearest_node(mesh, x0, y0)],
                "corner_br": [nearest_node(mesh, x1, y0)],
            }
            return with_sets(mesh, node_sets=corners)
        return read_mesh(geo["path"])

    def config(self, formulation=None, eps_tol_c=None, max_iters=None) -> CoupledConfig:
        return CoupledConfig(
            formulation=formulation or self.formulation,
            eps_tol_c=eps_tol_c if eps_tol_c is not None else self.eps_tol_c,
            max_iters=max_iters or self.max_iters,
            ellipticity=self.ellipticity,
        )

    def run(self, mesh: Mesh | None = None, formulation=None, eps_tol_c=None, max_iters=None) -> RunReport:
        mesh = mesh if mesh is not None else self.build_mesh()
        cfg = self.config(formulation, eps_tol_c, max_iters)
        return staggered_solve(mesh, self.lame, self.diffusivity, self.loads, self.bcs, cfg)


def _beam_geometry():
    # 21 nodes along each side of a 1.0 x 0.1 beam
    return {"type": "rect", "extent": (0.0, 0.0, 1.0, 0.1), "nx": 21, "ny": 21, "kind": "quad"}


def _beam_concentration_bcs():
    return (
        BoundaryCondition("dirichlet_concentration", "top", 0.0),
        BoundaryCondition("dirichlet_concentration", "bottom", 0.0),
    )


CANTILEVER_TABLE = [
    # (phi_s, max c, iterations)
    (5.0, 4.257e-1, 14),
    (10.0, 2.187e-1, 9),
    (20.0, 1.107e-1, 7),
]

SS_TABLE = [
    # (eta_s, max c, iterations)
    (1.0, 7.205e-1, 10),
    (1e3, 7.309e-1, 10),
    (2e4, 9.365e-1, 12),
]

FIXED_TABLE = [
    # (phi_t, max c, iterations)
    (1.0, 1.250e-1, 2),
    (5.0, 1.348e-1, 5),
    (7.0, 1.575e-1, 8),
]

PLATE_TABLE = [
    # ((d1, d1T, d1S), min c, degradation index, Galerkin iterations, nonneg iterations)
    ((1.0, 10.0, 10.0), 0.0, 0.0, 9, 9),
    ((10.0, 30.0, 20.0), 0.0, 0.0, 8, 8),
    ((100.0, 120.0, 110.0), -3.301e-3, 25.15, 6, 21),
    ((1000.0, 1200.0, 1100.0), -3.586e-2, 32.76, 5, 22),
    ((10000.0, 11000.0, 11000.0), -4.398e-2, 34.07, 4, 8),
]

BEAM_HOLES_TABLE = [
    ((1.0, 10.0, 10.0), 0.0, 0.0, 8, 8),
    ((10.0, 50.0, 30.0), 0.0, 0.0, 8, 8),
    ((100.0, 200.0, 150.0), -3.150e-2, 30.69, 6, 8),
    ((1000.0, 2000.0, 1500.0), -5.665e-2, 31.14, 6, 6),
    ((10000.0, 20000.0, 15000.0), -5.948e-2, 31.14, 6, 16),
]


def cantilever_cases() -> list[CaseSpec]:
    D0 = rotated_tensor(PI / 6, 1.0, 1.0)
    bcs = (
        BoundaryCondition("dirichlet_displacement", "left", (0.0, 0.0)),
        BoundaryCondition("neumann_traction", "right", (0.0, -500.0)),
    ) + _beam_concentration_bcs()
    return [
        CaseSpec(
            name="cantilever_edge_shear",
            geometry=_beam_geometry(),
            bcs=bcs,
            lame=LAME,
            diffusivity=InvariantTension.scaled(D0, 2.0, phi_s, 100.0, 1.0, E_REF),
            loads=Loads(body_force=None, source=10000.0, density=RHO),
            eps_tol_c=1e-8,
            row=k + 1,
            params={"phi_s": phi_s},
            reference={"max_c": max_c, "iterations": its},
        )
        for k, (phi_s, max_c, its) in enumerate(CANTILEVER_TABLE)
    ]


def simply_supported_cases() -> list[CaseSpec]:
    D0 = rotated_tensor(PI / 6, 1.0, 1.0)
    bcs = (
        BoundaryCondition("dirichlet_displacement", "corner_bl", (0.0, 0.0)),
        BoundaryCondition("dirichlet_displacement", "corner_br", (None, 0.0)),
    ) + _beam_concentration_bcs()
    return [
        CaseSpec(
            name="simply_supported_beam",
            geometry=_beam_geometry(),
            bcs=bcs,
            lame=LAME,
            diffusivity=InvariantTension.scaled(D0, 10.0, 10.0, 1.0, eta_s, E_REF),
            loads=Loads(body_force=SELF_WEIGHT, source=1000.0, density=RHO),
            eps_tol_c=1e-5,
            row=k + 1,
            params={"eta_s": eta_s},
            reference={"max_c": max_c, "iterations": its},
        )
        for k, (eta_s, max_c, its) in enumerate(SS_TABLE)
    ]


def _fixed_bcs():
    return (
        BoundaryCondition("dirichlet_displacement", "left", (0.0, 0.0)),
        BoundaryCondition("dirichlet_displacement", "right", (0.0, 0.0)),
    ) + _beam_concentration_bcs()


def fixed_beam_cases() -> list[CaseSpec]:
    D0 = rotated_tensor(0.0, 1.0, 1.0)
    return [
        CaseSpec(
            name="fixed_beam",
            geometry=_beam_geometry(),
            bcs=_fixed_bcs(),
            lame=LAME,
            diffusivity=InvariantTension.scaled(D0, phi_t, 1.0, 100.0, 1.0, E_REF),
            loads=Loads(body_force=SELF_WEIGHT, source=100.0, density=RHO),
            eps_tol_c=1e-7,
            row=k + 1,
            params={"phi_t": phi_t},
            reference={"max_c": max_c, "iterations": its},
        )
        for k, (phi_t, max_c, its) in enumerate(FIXED_TABLE)
    ]


def fixed_beam_frobenius_cases() -> list[CaseSpec]:
    D0 = rotated_tensor(0.0, 1.0, 1.0)
    return [
        CaseSpec(
            name="fixed_beam_frobenius",
            geometry=_beam_geometry(),
            bcs=_fixed_bcs(),
            lame=LAME,
            diffusivity=FrobeniusNorm(D0, 10.0 * D0, 100.0),
            loads=Loads(body_force=SELF_WEIGHT, source=100.0, density=RHO),
            eps_tol_c=1e-7,
            row=1,
            params={"lam": 100.0, "dinf_factor": 10.0},
        )
    ]


def _hole_cases(name, fixture, table, theta, d2, d2t, d2s) -> list[CaseSpec]:
    bcs = (
        BoundaryCondition("dirichlet_displacement", "hole", (0.0, 0.0)),
        BoundaryCondition("dirichlet_concentration", "hole", 1.0),
        BoundaryCondition("dirichlet_concentration", "outer", 0.0),
    )
    cases = []
    for k, ((d1, d1t, d1s), min_c, deg, it_g, it_n) in enumerate(table):
        diff = InvariantTension(
            rotated_tensor(theta, d1, d2),
            rotated_tensor(theta, d1t, d2t),
            rotated_tensor(theta, d1s, d2s),
            1.0,
            1.0,
            E_REF,
        )
        cases.append(
            CaseSpec(
                name=name,
                geometry={"type": "fixture", "path": fixture_path(fixture)},
                bcs=bcs,
                lame=LAME,
                diffusivity=diff,
                loads=Loads(body_force=SELF_WEIGHT, source=0.0, density=RHO),
                eps_tol_c=1e-5,
                # compression above the holes drives D(E) indefinite at a few
                # quadrature points once the material there has degraded
                ellipticity="assembled",
                row=k + 1,
                params={"d1": d1, "d1T": d1t, "d1S": d1s},
                reference={
                    "min_c": min_c,
                    "degradation_index": deg,
                    "iterations_galerkin": it_g,
                    "iterations_nonneg": it_n,
                },
            )
        )
    return cases


def plate_with_hole_cases() -> list[CaseSpec]:
    return _hole_cases("plate_with_hole", "plate_with_hole.mesh", PLATE_TABLE, PI / 3, 1.0, 10.0, 5.0)


def beam_three_holes_cases() -> list[CaseSpec]:
    return _hole_cases("beam_three_holes", "beam_three_holes.mesh", BEAM_HOLES_TABLE, PI / 4, 1.0, 5.0, 2.0)


def decoupled_smoke_cases() -> list[CaseSpec]:
    """Small problem with no feedback in either direction."""
    bcs = (
        BoundaryCondition("dirichlet_displacement", "left", (0.0, 0.0)),
        BoundaryCondition("dirichlet_concentration", "bottom", 0.0),
        BoundaryCondition("dirichlet_concentration", "top", 1.0),
    )
    return [
        CaseSpec(
            name="decoupled_smoke",
            geometry={"type": "rect", "extent": (0.0, 0.0, 1.0, 1.0), "nx": 5, "ny": 5, "kind": "quad"},
            bcs=bcs,
            lame=LameModel(1e6, 1e6, 0.0, 0.0, C_REF),
            diffusivity=Constant(np.eye(2)),
            loads=Loads(body_force=SELF_WEIGHT, source=1.0, density=RHO),
            eps_tol_c=1e-8,
        )
    ]


_BUILDERS = {
    "cantilever_edge_shear": cantilever_cases,
    "simply_supported_beam": simply_supported_cases,
    "fixed_beam": fixed_beam_cases,
    "fixed_beam_frobenius": fixed_beam_frobenius_cases,
    "plate_with_hole": plate_with_hole_cases,
    "beam_three_holes": beam_three_holes_cases,
    "decoupled_smoke": decoupled_smoke_cases,
    "manufactured_q4": lambda: [manufactured_case("quad", 17)],
    "manufactured_t3": lambda: [manufactured_case("tri", 17)],
}

# studies that are not single coupled runs
STUDIES = {"convergence_q4": "quad", "convergence_t3": "tri"}


def case_catalog() -> dict[str, list[CaseSpec]]:
    """Every named case with all of its table rows."""
    return {name: build() for name, build in _BUILDERS.items()}


def case_names() -> list[str]:
    return list(_BUILDERS) + list(STUDIES)


def lookup(name: str, row: int | None = None, **params) -> CaseSpec:
    """One case row, selected by 1-based ``row`` or by parameter values.

    ``lookup("cantilever_edge_shear", phi_s=10)`` and
    ``lookup("cantilever_edge_shear", row=2)`` are equivalent.
    """
    if name not in _BUILDERS:
        raise UnknownCaseError(f"unknown case {name!r}; known cases: {', '.join(case_names())}")
    rows = _BUILDERS[name]()
    if row is not None:
        if not 1 <= row <= len(rows):
            raise UnknownCaseError(f"case {name!r} has rows 1..{len(rows)}, got {row}")
        rows = [rows[row - 1]]
    for key, val in params.items():
        rows = [c for c in rows if key in c.params and _same(c.params[key], val)]
    if not rows:
        raise UnknownCaseError(f"no row of {name!r} matches {params}")
    if len(rows) > 1:
        raise UnknownCaseError(f"{len(rows)} rows of {name!r} match; give row= or more parameters")
    return rows[0]


def _same(a, b) -> bool:
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return math.isclose(a, b, rel_tol=1e-12)
    return a == b


def concentration_centroid(mesh: Mesh, c) -> tuple[float, float]:
    """Centroid ``int x c dA / int c dA`` of a nodal concentration field."""
    geo = element_geometry(mesh)
    cq = interpolate_at_quadrature(mesh, c)
    mass = float(np.sum(geo.wdet * cq))
    if mass == 0.0:
        raise ValueError("concentration field integrates to zero; centroid undefined")
    x = float(np.sum(geo.wdet * cq * geo.xq[..., 0])) / mass
    y = float(np.sum(geo.wdet * cq * geo.xq[..., 1])) / mass
    return x, y
