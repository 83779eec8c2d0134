"""Shape functions, quadrature and global assembly for T3/Q4 meshes.

Quadrature: T3 uses the 3-point degree-2 rule, Q4 the 2x2 Gauss rule,
boundary edges the 2-point Gauss rule. Element matrices are symmetrised
before scatter so that assembled matrices are exactly symmetric.
Dirichlet data is eliminated symmetrically (no penalty), which keeps the
reduced operators SPD.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .materials import evaluate_diffusivity, lame
from .mesh import Mesh, boundary_nodes, check_boundary_conditions
from .solvers import SymSparseMatrix

__all__ = [
    "QuadratureRule",
    "DiscreteSystem",
    "quadrature",
    "element_geometry",
    "assemble_diffusion",
    "assemble_elasticity",
    "strain_at_quadrature",
    "interpolate_at_quadrature",
    "gradient_at_quadrature",
    "dirichlet_values",
]

_GAUSS2 = np.array([-1.0, 1.0]) / np.sqrt(3.0)


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return len(self.weights)


def quadrature(kind: str) -> QuadratureRule:
    if kind == "tri":
        pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
        return QuadratureRule(pts, np.full(3, 1 / 6))
    if kind == "quad":
        # ordered to match the counter-clockwise corner numbering
        g = _GAUSS2
        pts = np.array([[g[0], g[0]], [g[1], g[0]], [g[1], g[1]], [g[0], g[1]]])
        return QuadratureRule(pts, np.ones(4))
    if kind == "edge":
        return QuadratureRule(_GAUSS2.copy(), np.ones(2))
    raise ValueError(f"unknown element kind {kind!r}")


def shape_functions(kind: str, xi: np.ndarray):
    """Values ``(nq, k)`` and reference derivatives ``(nq, k, 2)`` at points ``xi``."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    s, t = xi[:, 0], xi[:, 1]
    if kind == "tri":
        N = np.column_stack([1 - s - t, s, t])
        dN = np.broadcast_to(np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]), (len(s), 3, 2))
        return N, dN.copy()
    sx = np.array([-1.0, 1.0, 1.0, -1.0])
    sy = np.array([-1.0, -1.0, 1.0, 1.0])
    a = 1 + np.outer(s, sx)
    b = 1 + np.outer(t, sy)
    N = 0.25 * a * b
    dN = np.stack([0.25 * sx * b, 0.25 * a * sy], axis=-1)
    return N, dN


@dataclass(frozen=True)
class Geometry:
    N: np.ndarray  # (nq, k)
    dNdx: np.ndarray  # (ne, nq, k, 2)
    wdet: np.ndarray  # (ne, nq) quadrature weight times |J|
    xq: np.ndarray  # (ne, nq, 2)


def element_geometry(mesh: Mesh) -> Geometry:
    """Per-element quadrature data, cached on the (immutable) mesh."""
    geo = mesh.__dict__.get("_geometry")
    if geo is not None:
        return geo
    rule = quadrature(mesh.kind)
    N, dN = shape_functions(mesh.kind, rule.points)
    X = mesh.nodes[mesh.elements]  # (ne, k, 2)
    J = np.einsum("qka,ekb->eqab", dN, X)  # J[a, b] = d x_b / d xi_a
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    if np.any(det <= 0):
        e = int(np.argwhere(det <= 0)[0, 0])
        raise ValueError(f"element {e} has a non-positive Jacobian at a quadrature point")
    inv = np.empty_like(J)
    inv[..., 0, 0] = J[..., 1, 1] / det
    inv[..., 1, 1] = J[..., 0, 0] / det
    inv[..., 0, 1] = -J[..., 0, 1] / det
    inv[..., 1, 0] = -J[..., 1, 0] / det
    dNdx = np.einsum("eqab,qkb->eqka", inv, dN)
    geo = Geometry(N, dNdx, det * rule.weights, np.einsum("qk,ekd->eqd", N, X))
    mesh.__dict__["_geometry"] = geo
    return geo


def interpolate_at_quadrature(mesh: Mesh, c) -> np.ndarray:
    """FE interpolant of nodal scalars at the quadrature points, ``(ne, nq)``."""
    geo = element_geometry(mesh)
    return np.einsum("qk,ek->eq", geo.N, np.asarray(c, dtype=float)[mesh.elements])


def gradient_at_quadrature(mesh: Mesh, c) -> np.ndarray:
    geo = element_geometry(mesh)
    return np.einsum("eqka,ek->eqa", geo.dNdx, np.asarray(c, dtype=float)[mesh.elements])


def strain_at_quadrature(mesh: Mesh, u) -> np.ndarray:
    """Symmetric displacement gradient ``[exx, eyy, exy]`` per quadrature point.

    ``u`` is either ``(n_nodes, 2)`` or interleaved ``(2 n_nodes,)``.
    """
    u = np.asarray(u, dtype=float).reshape(-1, 2)
    geo = element_geometry(mesh)
    G = np.einsum("eqka,ekb->eqba", geo.dNdx, u[mesh.elements])  # G[b, a] = d u_b / d x_a
    return np.stack(
        [G[..., 0, 0], G[..., 1, 1], 0.5 * (G[..., 0, 1] + G[..., 1, 0])], axis=-1
    )


@dataclass(frozen=True)
class DiscreteSystem:
    """Reduced system ``K x = f`` over the free degrees of freedom.

    ``free`` and ``fixed`` are global DOF indices; ``fixed_values`` holds the
    prescribed values; ``load`` is the full load vector before elimination.
    """

    K: SymSparseMatrix
    f: np.ndarray
    free: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    n_dofs: int
    load: np.ndarray

    @property
    def n_free(self) -> int:
        return len(self.free)

    def expand(self, x_free) -> np.ndarray:
        """Global DOF vector from free values plus the prescribed ones."""
        out = np.empty(self.n_dofs)
        out[self.free] = x_free
        out[self.fixed] = self.fixed_values
        return out


def _evaluate(value, x, y):
    if callable(value):
        return np.broadcast_to(np.asarray(value(x, y), dtype=float), np.shape(x)).copy()
    return np.full(np.shape(x), float(value))


def _evaluate_vector(value, x, y):
    """Two component arrays (or None for an unconstrained component)."""
    if callable(value):
        out = value(x, y)
        return [np.broadcast_to(np.asarray(v, dtype=float), np.shape(x)).copy() for v in out]
    comps = list(value)
    if len(comps) != 2:
        raise ValueError("vector boundary values need two components")
    return [None if v is None else _evaluate(v, x, y) for v in comps]


def _scatter(mesh: Mesh, Ke: np.ndarray, ndof_node: int, n_dofs: int) -> sp.csr_matrix:
    Ke = 0.5 * (Ke + np.swapaxes(Ke, 1, 2))
    if ndof_node == 1:
        dofs = mesh.elements
    else:
        dofs = (ndof_node * mesh.elements[:, :, None] + np.arange(ndof_node)).reshape(len(mesh.elements), -1)
    m = dofs.shape[1]
    rows = np.repeat(dofs, m, axis=1).ravel()
    cols = np.tile(dofs, (1, m)).ravel()
    # Stable sort + segmented sum: (i, j) and (j, i) accumulate the same
    # values in the same element order, so the result is exactly symmetric
    # and bit-reproducible. scipy's own duplicate summation does not promise
    # an order.
    key = rows * n_dofs + cols
    order = np.argsort(key, kind="stable")
    key = key[order]
    starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    data = np.add.reduceat(Ke.ravel()[order], starts)
    ukey = key[starts]
    r, c = np.divmod(ukey, n_dofs)
    indptr = np.searchsorted(r, np.arange(n_dofs + 1))
    return sp.csr_matrix((data, c, indptr), shape=(n_dofs, n_dofs))


def _edge_load(mesh: Mesh, edges: np.ndarray, value, n_comp: int) -> tuple[np.ndarray, np.ndarray]:
    """Consistent nodal loads ``int N_a * value ds`` over a set of edges."""
    rule = quadrature("edge")
    Ne = np.column_stack([(1 - rule.points) / 2, (1 + rule.points) / 2])  # (2, 2)
    X = mesh.nodes[edges]  # (m, 2, 2)
    length = np.linalg.norm(X[:, 1] - X[:, 0], axis=1)
    xq = np.einsum("qk,mkd->mqd", Ne, X)
    w = rule.weights * 0.5  # reference edge [-1, 1] -> physical length
    if n_comp == 1:
        v = _evaluate(value, xq[..., 0], xq[..., 1])[..., None]
    else:
        comps = _evaluate_vector(value, xq[..., 0], xq[..., 1])
        v = np.stack([np.zeros_like(xq[..., 0]) if c is None else c for c in comps], axis=-1)
    fe = np.einsum("q,qk,mqc,m->mkc", w, Ne, v, length)
    if n_comp == 1:
        return edges.ravel(), fe.reshape(-1)
    dofs = (n_comp * edges[:, :, None] + np.arange(n_comp)).reshape(-1)
    return dofs, fe.reshape(-1)


def _edges_of(mesh: Mesh, target: str) -> np.ndarray:
    if target not in mesh.edge_sets:
        raise ValueError(f"Neumann data needs an edge set; {target!r} is not one")
    return mesh.edge_sets[target]


def _dirichlet(mesh: Mesh, bcs, kind: str, n_comp: int):
    fixed = {}
    for bc in bcs:
        if bc.kind != kind:
            continue
        nodes = np.array(boundary_nodes(mesh, bc.target), dtype=np.int64)
        x, y = mesh.nodes[nodes, 0], mesh.nodes[nodes, 1]
        if n_comp == 1:
            for i, v in zip(nodes.tolist(), _evaluate(bc.value, x, y).tolist()):
                fixed[i] = v
        else:
            for comp, vals in enumerate(_evaluate_vector(bc.value, x, y)):
                if vals is None:
                    continue
                for i, v in zip(nodes.tolist(), vals.tolist()):
                    fixed[n_comp * i + comp] = v
    idx = np.array(sorted(fixed), dtype=np.int64)
    return idx, np.array([fixed[i] for i in idx.tolist()], dtype=float)


def eliminate(K: sp.csr_matrix, F: np.ndarray, fixed: np.ndarray, values: np.ndarray) -> DiscreteSystem:
    n = K.shape[0]
    mask = np.ones(n, dtype=bool)
    mask[fixed] = False
    free = np.flatnonzero(mask)
    Kff = K[free][:, free]
    f = F[free] - K[free][:, fixed] @ values
    return DiscreteSystem(SymSparseMatrix.from_full(Kff), f, free, fixed, values, n, F.copy())


def diffusion_operator(mesh: Mesh, model, strain=None, pointwise_check: bool = True) -> sp.csr_matrix:
    """Unreduced stiffness ``int grad N_i . D grad N_j`` over all nodes.

    With ``pointwise_check`` a non positive definite ``D`` at any quadrature
    point raises :class:`~degdiff.materials.MaterialError`.
    """
    geo = element_geometry(mesh)
    if strain is None:
        strain = np.zeros(geo.wdet.shape + (3,))
    D = evaluate_diffusivity(model, strain, check=pointwise_check)
    Ke = np.einsum("eqia,eqab,eqjb,eq->eij", geo.dNdx, D, geo.dNdx, geo.wdet)
    return _scatter(mesh, Ke, 1, mesh.n_nodes)


def assemble_diffusion(
    mesh: Mesh, model, strain=None, source=None, bcs=(), pointwise_check: bool = True
) -> DiscreteSystem:
    """Diffusion system with the diffusivity evaluated per quadrature point.

    ``strain`` is an ``(ne, nq, 3)`` array from :func:`strain_at_quadrature`
    (``None`` means unstrained, ``D = D0``). ``source`` is a constant or
    ``f(x, y)``. ``pointwise_check`` is passed to :func:`diffusion_operator`.
    """
    check_boundary_conditions(mesh, bcs, "c")
    geo = element_geometry(mesh)
    K = diffusion_operator(mesh, model, strain, pointwise_check)
    F = np.zeros(mesh.n_nodes)
    if source is not None:
        fq = _evaluate(source, geo.xq[..., 0], geo.xq[..., 1])
        np.add.at(F, mesh.elements, np.einsum("qk,eq,eq->ek", geo.N, fq, geo.wdet))
    for bc in bcs:
        if bc.kind == "neumann_flux":
            dofs, vals = _edge_load(mesh, _edges_of(mesh, bc.target), bc.value, 1)
            np.add.at(F, dofs, vals)
    fixed, values = _dirichlet(mesh, bcs, "dirichlet_concentration", 1)
    return eliminate(K, F, fixed, values)


def elasticity_operator(mesh: Mesh, lam: np.ndarray, mu: np.ndarray) -> sp.csr_matrix:
    """Plane-strain stiffness for Lame moduli given per quadrature point."""
    geo = element_geometry(mesh)
    ne, nq, k, _ = geo.dNdx.shape
    B = np.zeros((ne, nq, 3, 2 * k))
    B[..., 0, 0::2] = geo.dNdx[..., 0]
    B[..., 1, 1::2] = geo.dNdx[..., 1]
    B[..., 2, 0::2] = geo.dNdx[..., 1]
    B[..., 2, 1::2] = geo.dNdx[..., 0]
    C = np.zeros((ne, nq, 3, 3))
    C[..., 0, 0] = C[..., 1, 1] = lam + 2 * mu
    C[..., 0, 1] = C[..., 1, 0] = lam
    C[..., 2, 2] = mu
    Ke = np.einsum("eqai,eqab,eqbj,eq->eij", B, C, B, geo.wdet)
    return _scatter(mesh, Ke, 2, 2 * mesh.n_nodes)


def assemble_elasticity(mesh: Mesh, model, conc=None, body_force=None, bcs=(), density: float = 1.0) -> DiscreteSystem:
    """Plane-strain elasticity with concentration-dependent Lame moduli.

    DOFs are interleaved ``(ux0, uy0, ux1, ...)``. ``body_force`` is a
    2-sequence of constants/callables or a callable returning two arrays.
    """
    check_boundary_conditions(mesh, bcs, "u")
    geo = element_geometry(mesh)
    c = np.zeros(mesh.n_nodes) if conc is None else np.asarray(conc, dtype=float)
    if c.shape != (mesh.n_nodes,):
        raise ValueError(f"concentration field has shape {c.shape}, mesh has {mesh.n_nodes} nodes")
    lam, mu = lame(model, interpolate_at_quadrature(mesh, c), where="(element, point) ")
    K = elasticity_operator(mesh, lam, mu)
    F = np.zeros(2 * mesh.n_nodes)
    if body_force is not None:
        comps = _evaluate_vector(body_force, geo.xq[..., 0], geo.xq[..., 1])
        for a, bq in enumerate(comps):
            if bq is None:
                continue
            fe = density * np.einsum("qk,eq,eq->ek", geo.N, bq, geo.wdet)
            np.add.at(F, 2 * mesh.elements + a, fe)
    for bc in bcs:
        if bc.kind == "neumann_traction":
            dofs, vals = _edge_load(mesh, _edges_of(mesh, bc.target), bc.value, 2)
            np.add.at(F, dofs, vals)
    fixed, values = _dirichlet(mesh, bcs, "dirichlet_displacement", 2)
    return eliminate(K, F, fixed, values)


def dirichlet_values(mesh: Mesh, bcs, physics: str):
    """Prescribed global DOF indices and values for ``"u"`` or ``"c"``."""
    if physics == "u":
        return _dirichlet(mesh, bcs, "dirichlet_displacement", 2)
    return _dirichlet(mesh, bcs, "dirichlet_concentration", 1)
