"""Two-dimensional meshes of 3-node triangles or 4-node quadrilaterals.

Nodes of structured grids are numbered x-fastest, row by row from the
bottom. Triangle grids split every cell along its SW-NE diagonal.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Mesh",
    "MeshError",
    "BoundaryCondition",
    "generate_structured_rect",
    "read_mesh",
    "write_mesh",
    "boundary_nodes",
]

BC_KINDS = (
    "dirichlet_displacement",
    "neumann_traction",
    "dirichlet_concentration",
    "neumann_flux",
)


class MeshError(ValueError):
    """Invalid mesh data or an unknown boundary set."""


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    elements: np.ndarray
    node_sets: dict[str, np.ndarray] = field(default_factory=dict)
    edge_sets: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float).reshape(-1, 2)
        elements = np.array(self.elements, dtype=np.int64)
        if elements.ndim != 2 or elements.shape[1] not in (3, 4):
            raise MeshError("elements must be an (M, 3) or (M, 4) index array")
        node_sets = {
            k: np.unique(np.asarray(v, dtype=np.int64)) for k, v in self.node_sets.items()
        }
        edge_sets = {
            k: np.asarray(v, dtype=np.int64).reshape(-1, 2) for k, v in self.edge_sets.items()
        }
        for arr in (nodes, elements, *node_sets.values(), *edge_sets.values()):
            arr.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "node_sets", node_sets)
        object.__setattr__(self, "edge_sets", edge_sets)
        validate(self)

    @property
    def kind(self) -> str:
        return "tri" if self.elements.shape[1] == 3 else "quad"

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def element_areas(self) -> np.ndarray:
        xy = self.nodes[self.elements]
        x, y = xy[..., 0], xy[..., 1]
        # shoelace formula, valid for both element kinds
        return 0.5 * np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1)

    def set_names(self) -> list[str]:
        return sorted(set(self.node_sets) | set(self.edge_sets))

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        if self.set_names() != other.set_names():
            return False
        if set(self.node_sets) != set(other.node_sets) or set(self.edge_sets) != set(other.edge_sets):
            return False
        return (
            np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.elements, other.elements)
            and all(np.array_equal(v, other.node_sets[k]) for k, v in self.node_sets.items())
            and all(np.array_equal(v, other.edge_sets[k]) for k, v in self.edge_sets.items())
        )

    __hash__ = None


@dataclass(frozen=True)
class BoundaryCondition:
    """A boundary condition applied on a named node or edge set.

    ``value`` is a constant or a callable ``value(x, y)`` evaluated on
    coordinate arrays. Displacement values are 2-sequences; a ``None``
    component leaves that component unconstrained (roller/pin supports).
    """

    kind: str
    target: str
    value: object = 0.0

    def __post_init__(self):
        if self.kind not in BC_KINDS:
            raise ValueError(f"unknown boundary condition kind {self.kind!r}")

    @property
    def physics(self) -> str:
        return "u" if self.kind in ("dirichlet_displacement", "neumann_traction") else "c"

    @property
    def is_dirichlet(self) -> bool:
        return self.kind.startswith("dirichlet")


def _corner_jacobians(xy: np.ndarray) -> np.ndarray:
    """Bilinear Jacobian determinants at the four corners of each quad."""
    out = np.empty(xy.shape[:2])
    for a in range(4):
        p, n, q = xy[:, a - 1], xy[:, a], xy[:, (a + 1) % 4]
        e1, e2 = q - n, p - n
        out[:, a] = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    return out


def validate(mesh: Mesh) -> None:
    n = mesh.n_nodes
    if n == 0 or mesh.n_elements == 0:
        raise MeshError("mesh has no nodes or no elements")
    if not np.all(np.isfinite(mesh.nodes)):
        raise MeshError("non-finite node coordinates")
    bad = np.flatnonzero((mesh.elements < 0).any(axis=1) | (mesh.elements >= n).any(axis=1))
    if bad.size:
        raise MeshError(f"element {bad[0]} references a node outside [0, {n})")
    xy = mesh.nodes[mesh.elements]
    if mesh.kind == "tri":
        bad = np.flatnonzero(mesh.element_areas() <= 0.0)
        if bad.size:
            raise MeshError(f"element {bad[0]} has non-positive signed area (clockwise or degenerate)")
    else:
        bad = np.flatnonzero((_corner_jacobians(xy) <= 0.0).any(axis=1))
        if bad.size:
            raise MeshError(f"element {bad[0]} has a non-positive corner Jacobian")
    for name, idx in mesh.node_sets.items():
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise MeshError(f"node set {name!r} references a node outside [0, {n})")
    if mesh.edge_sets:
        counts = _edge_counts(mesh.elements)
        for name, edges in mesh.edge_sets.items():
            for a, b in edges:
                key = (min(a, b), max(a, b))
                if counts.get(key, 0) != 1:
                    raise MeshError(
                        f"edge ({a}, {b}) of set {name!r} is not a boundary edge of exactly one element"
                    )


def _edge_counts(elements: np.ndarray) -> dict[tuple[int, int], int]:
    k = elements.shape[1]
    counts: dict[tuple[int, int], int] = {}
    for a in range(k):
        e = np.sort(np.stack([elements[:, a], elements[:, (a + 1) % k]], axis=1), axis=1)
        for i, j in e.tolist():
            counts[(i, j)] = counts.get((i, j), 0) + 1
    return counts


def boundary_edges(mesh: Mesh) -> np.ndarray:
    """All edges owned by exactly one element, oriented counter-clockwise."""
    k = mesh.elements.shape[1]
    counts = _edge_counts(mesh.elements)
    out = []
    for el in mesh.elements.tolist():
        for a in range(k):
            i, j = el[a], el[(a + 1) % k]
            if counts[(min(i, j), max(i, j))] == 1:
                out.append((i, j))
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def generate_structured_rect(x0, y0, x1, y1, nx: int, ny: int, kind: str = "quad") -> Mesh:
    """Uniform ``nx`` by ``ny`` node lattice over ``[x0, x1] x [y0, y1]``.

    Boundary sets ``left``, ``right``, ``bottom`` and ``top`` are created as
    both node sets and (counter-clockwise oriented) edge sets.
    """
    if int(nx) != nx or int(ny) != ny or nx < 2 or ny < 2:
        raise ValueError(f"node counts must be integers >= 2, got nx={nx}, ny={ny}")
    if not (x1 > x0 and y1 > y0):
        raise ValueError("rectangle extents must satisfy x1 > x0 and y1 > y0")
    if kind not in ("tri", "quad"):
        raise ValueError(f"element kind must be 'tri' or 'quad', got {kind!r}")
    nx, ny = int(nx), int(ny)
    xs = np.linspace(x0, x1, nx)
    ys = np.linspace(y0, y1, ny)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange(nx * ny).reshape(ny, nx)
    sw, se = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
    nw, ne = idx[1:, :-1].ravel(), idx[1:, 1:].ravel()
    if kind == "quad":
        elements = np.column_stack([sw, se, ne, nw])
    else:
        lower = np.column_stack([sw, se, ne])
        upper = np.column_stack([sw, ne, nw])
        elements = np.stack([lower, upper], axis=1).reshape(-1, 3)
    bottom, top = idx[0, :], idx[-1, :]
    left, right = idx[:, 0], idx[:, -1]
    node_sets = {"left": left, "right": right, "bottom": bottom, "top": top}
    edge_sets = {
        "bottom": np.column_stack([bottom[:-1], bottom[1:]]),
        "right": np.column_stack([right[:-1], right[1:]]),
        "top": np.column_stack([top[1:], top[:-1]]),
        "left": np.column_stack([left[1:], left[:-1]]),
    }
    return Mesh(nodes, elements, node_sets, edge_sets)


def boundary_nodes(mesh: Mesh, set_name: str) -> list[int]:
    """Sorted unique node indices of a node set, or of the nodes on an edge set."""
    found = []
    if set_name in mesh.node_sets:
        found.append(mesh.node_sets[set_name])
    if set_name in mesh.edge_sets:
        found.append(mesh.edge_sets[set_name].ravel())
    if not found:
        raise MeshError(f"unknown boundary set {set_name!r}; known: {mesh.set_names()}")
    return np.unique(np.concatenate(found)).tolist()


def write_mesh(mesh: Mesh, path) -> None:
    lines = [f"mesh 2d {mesh.kind}", f"nodes {mesh.n_nodes}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.nodes.tolist()]
    lines.append(f"elements {mesh.n_elements}")
    lines += [" ".join(map(str, el)) for el in mesh.elements.tolist()]
    for name in sorted(mesh.node_sets):
        idx = mesh.node_sets[name].tolist()
        lines.append(f"nodeset {name} {len(idx)}")
        lines += [str(i) for i in idx]
    for name in sorted(mesh.edge_sets):
        edges = mesh.edge_sets[name].tolist()
        lines.append(f"edgeset {name} {len(edges)}")
        lines += [f"{a} {b}" for a, b in edges]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    """Parse the line-oriented text mesh format written by :func:`write_mesh`."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path) as fh:
        raw = fh.readlines()
    # (line number, tokens) with comments and blank lines dropped
    rows = []
    for lineno, text in enumerate(raw, start=1):
        text = text.split("#", 1)[0].strip()
        if text:
            rows.append((lineno, text.split()))
    pos = 0

    def take(n_tokens, what, conv):
        nonlocal pos
        if pos >= len(rows):
            raise MeshError(f"{path}: unexpected end of file while reading {what}")
        lineno, tok = rows[pos]
        pos += 1
        if n_tokens is not None and len(tok) not in n_tokens:
            raise MeshError(f"{path}:{lineno}: expected {what}, got {' '.join(tok)!r}")
        try:
            return lineno, [conv(t) for t in tok]
        except ValueError:
            raise MeshError(f"{path}:{lineno}: cannot parse {what} from {' '.join(tok)!r}") from None

    def header(keyword, n_args):
        nonlocal pos
        if pos >= len(rows):
            raise MeshError(f"{path}: unexpected end of file, expected '{keyword}' header")
        lineno, tok = rows[pos]
        pos += 1
        if tok[0] != keyword or len(tok) != n_args + 1:
            raise MeshError(f"{path}:{lineno}: expected '{keyword}' header, got {' '.join(tok)!r}")
        return lineno, tok[1:]

    if not rows:
        raise MeshError(f"{path}: empty mesh file")
    lineno, tok = rows[0]
    if tok[:2] != ["mesh", "2d"] or len(tok) != 3 or tok[2] not in ("tri", "quad"):
        raise MeshError(f"{path}:{lineno}: expected header 'mesh 2d tri|quad'")
    kind = tok[2]
    npe = 3 if kind == "tri" else 4
    pos = 1
    _, (count,) = header("nodes", 1)
    n_nodes = _count(path, rows[pos - 1][0], count)
    nodes = [take((2,), "node coordinates 'x y'", float)[1] for _ in range(n_nodes)]
    _, (count,) = header("elements", 1)
    n_elem = _count(path, rows[pos - 1][0], count)
    elements = []
    for _ in range(n_elem):
        lineno, el = take((npe,), f"{npe} element node indices", int)
        for i in el:
            if not 0 <= i < n_nodes:
                raise MeshError(f"{path}:{lineno}: connectivity references node {i}, mesh has {n_nodes}")
        elements.append(el)
    node_sets, edge_sets = {}, {}
    while pos < len(rows):
        lineno, tok = rows[pos]
        if tok[0] not in ("nodeset", "edgeset") or len(tok) != 3:
            raise MeshError(f"{path}:{lineno}: expected 'nodeset NAME K' or 'edgeset NAME K'")
        pos += 1
        name, k = tok[1], _count(path, lineno, tok[2])
        if tok[0] == "nodeset":
            vals = []
            for _ in range(k):
                ln, (i,) = take((1,), "node index", int)
                if not 0 <= i < n_nodes:
                    raise MeshError(f"{path}:{ln}: node set {name!r} references node {i}, mesh has {n_nodes}")
                vals.append(i)
            node_sets[name] = vals
        else:
            vals = []
            for _ in range(k):
                ln, pair = take((2,), "edge 'n1 n2'", int)
                if not all(0 <= i < n_nodes for i in pair):
                    raise MeshError(f"{path}:{ln}: edge set {name!r} references a node outside [0, {n_nodes})")
                vals.append(pair)
            edge_sets[name] = vals
    return Mesh(np.array(nodes), np.array(elements, dtype=np.int64).reshape(-1, npe), node_sets, edge_sets)


def _count(path, lineno, token) -> int:
    try:
        n = int(token)
    except ValueError:
        raise MeshError(f"{path}:{lineno}: bad count {token!r}") from None
    if n < 0:
        raise MeshError(f"{path}:{lineno}: negative count {n}")
    return n


def check_boundary_conditions(mesh: Mesh, bcs, physics: str) -> None:
    """Well-posedness checks for the boundary conditions of one physics.

    Targets must exist, at least one Dirichlet condition must constrain a
    node, and no edge may carry both Dirichlet and Neumann data. Boundary
    edges without data are treated as homogeneous Neumann.
    """
    mine = [bc for bc in bcs if bc.physics == physics]
    for bc in mine:
        boundary_nodes(mesh, bc.target)
        if not bc.is_dirichlet and bc.target not in mesh.edge_sets:
            raise MeshError(f"Neumann condition on {bc.target!r} needs an edge set")
    dirichlet = [bc for bc in mine if bc.is_dirichlet]
    if not any(len(boundary_nodes(mesh, bc.target)) for bc in dirichlet):
        raise MeshError(f"no Dirichlet condition for physics {physics!r}; the system would be singular")
    d_edges = set()
    for bc in dirichlet:
        if bc.target in mesh.edge_sets:
            d_edges |= {tuple(sorted(e)) for e in mesh.edge_sets[bc.target].tolist()}
    for bc in mine:
        if not bc.is_dirichlet:
            clash = d_edges & {tuple(sorted(e)) for e in mesh.edge_sets[bc.target].tolist()}
            if clash:
                raise MeshError(
                    f"edge {sorted(clash)[0]} of {bc.target!r} carries both Dirichlet and Neumann data"
                )


def with_sets(mesh: Mesh, node_sets=None, edge_sets=None) -> Mesh:
    """Copy of ``mesh`` with extra (or replaced) named sets."""
    ns = dict(mesh.node_sets)
    ns.update(node_sets or {})
    es = dict(mesh.edge_sets)
    es.update(edge_sets or {})
    return Mesh(mesh.nodes, mesh.elements, ns, es)


def nearest_node(mesh: Mesh, x: float, y: float) -> int:
    return int(np.argmin(np.hypot(mesh.nodes[:, 0] - x, mesh.nodes[:, 1] - y)))
