"""Generate the frozen unstructured T3 meshes for the perforated-domain cases.

Run once; the output goes to ``src/degdiff/fixtures/v1``. The meshes are
Delaunay triangulations of a jittered hexagonal point lattice plus evenly
spaced boundary points. Re-running with the same arguments reproduces the
files byte for byte.

    python3 scripts/make_hole_meshes.py [--out DIR]
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

from degdiff.mesh import Mesh, boundary_edges, write_mesh

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "degdiff" / "fixtures" / "v1"


def _segment_points(a, b, h):
    a, b = np.asarray(a, float), np.asarray(b, float)
    n = max(1, int(round(np.linalg.norm(b - a) / h)))
    t = np.arange(n) / n
    return a + t[:, None] * (b - a)


def _rect_boundary(x0, y0, x1, y1, h):
    corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    return np.vstack([_segment_points(corners[k], corners[(k + 1) % 4], h) for k in range(4)])


def _inside(p, box, pad=0.0):
    x0, y0, x1, y1 = box
    return (p[:, 0] > x0 - pad) & (p[:, 0] < x1 + pad) & (p[:, 1] > y0 - pad) & (p[:, 1] < y1 + pad)


def perforated_rectangle(outer, holes, h, hole_h=None, jitter=0.35, seed=0) -> Mesh:
    """T3 mesh of ``outer`` minus the axis-aligned square ``holes`` (boxes).

    ``jitter`` perturbs the interior lattice by up to that fraction of ``h``
    so that element shapes vary as they do in general-purpose meshers; an
    unperturbed hexagonal lattice gives near-equilateral triangles.
    """
    hole_h = hole_h or h
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = outer
    pts = [_rect_boundary(*outer, h)]
    for box in holes:
        pts.append(_rect_boundary(*box, hole_h))

    # hexagonal interior lattice
    dy = h * np.sqrt(3) / 2
    rows = []
    for j, y in enumerate(np.arange(y0 + dy, y1 - 0.5 * dy, dy)):
        xs = np.arange(x0 + h * (0.5 if j % 2 else 1.0), x1 - 0.4 * h, h)
        rows.append(np.column_stack([xs, np.full_like(xs, y)]))
    inner = np.vstack(rows)
    inner = inner + jitter * h * rng.uniform(-1, 1, inner.shape)
    keep = _inside(inner, (x0 + 0.5 * h, y0 + 0.5 * h, x1 - 0.5 * h, y1 - 0.5 * h))
    for box in holes:
        keep &= ~_inside(inner, box, pad=0.6 * hole_h)
    pts.append(inner[keep])
    nodes = np.vstack(pts)

    tri = Delaunay(nodes).simplices
    cent = nodes[tri].mean(axis=1)
    alive = np.ones(len(tri), bool)
    for box in holes:
        alive &= ~_inside(cent, box)
    tri = tri[alive]
    # counter-clockwise orientation
    a, b, c = nodes[tri[:, 0]], nodes[tri[:, 1]], nodes[tri[:, 2]]
    area = 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    tri[area < 0] = tri[area < 0][:, [0, 2, 1]]
    tri = tri[np.abs(area) > 1e-14 * h * h]

    # drop nodes no element uses (should not happen, kept as a guard)
    used = np.unique(tri)
    remap = -np.ones(len(nodes), dtype=np.int64)
    remap[used] = np.arange(len(used))
    nodes, tri = nodes[used], remap[tri]

    edges = boundary_edges(Mesh(nodes, tri, {}, {}))
    mid = nodes[edges].mean(axis=1)
    tol = 1e-9
    on_outer = (
        np.isclose(mid[:, 0], x0, atol=tol)
        | np.isclose(mid[:, 0], x1, atol=tol)
        | np.isclose(mid[:, 1], y0, atol=tol)
        | np.isclose(mid[:, 1], y1, atol=tol)
    )
    edge_sets = {"outer": edges[on_outer]}
    hole_edges = []
    for k, box in enumerate(holes):
        sel = ~on_outer & _inside(mid, box, pad=tol)
        if len(holes) > 1:
            edge_sets[f"hole{k + 1}"] = edges[sel]
        hole_edges.append(edges[sel])
        # the boundary of each hole must be recovered exactly
        length = np.linalg.norm(nodes[edges[sel, 1]] - nodes[edges[sel, 0]], axis=1).sum()
        expected = 2 * (box[2] - box[0]) + 2 * (box[3] - box[1])
        if not np.isclose(length, expected, rtol=1e-12):
            raise RuntimeError(f"hole {k + 1} boundary not recovered ({length} vs {expected})")
    edge_sets["hole"] = np.vstack(hole_edges)
    if len(edges) != len(edge_sets["outer"]) + len(edge_sets["hole"]):
        raise RuntimeError("boundary edges that belong to neither the outer boundary nor a hole")
    node_sets = {name: np.unique(e) for name, e in edge_sets.items()}
    return Mesh(nodes, tri, node_sets, edge_sets)


def plate_with_hole(h=1 / 24, seed=0, jitter=0.35) -> Mesh:
    s = 1.0 / 9.0
    hole = (0.5 - s / 2, 0.5 - s / 2, 0.5 + s / 2, 0.5 + s / 2)
    return perforated_rectangle((0.0, 0.0, 1.0, 1.0), [hole], h, hole_h=s / 4, jitter=jitter, seed=seed)


def beam_three_holes(h=1 / 15, seed=0, jitter=0.35) -> Mesh:
    s = 0.4
    holes = [(xc - s / 2, 0.5 - s / 2, xc + s / 2, 0.5 + s / 2) for xc in (2.5, 5.0, 7.5)]
    return perforated_rectangle((0.0, 0.0, 10.0, 1.0), holes, h, jitter=jitter, seed=seed)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=FIXTURES)
    ap.add_argument("--plate-h", type=float, default=1 / 24)
    ap.add_argument("--beam-h", type=float, default=1 / 15)
    ap.add_argument("--jitter", type=float, default=0.35, help="lattice perturbation, in units of h")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    for name, mesh in (
        ("plate_with_hole", plate_with_hole(args.plate_h, args.seed, args.jitter)),
        ("beam_three_holes", beam_three_holes(args.beam_h, args.seed, args.jitter)),
    ):
        path = args.out / f"{name}.mesh"
        write_mesh(mesh, path)
        print(f"{path}: {mesh.n_nodes} nodes, {mesh.n_elements} triangles")


if __name__ == "__main__":
    main()
