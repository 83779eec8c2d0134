"""Diagnostics behind the known acceptance failures.

    python3 scripts/diagnostics.py mms-strain      # concentration rates, exact vs discrete strain
    python3 scripts/diagnostics.py ss-start        # simply supported row 3 vs initial concentration
    python3 scripts/diagnostics.py centroid        # fixed beam concentration centroid, global and midspan

Each prints a small table; nothing is written to disk.
"""

from __future__ import annotations

import argparse

import numpy as np

from degdiff.assembly import assemble_diffusion, element_geometry, strain_at_quadrature
from degdiff.bench import (
    concentration_centroid,
    lookup,
    manufactured_case,
    manufactured_gradients,
    manufactured_solution,
    scalar_errors,
)
from degdiff.coupling import CoupledConfig, StaggeredError, staggered_solve
from degdiff.solvers import solve_spd


def _c_errors(mesh, c):
    return scalar_errors(
        mesh, c, lambda x, y: manufactured_solution(x, y).c, lambda x, y: manufactured_gradients(x, y)[1]
    )


def mms_strain(resolutions=(5, 9, 17, 33, 65)):
    """Diffusion-only solves with the strain taken exactly or from the interpolated exact u."""
    for kind in ("quad", "tri"):
        exact, discrete, inv = [], [], []
        for n in resolutions:
            case = manufactured_case(kind, n)
            mesh = case.build_mesh()
            geo = element_geometry(mesh)
            gu, _ = manufactured_gradients(geo.xq[..., 0], geo.xq[..., 1])
            E = np.stack([gu[0, 0], gu[1, 1], 0.5 * (gu[0, 1] + gu[1, 0])], axis=-1)
            u_nodes = manufactured_solution(mesh.nodes[:, 0], mesh.nodes[:, 1]).u.T.ravel()
            Eh = strain_at_quadrature(mesh, u_nodes)
            inv.append(float(np.abs(Eh[..., 0] + Eh[..., 1]).max()))
            for strain, out in ((E, exact), (Eh, discrete)):
                ds = assemble_diffusion(mesh, case.diffusivity, strain, case.loads.source, case.bcs)
                out.append(_c_errors(mesh, ds.expand(solve_spd(ds.K, ds.f))))
        for label, errs in (("exact strain", exact), ("strain of interpolated u", discrete)):
            e = np.array(errs)
            rates = np.log2(e[:-1] / e[1:])
            print(f"{kind:<4} {label:<26} L2(c) rates {np.round(rates[:, 0], 2).tolist()}  H1(c) rates {np.round(rates[:, 1], 2).tolist()}")
        print(f"{kind:<4} max |I_h| at quadrature points (exact I = 0): {['%.1e' % v for v in inv]}")


def ss_start(levels=(0.0, 0.3, 0.4, 0.45, 0.5, 0.55, 0.6, 0.7, 0.8)):
    """Simply supported row 3 from uniform initial concentrations."""
    case = lookup("simply_supported_beam", row=3)
    mesh = case.build_mesh()
    fixed = np.unique(np.r_[mesh.node_sets["top"], mesh.node_sets["bottom"]])
    for level in levels:
        c0 = np.full(mesh.n_nodes, level)
        c0[fixed] = 0.0
        cfg = CoupledConfig(eps_tol_c=case.eps_tol_c, initial_c=c0)
        try:
            rep = staggered_solve(mesh, case.lame, case.diffusivity, case.loads, case.bcs, cfg)
            print(f"start {level:4.2f}: max c {rep.max_c:.4e}, {rep.iterations} iterations, converged {rep.converged}")
        except StaggeredError as exc:
            print(f"start {level:4.2f}: breakdown at iteration {exc.iteration}: {type(exc.cause).__name__}")


def centroid():
    """Centroid of c over the whole beam, over the middle half, and the peak height per column."""
    for name, row in (("fixed_beam", 3), ("fixed_beam_frobenius", 1)):
        case = lookup(name, row=row)
        mesh = case.build_mesh()
        rep = case.run(mesh=mesh)
        _, y = concentration_centroid(mesh, rep.c)
        x, yn = mesh.nodes.T
        mid = np.abs(x - 0.5) <= 0.25
        y_mid = float(np.sum(rep.c[mid] * yn[mid]) / np.sum(rep.c[mid]))
        peaks = []
        for xc in (0.05, 0.25, 0.5, 0.75, 0.95):
            col = np.flatnonzero(np.isclose(x, x[np.argmin(np.abs(x - xc))]))
            peaks.append(f"x={xc:.2f}: y={yn[col[np.argmax(rep.c[col])]]:.3f}")
        print(f"{case.label:<24} centroid y {y:.6f}  midspan nodal centroid y {y_mid:.6f}  peak {'; '.join(peaks)}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("what", choices=("mms-strain", "ss-start", "centroid"))
    args = ap.parse_args(argv)
    {"mms-strain": mms_strain, "ss-start": ss_start, "centroid": centroid}[args.what]()


if __name__ == "__main__":
    main()
