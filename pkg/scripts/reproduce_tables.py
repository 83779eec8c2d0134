"""Run every benchmark table and print measured values next to the references.

    python3 scripts/reproduce_tables.py [--cases NAME ...] [--out DIR]

Beam tables report max concentration and iterations; hole tables report
min concentration, degradation index and iterations for both formulations.
A CSV per table is written to ``--out`` when given.
"""

from __future__ import annotations

import argparse
import csv
import time
from pathlib import Path

from degdiff.bench import case_catalog
from degdiff.coupling import StaggeredError

BEAMS = ("cantilever_edge_shear", "simply_supported_beam", "fixed_beam", "fixed_beam_frobenius")
HOLES = ("plate_with_hole", "beam_three_holes")


def _run(case, formulation):
    t0 = time.perf_counter()
    try:
        rep = case.run(formulation=formulation)
        return rep, None, time.perf_counter() - t0
    except StaggeredError as exc:
        return None, str(exc), time.perf_counter() - t0


def beam_rows(name, cases):
    rows = []
    for case in cases:
        rep, err, secs = _run(case, "nonneg")
        ref = case.reference
        row = {"case": case.label, **case.params, "ref_max_c": ref.get("max_c"), "ref_iterations": ref.get("iterations")}
        if rep is None:
            row.update(max_c=None, iterations=None, error=err)
            print(f"{case.label:<28} breakdown: {err}")
        else:
            row.update(max_c=rep.max_c, iterations=rep.iterations, error="")
            ref_text = f"{ref['max_c']:.4e}" if "max_c" in ref else "-"
            print(
                f"{case.label:<28} max c {rep.max_c:.4e} (ref {ref_text})  "
                f"iterations {rep.iterations} (ref {ref.get('iterations', '-')})  {secs:.1f} s"
            )
        rows.append(row)
    return rows


def hole_rows(name, cases):
    rows = []
    for case in cases:
        ref = case.reference
        row = {"case": case.label, **case.params, "ref_min_c": ref["min_c"], "ref_index": ref["degradation_index"]}
        for form in ("galerkin", "nonneg"):
            rep, err, secs = _run(case, form)
            if rep is None:
                row[f"{form}_error"] = err
                print(f"{case.label:<22} {form:<8} breakdown: {err}")
                continue
            row.update(
                {
                    f"{form}_min_c": rep.min_c,
                    f"{form}_index": rep.degradation_index,
                    f"{form}_iterations": rep.iterations,
                    f"{form}_max_nonelliptic_points": max(rep.nonelliptic_history, default=0),
                }
            )
            # tabulated min c and index are for the Galerkin formulation only
            gal = form == "galerkin"
            ref_min = f" (ref {ref['min_c']:+.4e})" if gal else ""
            ref_idx = f" (ref {ref['degradation_index']:5.2f}%)" if gal else ""
            print(
                f"{case.label:<22} {form:<8} min c {rep.min_c:+.4e}{ref_min}  "
                f"index {rep.degradation_index:5.2f}%{ref_idx}  "
                f"iterations {rep.iterations} (ref {ref[f'iterations_{form}']})  {secs:.1f} s"
            )
        rows.append(row)
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", nargs="*", default=list(BEAMS + HOLES), choices=BEAMS + HOLES)
    ap.add_argument("--out", type=Path, help="directory for one CSV per table")
    args = ap.parse_args(argv)
    catalog = case_catalog()
    for name in args.cases:
        print(f"== {name}")
        rows = (hole_rows if name in HOLES else beam_rows)(name, catalog[name])
        if args.out:
            args.out.mkdir(parents=True, exist_ok=True)
            keys = list(dict.fromkeys(k for r in rows for k in r))
            with open(args.out / f"{name}.csv", "w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=keys)
                writer.writeheader()
                writer.writerows(rows)


if __name__ == "__main__":
    main()
