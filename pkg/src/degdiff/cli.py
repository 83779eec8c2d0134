"""Command-line driver: run cataloged cases, sweeps and convergence studies.

Examples::

    degdiff run --case plate_with_hole --row 5 --formulation galerkin
    degdiff run --case cantilever_edge_shear --out results --format vtk,csv,report
    degdiff run --case convergence_q4
    degdiff run --case-file my_case.ini
    degdiff list

Exit codes: 0 success, 1 input or I/O error, 2 a run did not converge (or its
staggered iteration broke down).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import logging
import math
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import bench
from .coupling import FORMULATIONS, RunReport, StaggeredError
from .mesh import Mesh, MeshError

__all__ = ["RunConfig", "run", "main", "write_vtk", "write_csv", "write_report"]

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2
FORMATS = ("vtk", "csv", "report")


class InputError(Exception):
    """Bad flags, unknown cases, unreadable case files or unwritable outputs."""


# -- writers ---------------------------------------------------------------------

_VTK_CELL = {"tri": 5, "quad": 9}


def _fmt(x) -> str:
    return repr(float(x))


def _write_text(path, text: str) -> None:
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_vtk(mesh: Mesh, fields: dict, path, title: str = "degdiff output") -> None:
    """Legacy ASCII VTK (3.0) unstructured grid with nodal data.

    ``fields`` maps names to nodal arrays: shape ``(n,)`` is written as
    SCALARS, shape ``(n, 2)`` as VECTORS (with a zero z component).
    """
    n = mesh.n_nodes
    out = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]
    out.append(f"POINTS {n} double")
    out += [f"{_fmt(x)} {_fmt(y)} 0.0" for x, y in mesh.nodes.tolist()]
    k = mesh.elements.shape[1]
    out.append(f"CELLS {mesh.n_elements} {mesh.n_elements * (k + 1)}")
    out += [f"{k} " + " ".join(map(str, el)) for el in mesh.elements.tolist()]
    out.append(f"CELL_TYPES {mesh.n_elements}")
    out += [str(_VTK_CELL[mesh.kind])] * mesh.n_elements
    if fields:
        out.append(f"POINT_DATA {n}")
    for name, values in fields.items():
        v = np.asarray(values, dtype=float)
        if v.shape == (n,):
            out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            out += [_fmt(a) for a in v.tolist()]
        elif v.shape == (n, 2):
            out.append(f"VECTORS {name} double")
            out += [f"{_fmt(a)} {_fmt(b)} 0.0" for a, b in v.tolist()]
        else:
            raise ValueError(f"field {name!r} has shape {v.shape}; expected ({n},) or ({n}, 2)")
    _write_text(path, "\n".join(out) + "\n")


def _csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\r\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _csv_value(v) for k, v in row.items()})
    return buf.getvalue()


def _csv_value(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(rows, path) -> None:
    """CSV with a header row; ``rows`` is a dict or a list of dicts with equal keys."""
    if isinstance(rows, dict):
        rows = [rows]
    if not rows:
        raise ValueError("nothing to write")
    _write_text(path, _csv_text(list(rows)))


def _kv_value(v) -> str:
    if isinstance(v, np.ndarray):
        return " ".join(_fmt(a) for a in v.ravel().tolist())
    if isinstance(v, (list, tuple)):
        return " ".join(_fmt(a) if isinstance(a, float) else str(a) for a in v)
    if isinstance(v, (float, np.floating)):
        return _fmt(v)
    return str(v)


def report_items(report: RunReport, meta: dict | None = None) -> list[tuple[str, str]]:
    items = [(k, _kv_value(v)) for k, v in (meta or {}).items()]
    for f in fields(report):
        value = getattr(report, f.name)
        if isinstance(value, np.ndarray) and value.ndim == 2:
            items.append((f"{f.name}_shape", " ".join(map(str, value.shape))))
        items.append((f.name, _kv_value(value)))
    return items


def write_report(report: RunReport, path, meta: dict | None = None) -> None:
    """Key-value text (``key = value`` per line) holding every report field."""
    _write_text(path, "".join(f"{k} = {v}\n" for k, v in report_items(report, meta)))


# -- configuration -----------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    case: str | None = None
    case_file: str | None = None
    row: int | None = None
    formulation: str | None = None
    tol: float | None = None
    resolution: int | None = None
    out: str = "out"
    formats: tuple = ("csv", "report")
    deterministic: bool = False
    jobs: int = 1

    def __post_init__(self):
        if (self.case is None) == (self.case_file is None):
            raise InputError("give exactly one of --case or --case-file")
        if self.row is not None and self.row < 1:
            raise InputError(f"--row is 1-based, got {self.row}")
        if self.formulation is not None and self.formulation not in FORMULATIONS:
            raise InputError(f"--formulation must be one of {', '.join(FORMULATIONS)}")
        if self.tol is not None and not (self.tol > 0 and math.isfinite(self.tol)):
            raise InputError(f"--tol must be a positive number, got {self.tol}")
        if self.resolution is not None and self.resolution < 2:
            raise InputError(f"--resolution must be at least 2 nodes per side, got {self.resolution}")
        bad = [f for f in self.formats if f not in FORMATS]
        if bad or not self.formats:
            raise InputError(f"--format takes a comma list of {', '.join(FORMATS)}; got {','.join(self.formats)}")
        if self.jobs < 1:
            raise InputError(f"--jobs must be >= 1, got {self.jobs}")


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text).strip("_")


_CASE_KEYS = {"base", "row", "formulation", "eps_tol_c", "max_iters", "resolution", "mesh", "ellipticity", "name"}


def read_case_file(path) -> tuple[str, int | None, dict, dict]:
    """Parse an INI case file.

    ``[case]`` holds ``base`` (a catalog name) and optional ``row``, ``name``,
    ``formulation``, ``eps_tol_c``, ``max_iters``, ``resolution``,
    ``ellipticity`` and ``mesh`` (path to a mesh file, relative to the case
    file). ``[params]`` selects a row by parameter value instead of ``row``.
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str  # parameter names are case-sensitive (d1T, d1S)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise InputError(f"cannot read case file {path}: {exc.strerror or exc}") from None
    except configparser.Error as exc:
        raise InputError(f"{path}: {exc}") from None
    if not parser.has_section("case"):
        raise InputError(f"{path}: missing [case] section")
    sec = parser["case"]
    unknown = set(sec) - _CASE_KEYS
    if unknown:
        raise InputError(f"{path}: unknown keys in [case]: {', '.join(sorted(unknown))}")
    if "base" not in sec:
        raise InputError(f"{path}: [case] needs a 'base' catalog case")
    overrides = {}
    try:
        row = sec.getint("row") if "row" in sec else None
        if "formulation" in sec:
            overrides["formulation"] = sec["formulation"]
        if "eps_tol_c" in sec:
            overrides["eps_tol_c"] = sec.getfloat("eps_tol_c")
        if "max_iters" in sec:
            overrides["max_iters"] = sec.getint("max_iters")
        if "resolution" in sec:
            overrides["resolution"] = sec.getint("resolution")
        if "ellipticity" in sec:
            overrides["ellipticity"] = sec["ellipticity"]
        if "name" in sec:
            overrides["name"] = sec["name"]
        params = {k: float(v) for k, v in parser["params"].items()} if parser.has_section("params") else {}
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    if "mesh" in sec:
        overrides["mesh"] = str((Path(path).parent / sec["mesh"]).resolve())
    return sec["base"], row, params, overrides


# -- execution -------------------------------------------------------------------------


def _resolve(cfg: RunConfig) -> tuple[str, list[bench.CaseSpec]]:
    """Catalog rows to run, with overrides applied."""
    if cfg.case_file is not None:
        base, row, params, over = read_case_file(cfg.case_file)
    else:
        base, row, params, over = cfg.case, cfg.row, {}, {}
    if cfg.row is not None:
        row = cfg.row
    try:
        if row is not None or params:
            cases = [bench.lookup(base, row=row, **params)]
        else:
            catalog = bench.case_catalog()
            cases = catalog[base] if base in catalog else [bench.lookup(base)]
    except bench.UnknownCaseError as exc:
        raise InputError(exc.args[0]) from None

    out = []
    for case in cases:
        resolution = cfg.resolution if cfg.resolution is not None else over.get("resolution")
        if resolution is not None:
            try:
                case = case.with_resolution(resolution)
            except ValueError as exc:
                raise InputError(str(exc)) from None
        changes = {k: over[k] for k in ("eps_tol_c", "max_iters", "formulation", "ellipticity", "name") if k in over}
        if "mesh" in over:
            changes["geometry"] = {"type": "fixture", "path": over["mesh"]}
        if cfg.formulation:
            changes["formulation"] = cfg.formulation
        if cfg.tol is not None:
            changes["eps_tol_c"] = cfg.tol
        try:
            case = replace(case, **changes)
            case.config()  # type-check overrides before any solve
        except ValueError as exc:
            raise InputError(f"invalid case override: {exc}") from None
        out.append(case)
    return base, out


def _run_case(case: bench.CaseSpec):
    mesh = case.build_mesh()
    t0 = time.perf_counter()
    try:
        report = case.run(mesh=mesh)
        error = None
    except StaggeredError as exc:
        report, error = None, str(exc)
    return case, mesh, report, error, time.perf_counter() - t0


def _meta(case: bench.CaseSpec, mesh: Mesh) -> dict:
    meta = {"case": case.name, "row": case.row if case.row is not None else ""}
    for k, v in case.params.items():
        meta[f"param_{k}"] = v
    meta.update(
        {
            "formulation": case.formulation,
            "eps_tol_c": case.eps_tol_c,
            "element": mesh.kind,
            "n_nodes": mesh.n_nodes,
            "n_elements": mesh.n_elements,
        }
    )
    return meta


def _stem(case: bench.CaseSpec) -> str:
    row = f"_row{case.row}" if case.row is not None else ""
    return _slug(f"{case.name}{row}_{case.formulation}")


def _write_outputs(cfg: RunConfig, case, mesh, report: RunReport, elapsed: float) -> dict:
    out = Path(cfg.out)
    meta = _meta(case, mesh)
    row = {**meta, **report.summary()}
    if not cfg.deterministic:
        row["wall_time_s"] = round(elapsed, 6)
    stem = _stem(case)
    if "csv" in cfg.formats:
        write_csv(row, out / f"{stem}.csv")
    if "report" in cfg.formats:
        extra = dict(meta)
        if not cfg.deterministic:
            extra["wall_time_s"] = round(elapsed, 6)
        write_report(report, out / f"{stem}.txt", extra)
    if "vtk" in cfg.formats:
        write_vtk(
            mesh,
            {"concentration": report.c, "relative_modulus": report.relative_modulus, "displacement": report.u},
            out / f"{stem}.vtk",
            title=f"{case.label} {case.formulation}",
        )
    return row


def _run_study(cfg: RunConfig, name: str) -> int:
    if cfg.row is not None or cfg.resolution is not None or cfg.formulation is not None:
        raise InputError(f"{name} runs a fixed mesh hierarchy; --row, --resolution and --formulation do not apply")
    t0 = time.perf_counter()
    kwargs = {"tol": cfg.tol} if cfg.tol is not None else {}
    try:
        table = bench.convergence_study(bench.STUDIES[name], **kwargs)
    except (bench.ConvergenceError, StaggeredError) as exc:
        print(f"{name}: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    rows = table.rows()
    write_csv(rows, Path(cfg.out) / f"{name}_rates.csv")
    for r in rows:
        print(
            f"{name} n={r['nodes_per_side']:>3}  L2(u) {r['l2_u']:.3e} ({r['rate_l2_u']:.2f})  "
            f"H1(u) {r['h1_u']:.3e} ({r['rate_h1_u']:.2f})  L2(c) {r['l2_c']:.3e} ({r['rate_l2_c']:.2f})  "
            f"H1(c) {r['h1_c']:.3e} ({r['rate_h1_c']:.2f})"
        )
    if not cfg.deterministic:
        print(f"{name}: {time.perf_counter() - t0:.1f} s")
    return EXIT_OK


def execute(cfg: RunConfig) -> int:
    try:
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {cfg.out}: {exc.strerror or exc}") from None
    if not os.access(cfg.out, os.W_OK):
        raise InputError(f"output directory {cfg.out} is not writable")

    if cfg.case in bench.STUDIES:
        return _run_study(cfg, cfg.case)

    base, cases = _resolve(cfg)
    jobs = 1 if cfg.deterministic else min(cfg.jobs, len(cases))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_case, cases))
    else:
        results = [_run_case(c) for c in cases]

    status = EXIT_OK
    rows = []
    for case, mesh, report, error, elapsed in results:
        if report is None:
            print(f"{case.label} [{case.formulation}]: FAILED: {error}", file=sys.stderr)
            status = EXIT_NOT_CONVERGED
            continue
        rows.append(_write_outputs(cfg, case, mesh, report, elapsed))
        s = report.summary()
        print(
            f"{case.label} [{case.formulation}]: converged={s['converged']} iterations={s['iterations']} "
            f"min_c={s['min_c']:.4e} max_c={s['max_c']:.4e} degradation_index={s['degradation_index']:.2f}"
        )
        if not report.converged:
            status = EXIT_NOT_CONVERGED
    if len(cases) > 1 and rows and "csv" in cfg.formats:
        keys = list(dict.fromkeys(k for r in rows for k in r))
        write_csv([{k: r.get(k, "") for k in keys} for r in rows], Path(cfg.out) / _slug(f"{base}_sweep.csv"))
    return status


# -- argument parsing ----------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="degdiff", description="Coupled deformation-diffusion benchmark runner.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a case, a sweep or a convergence study")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--case", help="catalog case name (see 'degdiff list')")
    src.add_argument("--case-file", help="INI case file")
    r.add_argument("--row", type=int, help="1-based table row; all rows when omitted")
    r.add_argument("--formulation", choices=FORMULATIONS)
    r.add_argument("--tol", type=float, help="staggered tolerance on |dc|_2")
    r.add_argument("--resolution", type=int, help="nodes along x for structured meshes")
    r.add_argument("--out", default="out", help="output directory (default: out)")
    r.add_argument("--format", default="csv,report", help="comma list of vtk,csv,report")
    r.add_argument("--deterministic", action="store_true", help="serial, no timing fields in outputs")
    r.add_argument("--jobs", type=int, default=1, help="parallel workers across sweep rows")

    sub.add_parser("list", help="list cataloged cases")
    return p


def _list_cases() -> int:
    catalog = bench.case_catalog()
    for name in bench.case_names():
        if name in bench.STUDIES:
            print(f"{name:<24} convergence study ({bench.STUDIES[name]})")
            continue
        rows = catalog[name]
        desc = "; ".join(
            f"{c.row}: " + ", ".join(f"{k}={v:g}" for k, v in c.params.items()) for c in rows if c.row is not None
        )
        print(f"{name:<24} {len(rows)} row(s){'  ' + desc if desc else ''}")
    return EXIT_OK


def run(argv=None) -> int:
    """Entry point returning an exit code instead of exiting."""
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
        )
        if args.command == "list":
            return _list_cases()
        cfg = RunConfig(
            case=args.case,
            case_file=args.case_file,
            row=args.row,
            formulation=args.formulation,
            tol=args.tol,
            resolution=args.resolution,
            out=args.out,
            formats=tuple(f.strip() for f in args.format.split(",") if f.strip()),
            deterministic=args.deterministic,
            jobs=args.jobs,
        )
        if cfg.case is not None and cfg.case not in bench.case_names():
            raise InputError(f"unknown case {cfg.case!r}; known cases: {', '.join(bench.case_names())}")
        return execute(cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("usage: degdiff run --case NAME [--row N] [options]  (degdiff run -h for help)", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, MeshError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())
