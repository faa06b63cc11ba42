"""Command line entry point: ``python3 -m degenerate_ek <subcommand> ...``."""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .asymptotics import asymptotic_law
from .eikonal import confirm_obstruction, dump, elliptization, residual_report, solve_eikonal
from .errors import AssumptionError, DegenerateEKError, InvariantError, ParseError
from .labeling import label_from_oracle, label_spec
from .laplace import fit_correction, laplace_leading, laplace_quadrature, parse_problem
from .potential import parse_spec
from .reports import asymptotics_csv, asymptotics_report, labeling_report
from .spectrum import (SCHEME_FACTORIZED, SCHEME_NODAL, SpectralRow, SpectralTable, assemble,
                       default_n_rule, export_triplets, smallest_eigs, sweep)
from .triple_well import fit_beta, triple_well_matrix
from .verify import Thresholds, plot_data, verify_table

EXIT_OK = 0
EXIT_VERDICT_FAILED = 7
DEFAULT_SEED = 20240601
LABEL_RESOLUTION = {1: 4096, 2: 256, 3: 64}


def parse_h(text: str):
    """``a:b:n`` is n geometrically spaced values from a to b; otherwise a
    comma-separated list."""
    try:
        if ":" in text:
            a, b, n = text.split(":")
            n = int(n)
            if n < 1:
                raise ValueError
            values = [float(a)] if n == 1 else list(np.geomspace(float(a), float(b), n))
        else:
            values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ParseError(f"cannot read h values from {text!r}") from None
    if any(not 0 < h < 1 for h in values):
        raise InvariantError("h", "h values must lie in (0, 1)")
    return values


def parse_grid(text: str | None, dim: int):
    if text is None:
        return None
    try:
        counts = [int(v) for v in text.lower().split("x")]
    except ValueError:
        raise ParseError(f"cannot read grid {text!r}; expected N or NxM") from None
    if len(counts) == 1:
        counts = counts * dim
    if len(counts) != dim:
        raise ParseError(f"grid needs {dim} counts")
    return counts


class Run:
    """Output directory, timings and the manifest of one invocation."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.out = Path(args.out)
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise InvariantError("output", f"cannot create output directory {self.out}: {exc}") from None
        self.inputs = {}
        self.outputs = []
        self.timings = {}
        self.started = time.perf_counter()

    def read(self, path):
        p = Path(path)
        try:
            data = p.read_bytes()
        except OSError as exc:
            raise ParseError(f"cannot read {path}: {exc}") from None
        self.inputs[str(p)] = hashlib.sha256(data).hexdigest()
        return data.decode("utf-8")

    def write(self, name, text):
        (self.out / name).write_text(text, encoding="utf-8")
        self.outputs.append(name)

    def timed(self, label):
        run = self

        class _Timer:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                run.timings[label] = round(time.perf_counter() - self.t0, 6)

        return _Timer()

    def manifest(self, status):
        data = {
            "subcommand": self.args.command,
            "argv": self.argv,
            "inputs": self.inputs,
            "outputs": sorted(self.outputs),
            "seed": self.args.seed,
            "jobs": self.args.jobs,
            "tolerance": self.args.tol,
            "versions": {"degenerate_ek": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__},
            "timings": self.timings | {"total": round(time.perf_counter() - self.started, 6)},
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "status": status,
        }
        (self.out / "manifest.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _load_spec(run, args, validate=True):
    return parse_spec(run.read(args.spec), validate=validate and not getattr(args, "no_validate", False))


def _labeling(run, args, spec):
    if getattr(args, "oracle", None):
        return label_from_oracle(spec, run.read(args.oracle))
    if spec.dim > 3:
        raise InvariantError("dimension", "grid labeling needs d <= 3; pass --oracle")
    n = args.label_grid or LABEL_RESOLUTION[spec.dim]
    result, _ = label_spec(spec, n)
    return result


def _n_rule(args, spec):
    grid = parse_grid(args.grid, spec.dim)
    if grid is not None:
        return lambda s, h: grid
    return lambda s, h: default_n_rule(s, h, args.resolution)


def cmd_analyze(run, args):
    spec = _load_spec(run, args)
    with run.timed("labeling"):
        labeling = _labeling(run, args, spec)
    with run.timed("asymptotics"):
        law = asymptotic_law(labeling, spec.critical_points)
    text_l, text_a = labeling_report(labeling), asymptotics_report(law)
    run.write("labeling.txt", text_l)
    run.write("asymptotics.txt", text_a)
    run.write("asymptotics.csv", asymptotics_csv(law))
    print(text_l)
    print(text_a, end="")
    if not law.alpha0 > 0:
        raise AssumptionError("assumption-alpha-violated", f"alpha0 = {law.alpha0} <= 0")
    return EXIT_OK


def cmd_spectrum(run, args):
    spec = _load_spec(run, args)
    hs = parse_h(args.h)
    if len(hs) != 1:
        raise ParseError("spectrum takes a single h; use sweep for several")
    h = hs[0]
    n = parse_grid(args.grid, spec.dim) or default_n_rule(spec, h, args.resolution)
    with run.timed("assemble"):
        op = assemble(spec, h, n, args.scheme, args.order)
    with run.timed("eigensolve"):
        pairs = smallest_eigs(op, args.k, args.tol, args.seed)
    row = SpectralRow(h, pairs.values, pairs.residuals, op.shape, pairs.iterations, pairs.method, pairs.floor)
    csv = SpectralTable([row], args.k, args.scheme).to_csv()
    run.write("spectrum.csv", csv)
    if args.export_matrix:
        run.write("matrix.txt", export_triplets(op))
    print(csv, end="")
    for i, v in enumerate(pairs.values):
        if v <= pairs.floor:
            print(f"lambda{i + 1}: below floating-point floor ({pairs.floor:.3g})")
    return EXIT_OK


def _sweep(run, args, spec):
    hs = parse_h(args.h)
    with run.timed("sweep"):
        table = sweep(spec, hs, args.k, _n_rule(args, spec), args.scheme, args.order, args.tol, args.seed,
                      args.jobs)
    run.write("sweep.csv", table.to_csv())
    return table


def cmd_sweep(run, args):
    spec = _load_spec(run, args)
    table = _sweep(run, args, spec)
    print(table.to_csv(), end="")
    failed = [r for r in table.rows if not r.ok]
    for r in failed:
        print(f"h = {r.h:g}: failed: {r.error}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(run, args):
    spec = _load_spec(run, args)
    with run.timed("labeling"):
        labeling = _labeling(run, args, spec)
    law = asymptotic_law(labeling, spec.critical_points)
    needed = len(law.entries) + 1
    if args.k < needed:
        args.k = needed
    table = _sweep(run, args, spec)
    with run.timed("fit"):
        report = verify_table(table, law, Thresholds())
    for v in report.verdicts:
        arrhenius, prefactor = plot_data(v.fit)
        run.write(f"branch{v.fit.branch + 1}_arrhenius.dat", arrhenius)
        run.write(f"branch{v.fit.branch + 1}_prefactor.dat", prefactor)
    run.write("verdict.txt", report.text())
    run.write("verdict.csv", report.csv())
    print(report.text(), end="")
    return EXIT_OK if report.ok else EXIT_VERDICT_FAILED


def cmd_laplace(run, args):
    problem = parse_problem(run.read(args.problem))
    hs = parse_h(args.h) if args.h else list(problem.h_values)
    if not hs:
        raise ParseError("no h values: give them in the problem file or with --h")
    rows = ["h,leading,quadrature,ratio,abs_error,evaluations"]
    ratios = []
    with run.timed("quadrature"):
        for h in sorted(hs, reverse=True):
            lead = laplace_leading(problem, h)
            quad = laplace_quadrature(problem, h, args.tol)
            ratio = quad.value / lead
            ratios.append((h, ratio))
            rows.append(f"{h!r},{lead!r},{quad.value!r},{ratio!r},{quad.abs_error!r},{quad.evaluations}")
    csv = "\n".join(rows) + "\n"
    run.write("laplace.csv", csv)
    run.write("ratio.dat", "# h  quadrature/leading\n" + "".join(f"{h!r} {r!r}\n" for h, r in ratios))
    print(csv, end="")
    if len(ratios) >= 2 and all(r != 1 for _, r in ratios):
        fit = fit_correction([h for h, _ in ratios], [r for _, r in ratios])
        print(f"correction exponent {fit.exponent:.6g}, K {fit.K:.6g}")
    return EXIT_OK


def cmd_eikonal(run, args):
    spec = _load_spec(run, args)
    s = spec.point(args.saddle)
    with run.timed("eikonal"):
        state = solve_eikonal(s, args.N)
    lines = [f"saddle {s.display_name}, regime {state.problem.regime}, truncation N = {state.problem.N}",
             f"orders solved: {', '.join(str(j) for j in state.orders) or 'none'}"]
    if state.obstruction is not None:
        lines.extend(state.obstruction.lines())
        rank_a, rank_ab = confirm_obstruction(state)
        verdict = "unsolvable" if rank_ab > rank_a else "solvable over the full basis"
        lines.append(f"exact rank check: rank L0 = {rank_a}, rank [L0 | R] = {rank_ab} ({verdict})")
    else:
        lines.extend(residual_report(state).lines())
        lines.extend(elliptization(state).lines())
    text = "\n".join(lines) + "\n"
    run.write("eikonal.txt", text)
    run.write("ell.txt", dump(state.ell, f"ell, c^{state.problem.field.nu} = {state.problem.field.q}"))
    print(text, end="")
    return EXIT_OK


def cmd_triple(run, args):
    spec = _load_spec(run, args)
    labeling = _labeling(run, args, spec)
    result = triple_well_matrix(spec.critical_points, labeling.edges)
    hs = parse_h(args.h) if args.h else list(np.geomspace(1e-2, 1e-4, 9))
    rows = ["h,predicted1,predicted2,predicted3,dense1,dense2,dense3"]
    for h in hs:
        pred = result.predicted_scaled(h)
        dense = result.dense_scaled(h)
        rows.append(",".join(repr(float(v)) for v in [h, *pred, *dense]))
    lines = result.lines()
    if result.split and len(hs) >= 4:
        fit = fit_beta(result, hs)
        lines.append(f"fitted beta {fit.beta:.6g} (predicted {result.beta})")
    text = "\n".join(lines) + "\n"
    run.write("triple.txt", text)
    run.write("triple.csv", "\n".join(rows) + "\n")
    print(text, end="")
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze, "spectrum": cmd_spectrum, "sweep": cmd_sweep, "verify": cmd_verify,
    "laplace": cmd_laplace, "eikonal": cmd_eikonal, "triple": cmd_triple,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--jobs", type=int, default=1, help="worker threads for sweeps")
    common.add_argument("--tol", type=float, default=1e-10)

    numeric = argparse.ArgumentParser(add_help=False)
    numeric.add_argument("--h", help="single value, comma list, or a:b:n geometric range")
    numeric.add_argument("--grid", help="points per axis: N or NxM (overrides the resolution rule)")
    numeric.add_argument("--resolution", type=float, default=20.0,
                         help="factor c of the rule n = c * width / h^(1/nu_under)")
    numeric.add_argument("--k", type=int, default=3, help="number of eigenvalues")
    numeric.add_argument("--scheme", choices=(SCHEME_FACTORIZED, SCHEME_NODAL), default=SCHEME_FACTORIZED)
    numeric.add_argument("--order", type=int, choices=(2, 4), default=2)

    labels = argparse.ArgumentParser(add_help=False)
    labels.add_argument("--oracle", help="adjacency file: 'saddle <id> separates <min> <min>' per line")
    labels.add_argument("--label-grid", type=int, help="merge-tree grid points per axis")
    labels.add_argument("--no-validate", action="store_true",
                        help="skip the exact critical point checks (declared data only)")

    parser = argparse.ArgumentParser(prog="degenerate_ek",
                                     description="Eyring-Kramers asymptotics for degenerate potentials")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("analyze", parents=[common, labels], help="labeling and asymptotic law")
    p.add_argument("spec")
    p = sub.add_parser("spectrum", parents=[common, numeric], help="smallest eigenvalues at one h")
    p.add_argument("spec")
    p.add_argument("--export-matrix", action="store_true", help="also write matrix.txt (i j value)")
    p = sub.add_parser("sweep", parents=[common, numeric], help="eigenvalues over a range of h")
    p.add_argument("spec")
    p = sub.add_parser("verify", parents=[common, numeric, labels], help="sweep, fit and compare")
    p.add_argument("spec")
    p = sub.add_parser("laplace", parents=[common], help="degenerate Laplace method vs quadrature")
    p.add_argument("problem")
    p.add_argument("--h", help="override the h values of the problem file")
    p = sub.add_parser("eikonal", parents=[common], help="eikonal resolution at a saddle")
    p.add_argument("spec")
    p.add_argument("--saddle", required=True, help="critical point index or name")
    p.add_argument("--N", type=int, default=None, help="truncation degree")
    p.add_argument("--no-validate", action="store_true")
    p = sub.add_parser("triple", parents=[common, labels], help="three-well interaction matrix")
    p.add_argument("spec")
    p.add_argument("--h", help="h values for the dense comparison")
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    if args.command in ("sweep", "verify") and not args.h:
        print("error: --h is required", file=sys.stderr)
        return ParseError.exit_code
    if args.command == "spectrum" and not args.h:
        print("error: --h is required", file=sys.stderr)
        return ParseError.exit_code
    if args.jobs < 1:
        print("error: --jobs must be positive", file=sys.stderr)
        return ParseError.exit_code
    run = None
    try:
        run = Run(args, argv)
        code = COMMANDS[args.command](run, args)
        run.manifest("ok" if code == EXIT_OK else "verdict-failed")
        return code
    except DegenerateEKError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if run is not None:
            run.manifest(f"error: {type(exc).__name__}")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
