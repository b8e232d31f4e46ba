"""Command-line front end.

Exit codes: 0 success, 2 bad input, 3 undetermined classification, 4 computation
error or no deficiency subspace.  Machine output goes to stdout (or ``--out``),
diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import birkhoff
from .classifier import Verdict, classify
from .deficiency import (
    DEFAULT_R_MAX,
    deficiency_residual,
    deficiency_vectors,
    extension_basis,
)
from .errors import SqueezeError, ValidationError
from .fock import OperatorSpec
from .iohelpers import (
    DescriptorError,
    atomic_write,
    csv_text,
    dumps,
    parse_field,
    parse_int_list,
    parse_unitary,
)
from .matrixlab import (
    CONV_TOL,
    DROP_MARGIN,
    build_truncated,
    ground_energy_sweep,
    variational_witness,
    witness_vector,
)

EXIT_OK, EXIT_PARSE, EXIT_UNDETERMINED, EXIT_MODULE = 0, 2, 3, 4


class _Exit(Exception):
    def __init__(self, code: int, message: str = ""):
        super().__init__(message)
        self.code = code


def _common(p: argparse.ArgumentParser):
    p.add_argument("--k", type=int, required=True, help="creation power k")
    p.add_argument("--l", type=int, default=0, help="annihilation power l < k (default 0)")
    p.add_argument("--xi-mod", type=float, default=1.0, help="|xi| (default 1)")
    p.add_argument("--xi-phase", type=float, default=0.0, help="arg xi in radians (default 0)")
    p.add_argument("--field", default="zero", help="zero | poly:a0,a1,... | kerr:K,h | table:@path")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=None, help="output file (directory for 'deficiency')")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="squeezeop", description="Self-adjointness toolkit for (k,l)-squeezing operators.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="essential self-adjointness / deficiency verdict")
    _common(p)

    p = sub.add_parser("deficiency", help="deficiency vectors and self-adjoint extension data")
    _common(p)
    p.add_argument("--r-max", type=float, default=DEFAULT_R_MAX, help="recurrence length (default 1e5)")
    p.add_argument("--unitary", default=None, help="I, -I, or a CSV/JSON file with a Delta x Delta unitary")
    p.add_argument("--export-n-max", type=int, default=10_000, help="Fock cutoff for the extension-basis CSV")

    p = sub.add_parser("asymptotics", help="formal asymptotic solutions per branch")
    _common(p)
    p.add_argument("--order", type=int, default=8, help="number S of correction terms C_1..C_S (default 8)")

    p = sub.add_parser("spectrum", help="ground-energy sweep of hard truncations")
    _common(p)
    p.add_argument("--dims", default="100,200,400,800", help="comma-separated truncation sizes")
    p.add_argument("--margin", type=float, default=DROP_MARGIN, help="relative drop per doubling for divergence")
    p.add_argument("--tol", type=float, default=CONV_TOL, help="relative tolerance for convergence")

    p = sub.add_parser("witness", help="variational witness of unboundedness below")
    _common(p)
    p.add_argument("--R", type=int, default=1, help="first branch index of the trial vector")
    p.add_argument("--ns", "--dims", dest="ns", default="4,16,64,256", help="trial vector lengths")
    p.add_argument("--n0", type=int, default=None, help="branch offset (default l)")
    return ap


def _spec(args) -> OperatorSpec:
    try:
        fld = parse_field(args.field)
        return OperatorSpec(args.k, args.l, args.xi_mod, args.xi_phase, fld)
    except (DescriptorError, ValidationError) as exc:
        raise _Exit(EXIT_PARSE, str(exc)) from exc


def _emit(args, text: str):
    if args.out:
        atomic_write(args.out, text)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_classify(args) -> int:
    spec = _spec(args)
    c = classify(spec)
    d = c.to_dict()
    d["delta"] = spec.delta
    if args.format == "csv":
        flat = {k: ("" if v is None else v) for k, v in d.items() if k != "expansion"}
        _emit(args, csv_text(list(flat), [list(flat.values())]))
    else:
        _emit(args, dumps(d))
    return EXIT_UNDETERMINED if c.verdict is Verdict.UNDETERMINED else EXIT_OK


def _need_deficient(spec: OperatorSpec):
    c = classify(spec)
    if c.verdict is Verdict.ESA:
        raise _Exit(EXIT_MODULE, "no deficiency subspace: the operator is essentially self-adjoint")
    if c.verdict is Verdict.UNDETERMINED:
        raise _Exit(EXIT_UNDETERMINED, "classification undetermined; refusing to build deficiency data")
    return c


def cmd_deficiency(args) -> int:
    spec = _spec(args)
    _need_deficient(spec)
    r_max = int(args.r_max)
    if r_max < 10:
        raise _Exit(EXIT_PARSE, "--r-max must be >= 10")
    U = None
    if args.unitary is not None:
        try:
            U = parse_unitary(args.unitary, spec.delta)
        except DescriptorError as exc:
            raise _Exit(EXIT_PARSE, str(exc)) from exc
    norm_spec = spec.normalized()
    plus, minus, sols = deficiency_vectors(norm_spec, r_max)
    outdir = Path(args.out or "deficiency_out")
    files = []
    for s in sols:
        rows = ((r, float(z.real), float(z.imag), abs(z)) for r, z in enumerate(s.d))
        files.append(str(atomic_write(outdir / f"branch_n0_{s.n0}.csv", csv_text(["r", "re_d", "im_d", "abs_d"], rows))))
    meta = []
    probe = spec.l + (r_max - 1) * spec.delta
    for v, s in zip(plus + minus, sols + sols):
        m = v.metadata()
        m["residual"] = deficiency_residual(norm_spec, v, probe)
        m["recurrence_residual"] = s.max_residual
        m["fit_spread"] = s.fit_spread
        meta.append(m)
    summary = {
        "k": spec.k, "l": spec.l, "deficiency_index": spec.delta, "r_max": r_max,
        "normalization": "d_0 = 1 on every branch; operator divided by |xi|",
        "vectors": meta,
    }
    files.append(str(atomic_write(outdir / "vectors.json", dumps(summary))))
    if U is not None:
        try:
            basis = extension_basis(norm_spec, U, r_max, vectors=(plus, minus))
        except ValidationError as exc:
            raise _Exit(EXIT_PARSE, str(exc)) from exc
        G = basis.normalized_gram()
        info = {
            "unitary": basis.unitary,
            "gram_normalized": G,
            "gram_det": complex(np.linalg.det(G)),
            "plus_norms": [p.norm for p in plus],
            "vector_norms": [v.norm() for v in basis.vectors],
        }
        files.append(str(atomic_write(outdir / "extension_basis.json", dumps(info))))
        nmax = min(args.export_n_max, spec.l + r_max * spec.delta)
        dense = [v.to_dense(nmax + 1) for v in basis.vectors]
        header = ["n"] + [f"{p}_{j}" for j in range(len(dense)) for p in ("re", "im")]
        rows = ([n] + [float(x) for v in dense for x in (v[n].real, v[n].imag)] for n in range(nmax + 1))
        files.append(str(atomic_write(outdir / "extension_basis.csv", csv_text(header, rows))))
    sys.stdout.write(dumps({"files": files, "vectors": meta}) + "\n")
    return EXIT_OK


def cmd_asymptotics(args) -> int:
    spec = _spec(args)
    if args.order < 0:
        raise _Exit(EXIT_PARSE, "--order must be >= 0")
    out = []
    for n0 in range(spec.l, spec.k):
        exp, (sp, sm) = birkhoff.asymptotics(spec, n0, args.order)
        out.append({
            "n0": n0,
            "a": exp.a_series.window(0, exp.a_series.top),
            "b": exp.b_series.window(0, exp.b_series.top),
            "plus": sp.to_dict(),
            "minus": sm.to_dict(),
        })
    if args.format == "csv":
        rows = []
        for b in out:
            for sol in (b["plus"], b["minus"]):
                for s, c in enumerate(sol["C"]):
                    rows.append([b["n0"], sol["sign"], s, c["re"], c["im"]])
        _emit(args, csv_text(["n0", "sign", "s", "re_C", "im_C"], rows))
    else:
        _emit(args, dumps({"k": spec.k, "l": spec.l, "order": args.order, "branches": out}))
    return EXIT_OK


def cmd_spectrum(args) -> int:
    spec = _spec(args)
    try:
        dims = parse_int_list(args.dims)
    except DescriptorError as exc:
        raise _Exit(EXIT_PARSE, str(exc)) from exc
    if not dims or any(N < 1 for N in dims):
        raise _Exit(EXIT_PARSE, "--dims must be positive integers")
    rep = ground_energy_sweep(spec, sorted(set(dims)), margin=args.margin, tol=args.tol)
    if args.format == "csv":
        _emit(args, csv_text(["N", "lambda_min", "lambda_max", "N_mod_Delta"], rep.rows(spec.delta)))
    else:
        _emit(args, dumps(rep.to_dict()))
    return EXIT_OK


def cmd_witness(args) -> int:
    spec = _spec(args)
    try:
        ns = parse_int_list(args.ns)
    except DescriptorError as exc:
        raise _Exit(EXIT_PARSE, str(exc)) from exc
    n0 = spec.l if args.n0 is None else args.n0
    if not (spec.l <= n0 < spec.k) or args.R < 0 or any(n < 1 for n in ns):
        raise _Exit(EXIT_PARSE, "need l <= n0 < k, R >= 0 and positive lengths")
    rows = []
    for n in ns:
        w = variational_witness(spec, args.R, n, n0)
        psi = witness_vector(spec, args.R, n, n0)
        op = build_truncated(spec, psi.size)
        q = float(np.vdot(psi, op.matvec(psi)).real)
        rows.append({"n": n, "value": w, "matrix_value": q})
    vals = [r["value"] for r in rows]
    dec = all(b < a for a, b in zip(vals, vals[1:]))
    if args.format == "csv":
        _emit(args, csv_text(["n", "value", "matrix_value"], [[r["n"], r["value"], r["matrix_value"]] for r in rows]))
    else:
        _emit(args, dumps({"k": spec.k, "l": spec.l, "R": args.R, "n0": n0, "rows": rows, "strictly_decreasing": dec}))
    return EXIT_OK


COMMANDS = {
    "classify": cmd_classify,
    "deficiency": cmd_deficiency,
    "asymptotics": cmd_asymptotics,
    "spectrum": cmd_spectrum,
    "witness": cmd_witness,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except _Exit as exc:
        if str(exc):
            print(f"squeezeop: {exc}", file=sys.stderr)
        return exc.code
    except (SqueezeError, ValueError, ArithmeticError) as exc:
        print(f"squeezeop: {type(exc).__name__}: {exc}", file=sys.stderr)
        diag = getattr(exc, "diagnostics", None)
        if diag:
            print(dumps(diag), file=sys.stderr)
        return EXIT_MODULE


if __name__ == "__main__":
    sys.exit(main())
