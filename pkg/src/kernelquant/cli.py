"""kernelquant command-line front end.

Exit codes: 0 all checks pass, 1 a check failed, 2 input could not be
parsed, 3 input parsed but failed validation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import flows, gram, kernelspace, polyfam, spectral
from .numcore import (
    DivergenceError,
    KernelQuantError,
    complex_to_json,
    matrix_from_json,
    matrix_to_json,
    measure_from_json,
)

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_INVALID = 0, 1, 2, 3

# truncations for the checks whose conditioning degrades with order
GRAM_N = 12
CONSISTENCY_N = 8
CLOSED_FORM_N = 25


class ParseFailure(Exception):
    pass


class ValidationFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# input


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseFailure(f"{path}: {exc}") from exc


def _validated(builder, obj, what: str):
    try:
        return builder(obj)
    except (KernelQuantError, ValueError, TypeError, KeyError) as exc:
        raise ValidationFailure(f"invalid {what}: {exc}") from exc


def load_flow(path: str) -> flows.FlowSpec:
    return _validated(flows.FlowSpec.from_json, _load_json(path), "flow")


def load_measure(path: str):
    return _validated(measure_from_json, _load_json(path), "measure")


@dataclass
class SeriesFile:
    coeffs: list
    min_index: int = 0
    gram_overrides: list = field(default_factory=list)  # (m, n, block)


def _series_from_obj(obj) -> SeriesFile:
    coeffs = [matrix_from_json(c) for c in obj["coeffs"]]
    over = [(int(o["m"]), int(o["n"]), matrix_from_json(o["block"])) for o in obj.get("gram_overrides", [])]
    return SeriesFile(coeffs, int(obj.get("min_index", 0)), over)


def load_series(path: str) -> SeriesFile:
    return _validated(_series_from_obj, _load_json(path), "series")


def series_to_json(S: kernelspace.InvariantSeries) -> dict:
    return {"coeffs": [matrix_to_json(c) for c in S.coeffs], "min_index": S.min_index}


def parse_complex(s: str) -> complex:
    try:
        return complex(s.strip().replace("i", "j"))
    except ValueError as exc:
        raise ParseFailure(f"cannot read a complex number from {s!r}") from exc


def parse_pair(s: str) -> tuple:
    parts = s.split(",")
    if len(parts) != 2:
        raise ParseFailure(f"expected 'v,z', got {s!r}")
    return parse_complex(parts[0]), parse_complex(parts[1])


def parse_grid(s: str) -> np.ndarray:
    """start:step:stop, stop included."""
    try:
        start, step, stop = (float(x) for x in s.split(":"))
    except ValueError as exc:
        raise ParseFailure(f"expected start:step:stop, got {s!r}") from exc
    if step <= 0:
        raise ParseFailure("grid step must be positive")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(max(count, 0))


def parse_axes(s: str) -> tuple:
    """x0:x1:nx,y0:y1:ny as two linspaces."""
    try:
        xs, ys = s.split(",")
        out = []
        for part in (xs, ys):
            lo, hi, n = part.split(":")
            out.append(np.linspace(float(lo), float(hi), int(n)))
    except ValueError as exc:
        raise ParseFailure(f"expected x0:x1:nx,y0:y1:ny, got {s!r}") from exc
    return tuple(out)


# ---------------------------------------------------------------------------
# output


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (complex, np.complexfloating)):
        return complex_to_json(x)
    return x


def emit(obj, out: str | None) -> None:
    text = json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("KERNELQUANT_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# checks


@dataclass
class Check:
    name: str
    max_residual: float | None
    tolerance: float
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and self.max_residual is not None and self.max_residual <= self.tolerance

    def to_json(self) -> dict:
        d = {"maxResidual": self.max_residual, "tolerance": self.tolerance, "pass": self.passed}
        if self.error is not None:
            d["error"] = self.error
        return d


def _run(name: str, tol: float, fn) -> Check:
    try:
        return Check(name, float(fn()), tol)
    except (KernelQuantError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return Check(name, None, tol, f"{type(exc).__name__}: {exc}")


def _closed_form_check(f, N, rng):
    n_max = min(N, CLOSED_FORM_N)
    lams = rng.uniform(-3.0, 3.0, 20)
    const = polyfam.family_constant(f)
    K = polyfam.recurrence_values(f, n_max, lams)
    worst = 0.0
    for n in range(n_max + 1):
        cf = np.array([polyfam.closed_form(f, n, lam) for lam in lams])
        ref = const * K[n]
        worst = max(worst, float(np.max(np.abs(cf - ref)) / np.max(np.abs(ref))))
    return worst


def _beta_check(f):
    M = 6 if f.domain.kind is flows.Domain.PLANE else 4
    B = gram.beta_probe(f, M, 2 * M)
    worst = 0.0
    for m in range(M + 1):
        for n in range(M + 1):
            for l in range(2 * M + 1):
                e = gram.beta_coeff(f, m, n, l)
                worst = max(worst, abs(e - B[m, n, l]) / max(1.0, abs(e)))
    return worst


def build_table(S: kernelspace.InvariantSeries, N: int, overrides=()) -> gram.GramTable:
    g = gram.gram_from_series(S.coeffs, S.flow, N, S.min_index if S.flow.b == 0 else 0)
    for m, n, block in overrides:
        g = g.with_block(m, n, block)
    return g


def _difference_check(S, N, overrides):
    Ng = max(1, min(N, GRAM_N))
    g = build_table(S, Ng, overrides)
    return _relative_difference(g, S)


def _relative_difference(g, S) -> float:
    """Max difference-equation residual over max ||C_l|| for the l <= 2N that enter."""
    res = gram.verify_difference_eq(g)
    if not res.size:
        return 0.0
    cnorm = max(float(np.linalg.norm(c)) for c in S.coeffs[: 2 * g.N + 1])
    return float(res.max()) / max(cnorm, 1e-300)


def _psd_check(S, pts):
    B = kernelspace.block_gram(S, list(pts))
    w = np.linalg.eigvalsh(0.5 * (B + B.conj().T))
    return max(0.0, -w[0]) / max(1.0, w[-1])


def _herm_check(S, pairs):
    worst = 0.0
    for v, z in pairs:
        K = kernelspace.kernel_eval(S, v, z)
        D = K - kernelspace.kernel_eval(S, z, v).conj().T
        worst = max(worst, float(np.max(np.abs(D))) / max(1.0, float(np.max(np.abs(K)))))
    return worst


def _invariance_check(S, pairs, ts):
    worst = 0.0
    for (v, z), t in zip(pairs, ts):
        K = kernelspace.kernel_eval(S, v, z)
        r = kernelspace.flow_invariance_residual(S, float(t), [(v, z)])
        worst = max(worst, r / max(1.0, float(np.max(np.abs(K)))))
    return worst


def _ode_check(S):
    # degree-filtered parts only: both are exact at retained degrees, while a
    # pointwise comparison would mostly measure the truncation of Psi
    Psi = kernelspace.hamiltonian_from_kernel(S)
    res = kernelspace.hamiltonian_residual(S, Psi)
    lhs = kernelspace.ode_lhs(S)
    scale = max(1.0, float(np.max(np.abs(lhs)))) if lhs.size else 1.0
    comp = kernelspace.compatibility_defect(S, Psi)
    return max(res.max_degree_residual, float(comp.max()) if comp.size else 0.0) / scale


def _consistency_check(S, mu, N, overrides):
    Nc = max(0, min(N, CONSISTENCY_N))
    if S.N < 2 * Nc:
        raise ValueError(f"series needs {2 * Nc + 1} coefficients for the Gram consistency check")
    g = build_table(S, Nc, overrides)
    G = spectral.L2Model(mu, S.flow, Nc).gram()
    return float(np.max(np.abs(G - g.blocks)) / max(1.0, np.max(np.abs(G))))


def _bochner_check(S, mu, N, pairs):
    worst = 0.0
    for v, z in pairs:
        vals = np.array([polyfam.kernel_lambda_product(S.flow, v, z, lam, N) for lam in mu.lambdas])
        value = np.tensordot(vals, mu.weights, axes=1)
        sv = kernelspace.kernel_eval(S, v, z)
        worst = max(worst, float(np.linalg.norm(value - sv)) / max(1.0, float(np.linalg.norm(value))))
    return worst


DEFAULT_TOLS = {
    "recurrence_closed_form": 1e-9,
    "beta_oracle": 1e-8,
    "difference_equation": 1e-9,
    "hermitian_symmetry": 1e-12,
    "psd": 1e-9,
    "invariance": 1e-9,
    "ode": 1e-8,
    "gram_consistency": 1e-8,
    "bochner": 1e-8,
}


def verify_all(f, mu, series: SeriesFile | None, N: int, seed: int, tol: float | None = None) -> tuple[dict, bool]:
    """Run every applicable check; returns (report, all_passed)."""
    tols = {k: (tol if tol is not None else v) for k, v in DEFAULT_TOLS.items()}
    overrides = series.gram_overrides if series else []
    if series is not None:
        S = kernelspace.InvariantSeries(f, np.array(series.coeffs), series.min_index)
    elif mu is not None:
        if f.b == 0:
            raise ValidationFailure("b = 0 has no measure construction; supply --series")
        S = spectral.series_from_measure(mu, f, max(N, 2 * min(N, CONSISTENCY_N)))
    else:
        raise ValidationFailure("verify-all needs --measure or --series")
    if mu is not None and mu.dim != S.dim:
        raise ValidationFailure("measure and series have different dimensions")

    rng_root = np.random.SeedSequence(seed)
    seeds = [int(s.generate_state(1)[0]) for s in rng_root.spawn(4)]
    pairs = kernelspace.sample_pairs(f, 32, seeds[0])
    pts8 = kernelspace.sample_points(f, 8, seeds[1])
    ts = np.random.default_rng(seeds[2]).uniform(-1.0, 1.0, len(pairs))

    jobs = []  # (name, fn)
    skipped = []
    have_family = True
    if f.b != 0:
        try:
            polyfam.family_name(f)
        except (polyfam.ClosedFormUnavailable, polyfam.CaseError):
            have_family = False
    if f.b != 0 and have_family:
        jobs.append(("recurrence_closed_form", lambda: _closed_form_check(f, N, np.random.default_rng(seeds[3]))))
    else:
        skipped.append("recurrence_closed_form")
    if f.b != 0 and f.domain.kind in (flows.Domain.PLANE, flows.Domain.DISC):
        jobs.append(("beta_oracle", lambda: _beta_check(f)))
    else:
        skipped.append("beta_oracle")
    jobs.append(("difference_equation", lambda: _difference_check(S, N, overrides)))
    jobs.append(("hermitian_symmetry", lambda: _herm_check(S, pairs)))
    jobs.append(("psd", lambda: _psd_check(S, pts8)))
    if f.quantizable:
        jobs.append(("invariance", lambda: _invariance_check(S, pairs, ts)))
        jobs.append(("ode", lambda: _ode_check(S)))
    else:
        skipped += ["invariance", "ode"]
    if mu is not None and f.b != 0:
        jobs.append(("gram_consistency", lambda: _consistency_check(S, mu, N, overrides)))
        jobs.append(("bochner", lambda: _bochner_check(S, mu, N, pairs[:20])))
    else:
        skipped += ["gram_consistency", "bochner"]

    with ThreadPoolExecutor(max_workers=_threads()) as ex:
        futures = [(name, ex.submit(_run, name, tols[name], fn)) for name, fn in jobs]
        checks = [fut.result() for _, fut in futures]

    report = {
        "perCheck": {c.name: c.to_json() for c in checks},
        "metadata": {"flow": f.to_json(), "truncation": N, "seed": seed, "skipped": sorted(skipped)},
    }
    return report, all(c.passed for c in checks)


# ---------------------------------------------------------------------------
# commands


def cmd_classify(args) -> int:
    emit(flows.classify(load_flow(args.flow)).to_json(), args.out)
    return EXIT_OK


def cmd_polys(args) -> int:
    f = load_flow(args.flow)
    lams = parse_grid(args.lambda_grid) if args.lambda_grid else np.zeros(0)
    try:
        fam = polyfam.build_recurrence(f, args.n)
    except KernelQuantError as exc:
        raise ValidationFailure(str(exc)) from exc
    K = [[complex(c) for c in row[: n + 1]] for n, row in enumerate(fam.coeffs)]
    vals = polyfam.recurrence_values(f, args.n, lams) if lams.size else np.zeros((args.n + 1, 0))
    out = {"K": K, "lambdas": lams.tolist(), "values": [[complex(v) for v in row] for row in vals]}
    try:
        out["family"] = polyfam.family_name(f)
        out["familyConstant"] = polyfam.family_constant(f)
    except (polyfam.ClosedFormUnavailable, polyfam.CaseError):
        out["family"] = None
    emit(out, args.out)
    return EXIT_OK


def _series_obj(f, path) -> tuple:
    sf = load_series(path)
    S = _validated(lambda c: kernelspace.InvariantSeries(f, np.array(c), sf.min_index), sf.coeffs, "series")
    return S, sf


def cmd_gram(args) -> int:
    f = load_flow(args.flow)
    S, sf = _series_obj(f, args.series)
    N = args.n if args.n is not None else S.N
    g = _validated(lambda _: build_table(S, N, sf.gram_overrides), None, "series")
    if not args.verify:
        emit({"blocks": [[matrix_to_json(g.blocks[i, j]) for j in range(N + 1)] for i in range(N + 1)], "minIndex": g.min_index}, args.out)
        return EXIT_OK
    tol = args.tol if args.tol is not None else DEFAULT_TOLS["difference_equation"]
    res = gram.verify_difference_eq(g)
    rel = _relative_difference(g, S)
    psd = g.psd_min_eig()
    ok = rel <= tol and psd >= -1e-10 and g.symmetry_defect() == 0.0
    emit({"maxResidual": float(res.max()) if res.size else 0.0, "relResidual": rel, "psdMinEig": psd,
          "symmetryDefect": g.symmetry_defect(), "tolerance": tol, "pass": ok}, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_kernel(args) -> int:
    f = load_flow(args.flow)
    S, sf = _series_obj(f, args.series)
    if args.verify_all:
        report, ok = verify_all(f, None, sf, S.N, args.seed, args.tol)
        keys = {"hermitian_symmetry": "hermSym", "psd": "psd", "invariance": "invariance", "ode": "ode"}
        out = {v: report["perCheck"][k] for k, v in keys.items() if k in report["perCheck"]}
        emit(out, args.out)
        return EXIT_OK if all(c["pass"] for c in out.values()) else EXIT_FAIL
    if not args.eval:
        raise ParseFailure("kernel needs --eval v,z or --verify-all")
    v, z = parse_pair(args.eval)
    try:
        K = kernelspace.kernel_eval(S, v, z)
    except DivergenceError as exc:
        raise ValidationFailure(str(exc)) from exc
    emit({"K": matrix_to_json(K), "I": kernelspace.series_variable(f, v, z)}, args.out)
    return EXIT_OK


def cmd_spectral(args) -> int:
    mu = load_measure(args.measure)
    out: dict = {"moments": [matrix_to_json(spectral.moments(mu, k)) for k in range(args.moments + 1)]}
    ok = True
    f = load_flow(args.flow) if args.flow else None
    if f is not None:
        try:
            out["seriesHermitianDefect"] = float(spectral.series_hermitian_defects(mu, f, args.n).max())
        except KernelQuantError as exc:
            raise ValidationFailure(str(exc)) from exc
    if args.series_out:
        if f is None:
            raise ParseFailure("--series-out needs --flow")
        with open(args.series_out, "w") as fh:
            json.dump(_jsonable(series_to_json(spectral.series_from_measure(mu, f, args.n))), fh, sort_keys=True)
            fh.write("\n")
    if args.reconstruct:
        if f is None:
            raise ParseFailure("--reconstruct needs --flow")
        v, z = parse_pair(args.reconstruct)
        r = spectral.bochner_reconstruct(mu, f, v, z, args.n)
        tol = args.tol if args.tol is not None else DEFAULT_TOLS["bochner"]
        ok = ok and r.residual <= tol
        out["reconstruction"] = {"value": matrix_to_json(r.value), "seriesValue": matrix_to_json(r.series_value),
                                 "residual": r.residual, "tolerance": tol}
    if args.jacobi:
        try:
            J = spectral.jacobi_matrix(mu, spectral.support_size(mu))
        except (KernelQuantError, ValueError) as exc:
            raise ValidationFailure(str(exc)) from exc
        out["jacobi"] = {"diag": J.diag.tolist(), "offdiag": J.offdiag.tolist(), "eigenvalues": J.eigenvalues().tolist()}
    emit(out, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify_all(args) -> int:
    f = load_flow(args.flow)
    mu = load_measure(args.measure) if args.measure else None
    sf = load_series(args.series) if args.series else None
    try:
        report, ok = verify_all(f, mu, sf, args.n, args.seed, args.tol)
    except (KernelQuantError, ValueError) as exc:
        raise ValidationFailure(str(exc)) from exc
    emit(report, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_decompose(args) -> int:
    f = load_flow(args.flow)
    mu = load_measure(args.measure)
    xs, ys = parse_axes(args.grid)
    v0 = None if args.v == "diag" else parse_complex(args.v)
    N = args.n
    S = None
    if f.b != 0:
        S = spectral.series_from_measure(mu, f, N)
    d = mu.dim
    buf = io.StringIO()
    if xs.size and ys.size:
        w = csv.writer(buf, lineterminator="\n")
        header = ["x", "y"]
        for k in range(len(mu)):
            header += [f"lam{k}_re", f"lam{k}_im", f"lam{k}_abs"]
        for i in range(d):
            for j in range(d):
                header += [f"sum_re_{i}{j}", f"sum_im_{i}{j}", f"sum_abs_{i}{j}"]
                if S is not None:
                    header += [f"eval_re_{i}{j}", f"eval_im_{i}{j}"]
        w.writerow(header)
        for x in xs:
            for y in ys:
                z = complex(x, y)
                v = z if v0 is None else v0
                if not (f.domain.contains(z) and f.domain.contains(v)):
                    print(f"warning: skipping {z}, outside the {f.domain.kind.value}", file=sys.stderr)
                    continue
                try:
                    lk = [polyfam.kernel_lambda_product(f, v, z, lam, N) for lam in mu.lambdas]
                    total = np.tensordot(np.array(lk), mu.weights, axes=1)
                    ev = kernelspace.kernel_eval(S, v, z) if S is not None else None
                except (DivergenceError, KernelQuantError) as exc:
                    print(f"warning: skipping {z}: {exc}", file=sys.stderr)
                    continue
                row = [repr(float(x)), repr(float(y))]
                for val in lk:
                    row += [repr(val.real), repr(val.imag), repr(abs(val))]
                for i in range(d):
                    for j in range(d):
                        s = complex(total[i, j])
                        row += [repr(s.real), repr(s.imag), repr(abs(s))]
                        if ev is not None:
                            row += [repr(float(ev[i, j].real)), repr(float(ev[i, j].imag))]
                w.writerow(row)
    text = buf.getvalue()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kernelquant", description="Positive-kernel quantization of holomorphic flows.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, flow=True, flow_required=True):
        if flow:
            sp.add_argument("--flow", required=flow_required, help="flow spec JSON")
        sp.add_argument("--out", help="write output here instead of stdout")
        sp.add_argument("--seed", type=int, default=42)
        sp.add_argument("--tol", type=float, default=None, help="override check tolerances")

    sp = sub.add_parser("classify", help="conjugacy class and quantizability of a flow")
    common(sp)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("polys", help="quantizing polynomial table")
    common(sp)
    sp.add_argument("--n", type=int, default=10)
    sp.add_argument("--lambda-grid", dest="lambda_grid", help="start:step:stop")
    sp.set_defaults(func=cmd_polys)

    sp = sub.add_parser("gram", help="Gram table from a series, optionally verified")
    common(sp)
    sp.add_argument("--series", required=True)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--verify", action="store_true")
    sp.set_defaults(func=cmd_gram)

    sp = sub.add_parser("kernel", help="evaluate or verify a kernel series")
    common(sp)
    sp.add_argument("--series", required=True)
    sp.add_argument("--eval", help="v,z")
    sp.add_argument("--verify-all", dest="verify_all", action="store_true")
    sp.set_defaults(func=cmd_kernel)

    sp = sub.add_parser("spectral", help="moments, Jacobi matrix and reconstruction")
    common(sp, flow_required=False)
    sp.add_argument("--measure", required=True)
    sp.add_argument("--n", type=int, default=40)
    sp.add_argument("--moments", type=int, default=6, help="highest moment order reported")
    sp.add_argument("--reconstruct", help="v,z")
    sp.add_argument("--jacobi", action="store_true")
    sp.add_argument("--series-out", dest="series_out", help="write the series built from the measure here")
    sp.set_defaults(func=cmd_spectral)

    sp = sub.add_parser("verify-all", help="run every consistency check")
    common(sp)
    sp.add_argument("--measure")
    sp.add_argument("--series")
    sp.add_argument("--n", type=int, default=40)
    sp.set_defaults(func=cmd_verify_all)

    sp = sub.add_parser("decompose", help="CSV of lambda-kernels and their weighted sum on a grid")
    common(sp)
    sp.add_argument("--measure", required=True)
    sp.add_argument("--grid", required=True, help="x0:x1:nx,y0:y1:ny")
    sp.add_argument("--v", default="0", help="fixed first point, or 'diag' for K(conj z, z)")
    sp.add_argument("--n", type=int, default=40)
    sp.set_defaults(func=cmd_decompose)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_PARSE
    try:
        return args.func(args)
    except ParseFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except KernelQuantError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
