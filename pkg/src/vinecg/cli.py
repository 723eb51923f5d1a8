"""Command-line interface: ``vinecg {fit,sample,density,schedule,export-dot}``.

Exit codes: 0 success, 2 usage errors, 3 data errors, 4 numeric or
structural failures.  Data goes to standard output or ``--output``; logs and
warnings go to standard error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import builder, io, sampler, scheduler, vcg
from .bicop import CopulaFamily
from .deptools import to_pseudo_obs
from .errors import DataError, DomainError, InfeasibleOrderError, NumericError, StructureError, VineError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    """A flag value that is well-formed for argparse but invalid here."""


def _parse_indices(text: str | None, flag: str) -> tuple[int, ...]:
    if text is None or not text.strip():
        return ()
    try:
        out = tuple(int(t) for t in text.split(","))
    except ValueError:
        raise UsageError(f"{flag}: expected comma-separated integers, got {text!r}") from None
    if len(set(out)) != len(out):
        raise UsageError(f"{flag}: repeated index in {text!r}")
    return out


def _check_range(idx, d: int, flag: str) -> None:
    bad = [i for i in idx if not 0 <= i < d]
    if bad:
        raise UsageError(f"{flag}: index {bad[0]} outside 0..{d - 1}")


def _parse_cond_values(text: str, flag: str = "--cond-values") -> dict[int, float]:
    out = {}
    for part in text.split(","):
        key, sep, val = part.partition("=")
        if not sep:
            raise UsageError(f"{flag}: expected i=u pairs, got {part!r}")
        try:
            k, x = int(key), float(val)
        except ValueError:
            raise UsageError(f"{flag}: cannot parse {part!r}") from None
        if k in out:
            raise UsageError(f"{flag}: variable {k} given twice")
        if not 0.0 < x < 1.0:
            raise UsageError(f"{flag}: value for variable {k} must lie in (0, 1), got {x!r}")
        out[k] = x
    return out


class _Out:
    def __init__(self, args):
        self.path = args.output
        self.quiet = args.quiet

    def data(self, text: str) -> None:
        if self.path is None:
            sys.stdout.write(text)
        else:
            Path(self.path).write_text(text, encoding="utf-8", newline="\n")

    def log(self, msg: str) -> None:
        if not self.quiet:
            print(msg, file=sys.stderr)

    def report(self, msg: str) -> None:
        # summaries go to stdout unless stdout carries the data
        if self.quiet:
            return
        print(msg, file=sys.stdout if self.path is not None else sys.stderr)


def _uniform(values: np.ndarray, out: _Out, what: str) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        row, col = np.argwhere(~np.isfinite(values))[0]
        raise DataError(f"{what}: non-finite value at row {row + 1}, column {col + 1}")
    if np.all((values > 0.0) & (values < 1.0)):
        return values
    out.log(f"warning: {what} has values outside (0, 1); using rank-transformed pseudo-observations")
    return to_pseudo_obs(values)


def _load_model(path: str):
    try:
        text = Path(path).read_bytes()
    except OSError as e:
        raise DataError(f"cannot read model {path}: {e.strerror}") from None
    return io.load(text)


def cmd_fit(args) -> int:
    out = _Out(args)
    cond = _parse_indices(args.cond, "--cond")
    try:
        families = frozenset(CopulaFamily(f.strip()) for f in args.families.split(","))
    except ValueError:
        raise UsageError(f"--families: unknown family in {args.families!r}") from None
    if args.indep_threshold < 0:
        raise UsageError("--indep-threshold must be >= 0")
    values, names = io.read_csv(args.data)
    d = values.shape[1]
    _check_range(cond, d, "--cond")
    if len(cond) >= d:
        raise UsageError(f"--cond: {len(cond)} conditioning variables leave nothing to sample for d = {d}")
    u = _uniform(values, out, args.data)
    cfg = builder.BuildConfig(
        cond_set=cond,
        structure_kind=args.structure,
        family_set=families,
        fit_method=args.method,
        independence_threshold=args.indep_threshold,
    )
    m = builder.build(u, cfg)
    taus = builder.edge_taus(u, m)
    loglik = float(np.sum(sampler.log_density(m, u)))
    prov = f"vinecg fit --structure {args.structure} --method {args.method} on {Path(args.data).name}"
    out.data(io.save(m, provenance=prov))
    for k, level in enumerate(m.levels):
        out.report(f"level {k}:")
        for cv in level:
            cop = cv.copula
            out.report(
                f"  {cv.key:<16} {cop.family.value:<12} rot={cop.rotation:<3} "
                f"theta={cop.theta:.6g}  |tau|={abs(taus[cv.key]):.4f}"
            )
    out.report(f"default order: {scheduler.SamplingOrder(m.default_order, m.d, m.cond_set)}")
    out.report(f"total log-likelihood: {loglik:.6f}")
    return EXIT_OK


def _empirical_quantiles(u: np.ndarray, ref: np.ndarray) -> np.ndarray:
    out = np.empty_like(u)
    for j in range(u.shape[1]):
        out[:, j] = np.quantile(ref[:, j], u[:, j], method="inverted_cdf")
    return out


def cmd_sample(args) -> int:
    out = _Out(args)
    if args.n < 1:
        raise UsageError(f"--n must be >= 1, got {args.n}")
    cond_values = _parse_cond_values(args.cond_values) if args.cond_values else None
    m = _load_model(args.model)
    ref = None
    if args.raw:
        ref, _ = io.read_csv(args.raw)
        if ref.shape[1] != m.d:
            raise DataError(f"--raw: {args.raw} has {ref.shape[1]} columns, model has d = {m.d}")
    if cond_values is not None:
        if tuple(sorted(cond_values)) != m.cond_set:
            raise UsageError(
                f"--cond-values: keys {sorted(cond_values)} do not match the model's conditioning set {list(m.cond_set)}"
            )
        x = sampler.sample_conditional(m, args.n, cond_values, seed=args.seed)
    else:
        x = sampler.sample(m, args.n, seed=args.seed)
    if ref is not None:
        x = _empirical_quantiles(x, ref)
    out.data(io.write_csv(x, [f"u{j}" for j in range(m.d)]))
    return EXIT_OK


def cmd_density(args) -> int:
    out = _Out(args)
    m = _load_model(args.model)
    values, _ = io.read_csv(args.data)
    if values.shape[1] != m.d:
        raise DataError(f"{args.data} has {values.shape[1]} columns, model has d = {m.d}")
    u = _uniform(values, out, args.data)
    ld = sampler.log_density(m, u)
    lines = ["row,log_density"]
    lines += [f"{i + 1},{float(v)!r}" for i, v in enumerate(ld)]
    lines.append(f"total,{float(np.sum(ld))!r}")
    out.data("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_schedule(args) -> int:
    out = _Out(args)
    cond = _parse_indices(args.cond, "--cond")
    m = _load_model(args.model)
    _check_range(cond, m.d, "--cond")
    if len(cond) >= m.d:
        raise UsageError(f"--cond: conditioning on all {m.d} variables leaves nothing to sample")
    so = scheduler.schedule(m, cond, worst=args.worst)
    q = scheduler.query(so, m)
    srcs = scheduler.get_source(so, m)
    text = f"{so}, h-calls: {q}\nsources: " + " ".join(str(v) for v in srcs) + "\n"
    out.data(text)
    return EXIT_OK


def cmd_export_dot(args) -> int:
    out = _Out(args)
    m = _load_model(args.model)
    out.data(vcg.export_dot(m))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--quiet", action="store_true", help="suppress summaries and warnings")
    common.add_argument("--output", help="write the result here instead of standard output")

    p = argparse.ArgumentParser(prog="vinecg", description="Vine copulas on the vine computational graph.")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", parents=[common], help="select and fit a vine on CSV data")
    f.add_argument("--data", required=True, help="CSV file with a header row")
    f.add_argument("--cond", help="conditioning variables, e.g. 2,4")
    f.add_argument("--structure", choices=builder.STRUCTURE_KINDS, default="rvine")
    f.add_argument(
        "--families",
        default=",".join(sorted(c.value for c in CopulaFamily)),
        help="comma-separated pair-copula families",
    )
    f.add_argument("--method", choices=("itau", "mle"), default="itau")
    f.add_argument("--indep-threshold", type=float, default=0.01)
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("sample", parents=[common], help="simulate from a model")
    s.add_argument("--model", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--cond-values", help="conditioning values, e.g. 2=0.3,4=0.7")
    s.add_argument("--raw", help="CSV whose empirical quantiles map samples back to the data scale")
    s.set_defaults(func=cmd_sample)

    de = sub.add_parser("density", parents=[common], help="log copula density per row")
    de.add_argument("--model", required=True)
    de.add_argument("--data", required=True)
    de.set_defaults(func=cmd_density)

    sc = sub.add_parser("schedule", parents=[common], help="best (or worst) sampling order")
    sc.add_argument("--model", required=True)
    sc.add_argument("--cond", help="conditioning variables, e.g. 2,4")
    sc.add_argument("--worst", action="store_true", help="flip the greedy comparison")
    sc.set_defaults(func=cmd_schedule)

    ex = sub.add_parser("export-dot", parents=[common], help="Graphviz DOT of the VCG")
    ex.add_argument("--model", required=True)
    ex.set_defaults(func=cmd_export_dot)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, InfeasibleOrderError, DomainError) as e:
        print(f"vinecg {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"vinecg {args.command}: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"vinecg {args.command}: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, StructureError, VineError, FloatingPointError) as e:
        print(f"vinecg {args.command}: numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
