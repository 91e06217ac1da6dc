"""Command-line interface.

Subcommands: ``eval``, ``estimate``, ``distance``, ``iterate``, ``dirichlet``
(``table``/``solve``) and ``sample`` (``maxstable``/``gpd``). Scalars print as
JSON, tables and samples as CSV; floats carry 17 significant digits.

Exit codes: 0 success, 2 usage or precondition failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import secrets
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from dnorm import __version__
from dnorm.core import DNormError, NumericalError, as_point, l1_norm, logistic_norm, sup_norm
from dnorm.dirichlet import (
    UniformSpacings,
    bivariate_dirichlet_norm,
    generator_constant,
    solve_alpha_for_constant,
)
from dnorm.generators import (
    DEFAULT_SEED,
    Constant,
    Dirichlet,
    FrechetLogistic,
    GeneratorSpec,
    ScaledPermutation,
    make_rng,
)
from dnorm.markov import iterate_generator, load_matrix
from dnorm.montecarlo import EstimationConfig, estimate_dnorm
from dnorm.simulate import MaxStableConfig, sample_gpd_batch, sample_max_stable_batch, samples_to_csv
from dnorm.transport import dnorm_distance

GENERATORS = ("constant", "scaledperm", "frechet", "dirichlet", "spacings")
_VECTOR_FLAGS = ("--x", "--alphas")


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def dumps(obj) -> str:
    """JSON with 17-significant-digit floats."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(bool(obj) if obj is not None else None)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            raise NumericalError(f"non-finite value {obj} in output")
        return fmt(obj)
    return json.dumps(obj)


def parse_vector(text: str) -> np.ndarray:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise DNormError(f"cannot parse vector {text!r}; expected comma-separated numbers") from None
    return as_point(vals)


def build_spec(name: str, d: int | None, lam: float | None, alpha: float | None) -> GeneratorSpec:
    if d is None:
        raise DNormError("the generator dimension is required (--d or --x)")
    if name == "constant":
        return Constant(d)
    if name == "scaledperm":
        return ScaledPermutation(d)
    if name == "frechet":
        if lam is None:
            raise DNormError("frechet generator needs --lambda")
        return FrechetLogistic(d, lam)
    if name == "dirichlet":
        if alpha is None:
            raise DNormError("dirichlet generator needs --alpha")
        return Dirichlet(d, alpha)
    if name == "spacings":
        return UniformSpacings(d)
    raise DNormError(f"unknown generator {name!r}")


def _seed(args) -> int:
    if getattr(args, "entropy", False):
        return secrets.randbits(64)
    return args.seed


def _infer_d(args, x=None) -> int | None:
    d = getattr(args, "d", None)
    if x is not None:
        if d is not None and d != x.size:
            raise DNormError(f"--d {d} disagrees with --x of length {x.size}")
        return x.size
    return d


def _write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _manifest(command: str, params: dict, seed: int, started: float) -> dict:
    return {
        "command": command,
        "parameters": params,
        "seed": seed,
        "version": __version__,
        "wall_time": time.time() - started,
    }


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def cmd_eval(args, out) -> None:
    x = parse_vector(args.x)
    if args.norm == "sup":
        value = sup_norm(x)
    elif args.norm == "l1":
        value = l1_norm(x)
    elif args.norm == "logistic":
        if args.lam is None:
            raise DNormError("--norm logistic needs --lambda (use 'inf' for the sup-norm)")
        value = logistic_norm(x, args.lam)
    else:
        if args.alpha is None:
            raise DNormError("--norm dirichlet2 needs --alpha")
        if x.size != 2:
            raise DNormError(f"dirichlet2 is bivariate; --x has {x.size} coordinates")
        value = bivariate_dirichlet_norm(x[0], x[1], args.alpha)
    out.write(fmt(value) + "\n")


def cmd_estimate(args, out) -> None:
    x = parse_vector(args.x)
    spec = build_spec(args.gen, _infer_d(args, x), args.lam, args.alpha)
    seed = _seed(args)
    est = estimate_dnorm(spec, x, EstimationConfig(args.n, seed, args.streams))
    out.write(dumps(est.to_dict()) + "\n")


def cmd_distance(args, out) -> None:
    spec_a = build_spec(args.gen_a, args.d, args.lambda_a, args.alpha_a)
    spec_b = build_spec(args.gen_b, args.d, args.lambda_b, args.alpha_b)
    res = dnorm_distance(spec_a, spec_b, args.n, seed=_seed(args), solver=args.solver, epsilon=args.epsilon)
    out.write(dumps({"cost": res.cost, "method": res.method, "n": res.n}) + "\n")


def cmd_iterate(args, out) -> None:
    m = load_matrix(args.matrix)
    x = parse_vector(args.x)
    spec = build_spec(args.gen, _infer_d(args, x), args.lam, args.alpha)
    ests = iterate_generator(m, spec, args.n_max, x, EstimationConfig(args.n, _seed(args), args.streams))
    lines = ["n,estimate,std_error"]
    lines += [f"{k},{fmt(e.value)},{fmt(e.std_error)}" for k, e in enumerate(ests)]
    out.write("\n".join(lines) + "\n")


def cmd_dirichlet(args, out) -> None:
    seed = _seed(args)
    if args.action == "table":
        alphas = parse_vector(args.alphas)
        lines = ["alpha,d,m_value,std_error"]
        for a in alphas:
            r = generator_constant(float(a), args.d, EstimationConfig(args.n, seed, args.streams))
            value, se = (r, 0.0) if isinstance(r, float) else (r.value, r.std_error)
            lines.append(f"{fmt(a)},{args.d},{fmt(value)},{fmt(se)}")
        out.write("\n".join(lines) + "\n")
        return
    if args.target is None:
        raise DNormError("dirichlet solve needs --target")
    sol = solve_alpha_for_constant(
        args.target, args.d, args.tol, EstimationConfig(args.n, seed, args.streams)
    )
    if args.json:
        out.write(
            dumps(
                {
                    "alpha": sol.alpha,
                    "m_value": sol.m_value,
                    "std_error": sol.m_std_error,
                    "alpha_low": sol.alpha_low,
                    "alpha_high": sol.alpha_high,
                    "n": sol.n_samples,
                    "exact": sol.exact,
                }
            )
            + "\n"
        )
    else:
        out.write(fmt(sol.alpha) + "\n")


def cmd_sample(args, out) -> None:
    started = time.time()
    seed = _seed(args)
    if args.n < 1:
        raise DNormError(f"--n must be >= 1, got {args.n}")
    rng = make_rng(seed)
    if args.kind == "maxstable":
        spec = build_spec(args.gen, args.d, args.lam, args.alpha)
        cfg = MaxStableConfig(spec, args.n_points, seed)
        samples = sample_max_stable_batch(cfg, args.n, rng)
        prefix = "eta"
        params = {"gen": args.gen, "d": args.d, "n": args.n, "n_points": args.n_points, "lambda": args.lam, "alpha": args.alpha}
    else:
        if args.alpha is None:
            raise DNormError("gpd sampling needs --alpha")
        if args.d is None:
            raise DNormError("gpd sampling needs --d")
        samples = sample_gpd_batch(args.alpha, args.d, args.n, rng)
        prefix = "y"
        params = {"alpha": args.alpha, "d": args.d, "n": args.n}
    text = samples_to_csv(samples, prefix)
    if args.out is None:
        out.write(text)
        return
    path = Path(args.out)
    _write_atomic(path, text)
    manifest = _manifest(f"sample {args.kind}", {k: v for k, v in params.items() if v is not None}, seed, started)
    _write_atomic(path.with_name(path.name + ".manifest.json"), dumps(manifest) + "\n")


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def _add_seed(p) -> None:
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="64-bit seed (default: fixed constant)")
    p.add_argument("--entropy", action="store_true", help="draw a fresh seed from the OS instead")


def _add_gen(p, suffix: str = "") -> None:
    dest = suffix.replace("-", "_")
    p.add_argument(f"--gen{suffix}", dest=f"gen{dest}", choices=GENERATORS, required=True)
    p.add_argument(f"--lambda{suffix}", dest=f"lambda{dest}" if suffix else "lam", type=float)
    p.add_argument(f"--alpha{suffix}", dest=f"alpha{dest}", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dnorm", description="D-norm evaluation, estimation and simulation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="exact closed-form norm")
    p.add_argument("--norm", choices=("sup", "l1", "logistic", "dirichlet2"), required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--alpha", type=float)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("estimate", help="Monte Carlo D-norm estimate")
    _add_gen(p)
    p.add_argument("--d", type=int)
    p.add_argument("--x", required=True)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--streams", type=int, default=1)
    _add_seed(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("distance", help="Wasserstein distance between two D-norms")
    _add_gen(p, "-a")
    _add_gen(p, "-b")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--solver", choices=("exact", "sinkhorn"), default="exact")
    p.add_argument("--epsilon", type=float)
    _add_seed(p)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("iterate", help="D-norms of M^n Z for n = 0..n_max")
    p.add_argument("--matrix", required=True, help="CSV or JSON doubly stochastic matrix")
    _add_gen(p)
    p.add_argument("--d", type=int)
    p.add_argument("--x", required=True)
    p.add_argument("--n-max", dest="n_max", type=int, default=20)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--streams", type=int, default=1)
    _add_seed(p)
    p.set_defaults(func=cmd_iterate)

    p = sub.add_parser("dirichlet", help="Dirichlet extremal coefficients")
    p.add_argument("action", choices=("table", "solve"))
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--alphas", default="0.5,1,2")
    p.add_argument("--target", type=float)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--streams", type=int, default=1)
    p.add_argument("--json", action="store_true", help="solve: print the full solution as JSON")
    _add_seed(p)
    p.set_defaults(func=cmd_dirichlet)

    p = sub.add_parser("sample", help="simulate max-stable or GPD vectors")
    p.add_argument("kind", choices=("maxstable", "gpd"))
    p.add_argument("--gen", choices=GENERATORS, default="constant")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--n-points", dest="n_points", type=int, default=1000)
    p.add_argument("--out", help="CSV path; a manifest is written next to it")
    _add_seed(p)
    p.set_defaults(func=cmd_sample)
    return parser


def _join_vector_args(argv: list[str]) -> list[str]:
    """Turn ``--x -2,1`` into ``--x=-2,1`` so argparse accepts negative vectors."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VECTOR_FLAGS and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_join_vector_args(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args, out)
    except NumericalError as exc:
        print(f"dnorm: numerical failure: {exc}", file=sys.stderr)
        return 3
    except DNormError as exc:
        print(f"dnorm: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
