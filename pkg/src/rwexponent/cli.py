"""Command-line front end: ``rwexponent {bounds,sweep,montecarlo,diagnose}``.

Every command reads a JSON problem spec (``--spec``) and writes JSON, or
CSV for sweeps, to ``--out`` (standard output by default). Exit codes:
0 success, 2 input error, 3 solver did not converge (output still written).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np
from pydantic import ValidationError

from .alpha import solve_alpha
from .bounds import BoundResult, SolverConfig, frank_wolfe
from .errors import (
    BracketFailure,
    InstanceTooLarge,
    InvalidChain,
    MaxItersExceeded,
    NonConvergence,
    NotApplicable,
    RwExponentError,
)
from .markov import entropy_rate, sparsity_radius, stationary
from .montecarlo import SimulationConfig, brute_force_log_llr, estimate_exponent, log_lrt_product
from .schemas import (
    BoundsOutput,
    DiagnoseOutput,
    McSpec,
    MonteCarloOutput,
    ProblemSpec,
    QStarSummary,
    SweepSpec,
)
from .typeclass import enumerate_sequences, type_class_counts, walk_count, whittle_bounds

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3
CSV_HEADER = "beta2,lower,upper,alpha_star,mc_zeta,mc_stderr"


class InputError(Exception):
    pass


def sig(x: float) -> float:
    """Round to 12 significant digits."""
    return float(f"{x:.12g}")


def _rounded(obj):
    if isinstance(obj, float):
        return sig(obj)
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    return obj


def _fmt(x) -> str:
    return "" if x is None else f"{x:.12g}"


def load_spec(path: str) -> ProblemSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    try:
        return ProblemSpec.model_validate(raw)
    except ValidationError as exc:
        lines = [f"{path}: {'.'.join(map(str, e['loc'])) or '<root>'}: {e['msg']}" for e in exc.errors()]
        raise InputError("\n".join(lines)) from exc


def _problem(spec: ProblemSpec, beta2: float | None = None):
    try:
        chain = spec.build_chain()
        snr = spec.build_snr(chain, beta2)
    except (InvalidChain, RwExponentError, ValueError) as exc:
        raise InputError(f"spec: {exc}") from exc
    return chain, snr


def _solver_config(args) -> SolverConfig:
    cfg = SolverConfig()
    if args.gap_tol is not None:
        cfg = replace(cfg, gap_tol=args.gap_tol)
    if args.max_iters is not None:
        cfg = replace(cfg, max_iters=args.max_iters)
    return cfg


def solve(chain, snr, cfg: SolverConfig) -> tuple[BoundResult, bool, float | None]:
    """Frank-Wolfe bounds plus ``alpha*`` when it exists."""
    try:
        result, converged = frank_wolfe(chain, snr, cfg), True
    except MaxItersExceeded as exc:
        result, converged = exc.result, False
    alpha_star = None
    if entropy_rate(chain) < float(stationary(chain).pi @ snr.half_sq):
        try:
            alpha_star = solve_alpha(chain, snr).alpha_star
        except (NotApplicable, BracketFailure, NonConvergence) as exc:
            print(f"warning: alpha* unavailable: {exc}", file=sys.stderr)
    return result, converged, alpha_star


def _interior_low_node(snr, n: int) -> int:
    inner = np.arange(1, n - 1) if n > 2 else np.arange(n)
    return int(inner[np.argmin(np.abs(snr.beta[inner]))])


def bounds_payload(result: BoundResult, converged: bool, alpha_star, snr) -> dict:
    q = result.q_star
    node = _interior_low_node(snr, q.shape[0])
    row = [(int(j), float(q[node, j])) for j in np.flatnonzero(q[node] > 0)]
    out = BoundsOutput(
        lower=result.lower,
        upper=result.upper,
        detectable=result.detectable,
        alpha_star=alpha_star,
        gap=result.gap,
        iters=result.iters,
        q_star_summary=QStarSummary(
            min_diagonal=float(np.diag(q).min()),
            max_diagonal=float(np.diag(q).max()),
            interior_node=node,
            interior_row=row,
        ),
        converged=converged,
    )
    return _rounded(out.model_dump())


def cmd_bounds(args, out) -> int:
    spec = load_spec(args.spec)
    chain, snr = _problem(spec)
    result, converged, alpha_star = solve(chain, snr, _solver_config(args))
    json.dump(bounds_payload(result, converged, alpha_star, snr), out, indent=2)
    out.write("\n")
    return EXIT_OK if converged else EXIT_SOLVER


def _parse_range(text: str) -> tuple[float, float, float]:
    try:
        a, b, s = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise InputError(f"--beta2-range: expected A:B:S, got {text!r}") from exc
    return a, b, s


def _sweep_spec(spec: ProblemSpec, args) -> SweepSpec:
    base = spec.sweep.model_dump() if spec.sweep is not None else {}
    if args.beta2_range is not None:
        a, b, s = _parse_range(args.beta2_range)
        base.update(beta2_start=a, beta2_stop=b, beta2_step=s)
    mc = dict(base.get("mc") or {})
    for key in ("horizon", "seed", "replicas"):
        if getattr(args, key) is not None:
            mc[key] = getattr(args, key)
    base["mc"] = mc
    if args.include_mc:
        base["include_mc"] = True
    try:
        return SweepSpec.model_validate(base)
    except ValidationError as exc:
        lines = [f"sweep: {'.'.join(map(str, e['loc'])) or '<root>'}: {e['msg']}" for e in exc.errors()]
        raise InputError("\n".join(lines)) from exc


def _sim_config(mc: McSpec) -> SimulationConfig:
    return SimulationConfig(horizon=mc.horizon, seed=mc.seed, replicas=mc.replicas)


def cmd_sweep(args, out) -> int:
    spec = load_spec(args.spec)
    sweep = _sweep_spec(spec, args)
    cfg = _solver_config(args)
    status = EXIT_OK
    out.write(CSV_HEADER + "\n")
    for beta2 in sweep.grid():
        chain, snr = _problem(spec, beta2)
        result, converged, alpha_star = solve(chain, snr, cfg)
        if not converged:
            status = EXIT_SOLVER
        mc_zeta = mc_err = None
        if sweep.include_mc:
            est = estimate_exponent(chain, snr, _sim_config(sweep.mc))
            mc_zeta, mc_err = est.zeta_hat, est.stderr
        cells = [beta2, result.lower, result.upper, alpha_star, mc_zeta, mc_err]
        out.write(",".join(_fmt(c) for c in cells) + "\n")
    return status


def cmd_montecarlo(args, out) -> int:
    spec = load_spec(args.spec)
    chain, snr = _problem(spec)
    defaults = McSpec()
    try:
        mc = McSpec(
            horizon=args.horizon if args.horizon is not None else defaults.horizon,
            seed=args.seed if args.seed is not None else defaults.seed,
            replicas=args.replicas if args.replicas is not None else defaults.replicas,
        )
    except ValidationError as exc:
        raise InputError("\n".join(f"flags: {'.'.join(map(str, e['loc']))}: {e['msg']}" for e in exc.errors())) from exc
    est = estimate_exponent(chain, snr, _sim_config(mc))
    payload = MonteCarloOutput(
        zeta_hat=est.zeta_hat,
        stderr=est.stderr,
        per_replica=[float(v) for v in est.per_replica],
        seed=mc.seed,
        horizon=mc.horizon,
        replicas=mc.replicas,
    )
    json.dump(_rounded(payload.model_dump()), out, indent=2)
    out.write("\n")
    return EXIT_OK


def cmd_diagnose(args, out) -> int:
    spec = load_spec(args.spec)
    chain, snr = _problem(spec)
    t = args.t
    pattern = sparsity_radius(chain)
    try:
        enumerated = len(enumerate_sequences(pattern, t))
        classes = type_class_counts(pattern, t)
    except InstanceTooLarge as exc:
        raise InputError(f"diagnose: {exc}") from exc
    failures = []
    for counts, c in classes.values():
        lo, hi = whittle_bounds(counts)
        if not lo <= c <= hi:
            failures.append(counts.k.tolist())
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    draws = 10
    worst = 0.0
    for _ in range(draws):
        x = rng.standard_normal((chain.n, t))
        a = log_lrt_product(chain, snr, x)
        b = brute_force_log_llr(chain, snr, x)
        worst = max(worst, abs(a - b) / max(1.0, abs(b)))
    formula = walk_count(pattern, t)
    payload = DiagnoseOutput(
        n=chain.n,
        t=t,
        walk_count_enumerated=enumerated,
        walk_count_formula=formula,
        walk_counts_agree=enumerated == formula,
        type_classes=len(classes),
        whittle_all_pass=not failures,
        whittle_failures=failures,
        llr_draws=draws,
        llr_max_rel_err=worst,
    )
    json.dump(_rounded(payload.model_dump()), out, indent=2)
    out.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rwexponent", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--spec", required=True, help="problem spec JSON file")
        p.add_argument("--out", default="-", help="output file, '-' for standard output")

    def solver(p):
        p.add_argument("--gap-tol", type=float, default=None)
        p.add_argument("--max-iters", type=int, default=None)

    def mc(p):
        p.add_argument("--horizon", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--replicas", type=int, default=None)

    p = sub.add_parser("bounds", help="upper and lower exponent bounds as JSON")
    common(p)
    solver(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("sweep", help="bounds over a beta2 grid as CSV")
    common(p)
    solver(p)
    mc(p)
    p.add_argument("--beta2-range", default=None, metavar="A:B:S")
    p.add_argument("--include-mc", action="store_true", help="add Monte-Carlo columns")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("montecarlo", help="Monte-Carlo exponent estimate as JSON")
    common(p)
    mc(p)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("diagnose", help="small-instance counting and LLR oracle checks")
    common(p)
    p.add_argument("--t", type=int, default=6, help="sequence length (at most 12)")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.out == "-":
            return args.func(args, sys.stdout)
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            return args.func(args, fh)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
