"""Command-line interface.

Subcommands: moments, walks, paths, bridges, lbeta, sample, convergence,
selftest.  Config files use @file argument syntax (one flag or value per
line); the environment variable AIRYBETA_SEED supplies the default seed.
Every run writes a manifest echoing the fully resolved configuration.  Exact
rationals are serialized as "num/den" strings with a float convenience field.
Exit codes: 0 success, 1 validation error, 2 resource limit.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import subprocess
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from .errors import ValidationError, ResourceLimitError


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValidationError(f"not a rational number: {text!r}") from exc


def _int_list(text: str) -> list:
    return [int(t) for t in text.split(",") if t]


def _float_list(text: str) -> list:
    return [float(t) for t in text.split(",") if t]


def _frac_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def _default_seed() -> int:
    return int(os.environ.get("AIRYBETA_SEED", "0"))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="airybeta", fromfile_prefix_chars="@",
        description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=_default_seed())
        sp.add_argument("--output", default=None,
                        help="output file (default: stdout)")
        sp.add_argument("--format", choices=["csv", "json"], default=None)

    sp = sub.add_parser("moments", help="exact joint moments")
    sp.add_argument("--mode", choices=["corners", "dbm"], required=True)
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--k", type=_int_list, required=True)
    sp.add_argument("--rows", type=_int_list, default=None)
    sp.add_argument("--beta", type=_fraction, required=True)
    sp.add_argument("--tau", type=_fraction, default=None)
    sp.add_argument("--taus", default=None,
                    help="comma-separated rationals (dbm mode)")
    common(sp)

    sp = sub.add_parser("walks", help="enumerate the walk expansion")
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--k", type=_int_list, required=True)
    sp.add_argument("--rows", type=_int_list, required=True)
    sp.add_argument("--marked", type=_int_list, default=None,
                    help="marked indices (default 1,..,1)")
    sp.add_argument("--beta", type=_fraction, required=True)
    sp.add_argument("--tau", type=_fraction, required=True)
    sp.add_argument("--epsilon", type=float, default=0.0,
                    help="window scale for the blocks summary")
    sp.add_argument("--max-walks", type=int, default=2_000_000)
    common(sp)

    sp = sub.add_parser("paths", help="lattice path counts and weighted sums")
    sp.add_argument("--X", type=int, required=True)
    sp.add_argument("--H", type=int, required=True)
    sp.add_argument("--G", type=int, required=True)
    sp.add_argument("--beta", type=_fraction, default=Fraction(2))
    sp.add_argument("--N", type=int, default=100)
    common(sp)

    sp = sub.add_parser("bridges", help="conditioned-path kernel Monte Carlo")
    sp.add_argument("--kernel", choices=["I", "I0", "I00"], required=True)
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--h", type=float, default=0.0)
    sp.add_argument("--g", type=float, default=0.0)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--budget", type=int, default=100_000)
    sp.add_argument("--mesh", type=int, default=256)
    common(sp)

    sp = sub.add_parser("lbeta", help="truncated blocks integral L_beta")
    sp.add_argument("--k", type=_float_list, required=True)
    sp.add_argument("--taus", type=_float_list, required=True)
    sp.add_argument("--beta", type=float, default=None,
                    help="omit for the beta -> infinity kernels")
    sp.add_argument("--epsilon", type=_float_list, default=[0.1])
    sp.add_argument("--delta-max", type=int, default=2)
    sp.add_argument("--budget", type=int, default=6000)
    common(sp)

    sp = sub.add_parser("sample", help="ensemble samplers")
    sp.add_argument("--model", choices=["gbe", "corners", "dbm"], required=True)
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--tau", type=float, default=1.0)
    sp.add_argument("--size", type=int, default=1)
    sp.add_argument("--rows", type=_int_list, default=None)
    sp.add_argument("--times", type=_float_list, default=None)
    sp.add_argument("--dt", type=float, default=1e-3)
    common(sp)

    sp = sub.add_parser("convergence",
                        help="exact scaled edge moments vs N trend table")
    sp.add_argument("--N-list", type=_int_list, default=[16, 32, 64])
    sp.add_argument("--k", type=_float_list, default=[1.0])
    sp.add_argument("--taus", type=_float_list, default=[0.0])
    sp.add_argument("--beta", type=_fraction, default=Fraction(2))
    common(sp)

    sp = sub.add_parser("selftest", help="run the test suite")
    sp.add_argument("--tier", choices=["fast", "full"], default="fast")
    common(sp)
    return p


def _emit(args, records: list, fieldnames=None) -> None:
    fmt = args.format or ("json" if fieldnames is None else "csv")
    if fmt == "json":
        text = "\n".join(json.dumps(r) for r in records) + "\n"
    else:
        buf = io.StringIO()
        if fieldnames is None:
            fieldnames = list(records[0].keys()) if records else []
        w = csv.DictWriter(buf, fieldnames=fieldnames)
        w.writeheader()
        for r in records:
            w.writerow(r)
        text = buf.getvalue()
    manifest = {"tool": "airybeta", "version": __version__,
                "config": {k: _jsonable(v) for k, v in vars(args).items()
                           if k != "func"}}
    if args.output:
        with open(args.output, "w") as f:
            f.write(text)
        with open(args.output + ".manifest.json", "w") as f:
            json.dump(manifest, f, indent=2)
            f.write("\n")
    else:
        sys.stdout.write(text)
        sys.stderr.write(json.dumps(manifest) + "\n")


def _jsonable(v):
    if isinstance(v, Fraction):
        return _frac_str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _cmd_moments(args) -> int:
    from .dunkl import MomentQuery, corners_moment, dbm_moment
    if args.mode == "corners":
        if args.rows is None or args.tau is None:
            raise ValidationError("corners mode needs --rows and --tau")
        q = MomentQuery(mode="corners", N=args.N, powers=tuple(args.k),
                        rows=tuple(args.rows), tau=args.tau)
        val = corners_moment(q, args.beta)
    else:
        if args.taus is None:
            raise ValidationError("dbm mode needs --taus")
        taus = tuple(_fraction(t) for t in args.taus.split(","))
        q = MomentQuery(mode="dbm", N=args.N, powers=tuple(args.k), taus=taus)
        val = dbm_moment(q, args.beta)
    rec = {"query": {"mode": args.mode, "N": args.N, "k": args.k,
                     "rows": args.rows,
                     "beta": _frac_str(args.beta),
                     "tau": _frac_str(args.tau) if args.tau else None,
                     "taus": args.taus},
           "value_numerator": str(val.numerator),
           "value_denominator": str(val.denominator),
           "value_float": float(val)}
    _emit(args, [rec])
    return 0


def _cmd_walks(args) -> int:
    from .walks import (enumerate_walks, walk_weight, to_discrete_blocks,
                        jump_data, BlocksRejection)
    marked = args.marked or [1] * len(args.k)
    recs = []
    walks = enumerate_walks(tuple(marked), tuple(args.k), tuple(args.rows),
                            args.N, max_walks=args.max_walks)
    for w in walks:
        wt = walk_weight(w, args.beta, tau=args.tau)
        blocks = to_discrete_blocks(w, args.epsilon, args.N)
        if isinstance(blocks, BlocksRejection):
            summary = f"rejected:{blocks.reason}"
        else:
            summary = f"m={blocks.m},u={blocks.u},delta={blocks.delta}"
        recs.append({"steps": ";".join(_step_str(s) for s in w.steps),
                     "delta": jump_data(w).delta,
                     "weight": _frac_str(wt),
                     "weight_float": float(wt),
                     "blocks": summary})
    _emit(args, recs, fieldnames=["steps", "delta", "weight", "weight_float",
                                  "blocks"])
    return 0


def _step_str(s) -> str:
    if s[0] == "up":
        return "+"
    if s[0] == "down":
        return "-"
    return f"j({s[1]},{s[2]})"


def _cmd_paths(args) -> int:
    from .paths import count_paths, weighted_sum_I
    X, H, G = args.X, args.H, args.G
    cnt = count_paths(X, H, G)
    I = weighted_sum_I(X, H, G, args.beta, args.N)
    Ip = weighted_sum_I(X, H, G, args.beta, args.N,
                        floor_mode="stay_above_start")
    rec = {"X": X, "H": H, "G": G, "count": cnt,
           "I": float(I), "I_plus": float(Ip)}
    _emit(args, [rec], fieldnames=["X", "H", "G", "count", "I", "I_plus"])
    return 0


def _cmd_bridges(args) -> int:
    from . import bridges
    if args.kernel == "I":
        est = bridges.I_mc(args.x, args.h, args.g, args.beta,
                           n_paths=args.budget, mesh=args.mesh, seed=args.seed)
    elif args.kernel == "I0":
        est = bridges.I0_mc(args.x, args.h, args.beta, n_paths=args.budget,
                            mesh=args.mesh, seed=args.seed)
    else:
        est = bridges.I00_mc(args.x, args.beta, n_paths=args.budget,
                             mesh=args.mesh, seed=args.seed)
    rec = {"kernel": args.kernel,
           "params": {"x": args.x, "h": args.h, "g": args.g, "beta": args.beta},
           "mean": est.value, "stderr": est.stderr, "n": est.n_paths,
           "mesh": est.mesh, "mean_refined_mesh": est.value_refined,
           "seed": args.seed}
    _emit(args, [rec])
    return 0


def _cmd_lbeta(args) -> int:
    from .blocks import l_beta_truncated, epsilon_extrapolate
    reports, vals, errs = [], [], []
    for i, eps in enumerate(args.epsilon):
        res = l_beta_truncated(args.k, args.taus, args.beta,
                               delta_max=args.delta_max, epsilon=eps,
                               n_samples=args.budget, seed=args.seed + i)
        vals.append(res.value)
        errs.append(res.stderr)
        reports.append({
            "epsilon": eps,
            "strata": [{"u": pe.stratum.u,
                        "delta_pattern": [list(r) for r in pe.stratum.delta],
                        "virtual": list(pe.stratum.virtual),
                        "estimate": pe.value, "stderr": pe.stderr,
                        "n": pe.n_samples}
                       for pe in res.per_stratum],
            "total": res.value, "stderr": res.stderr})
    out = {"query": {"k": args.k, "taus": args.taus, "beta": args.beta,
                     "delta_max": args.delta_max, "epsilon": args.epsilon,
                     "budget": args.budget, "seed": args.seed},
           "runs": reports}
    if len(args.epsilon) >= 2:
        out["extrapolated"] = epsilon_extrapolate(args.epsilon, vals, errs)
    _emit(args, [out])
    return 0


def _cmd_sample(args) -> int:
    from . import ensembles as E
    rng = np.random.default_rng(args.seed)
    recs, fields = [], None
    if args.model == "gbe":
        lam = E.sample_gbe(args.N, args.beta, args.tau, size=args.size, rng=rng)
        fields = ["sample"] + [f"lam_{i + 1}" for i in range(args.N)]
        for s in range(args.size):
            recs.append({"sample": s, **{f"lam_{i + 1}": lam[s, i]
                                         for i in range(args.N)}})
    elif args.model == "corners":
        rows = args.rows or list(range(args.N, 0, -1))
        out = E.sample_gbe_corners(args.N, rows, args.beta, args.tau,
                                   size=args.size, rng=rng)
        fields = ["sample", "row", "index", "value"]
        for ri, r in enumerate(rows):
            for s in range(args.size):
                for i in range(r):
                    recs.append({"sample": s, "row": r, "index": i + 1,
                                 "value": out[ri][s, i]})
    else:
        if not args.times:
            raise ValidationError("dbm model needs --times")
        res = E.simulate_dbm(args.N, args.beta, args.times, size=args.size,
                             dt=args.dt, rng=rng)
        fields = ["sample", "time", "index", "value"]
        for t, arr in zip(res.times, res.samples):
            for s in range(args.size):
                for i in range(args.N):
                    recs.append({"sample": s, "time": t, "index": i + 1,
                                 "value": arr[s, i]})
    _emit(args, recs, fieldnames=fields)
    return 0


def _cmd_convergence(args) -> int:
    from .dunkl import scaled_edge_moment
    recs, prev = [], None
    for N in args.N_list:
        val = scaled_edge_moment(N, args.k, args.taus, args.beta).value
        diff = None if prev is None else val - prev
        recs.append({"N": N, "value": val,
                     "diff_from_previous": diff})
        prev = val
    _emit(args, recs, fieldnames=["N", "value", "diff_from_previous"])
    return 0


def _cmd_selftest(args) -> int:
    here = os.path.dirname(os.path.dirname(os.path.dirname(
        os.path.abspath(__file__))))
    cmd = [sys.executable, "-m", "pytest", "-q",
           os.path.join(here, "tests")]
    if args.tier == "fast":
        cmd += ["-m", "not slow"]
    proc = subprocess.run(cmd)
    return proc.returncode


_DISPATCH = {
    "moments": _cmd_moments,
    "walks": _cmd_walks,
    "paths": _cmd_paths,
    "bridges": _cmd_bridges,
    "lbeta": _cmd_lbeta,
    "sample": _cmd_sample,
    "convergence": _cmd_convergence,
    "selftest": _cmd_selftest,
}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _DISPATCH[args.subcommand](args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
