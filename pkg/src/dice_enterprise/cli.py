"""Command line interface.

    dice-enterprise build    --f "expr[;expr...]" | --ladder "R:n0,n1;..."
    dice-enterprise sample   ... --die sim:0.3,0.7 --n 1000 --seed 1
    dice-enterprise validate ... --die sim:0.3,0.7 --n 10000
    dice-enterprise bench    ... --die sim:0.5,0.5 --adds 0,20,40 --runs 200
    dice-enterprise bounds   ... [--p 0.5]

Exit codes: 0 ok, 2 parse or configuration error, 3 pipeline error,
4 a cap was exceeded.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import enterprise as ent
from .chain import pretty_matrix
from .cftp import write_trace
from .errors import ConfigError, DiceEnterpriseError
from .expr import parse_target
from .ladder import parse_ladder
from .sampling import RandomnessMode, SimulatedDie, make_uniform_source, parse_die_spec


def _onoff(text):
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group(required=True)
    src.add_argument("--f", help="target entries separated by ';'")
    src.add_argument("--ladder", help="ladder states 'R:n0,n1,...' separated by ';'")
    common.add_argument("--m", type=int, default=None, help="die has faces 0..m (default 1)")
    common.add_argument("--v", type=int, default=None, help="target has outcomes 0..v")
    common.add_argument("--complement", choices=("first", "last", "none"), default="first",
                        help="synthesize a missing entry as 1 minus the others (default first)")
    common.add_argument("--die", default=None, help="sim:p0,p1,... | cmd:<program> | coins:q0,q1,...")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--n", type=int, default=1000)
    common.add_argument("--augment", type=int, default=0, help="extra augmentations")
    common.add_argument("--auto-logconcave", type=_onoff, default=None, metavar="on|off")
    common.add_argument("--strict-randomness", action="store_true",
                        help="derive every uniform from the die itself")
    common.add_argument("--doubling", action="store_true", help="double the window instead of T+1")
    common.add_argument("--polya-max", type=int, default=128)
    common.add_argument("--grid", type=int, default=50)
    common.add_argument("--cap", type=int, default=10**7, help="iteration cap per sample")
    common.add_argument("--format", choices=("json", "csv", "table"), default="table")
    common.add_argument("--out", default=None, help="write output here instead of stdout")

    p = argparse.ArgumentParser(prog="dice-enterprise", description="Perfect samplers for rational die laws.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("build", parents=[common], help="compile and show the ladder and kernel")
    s = sub.add_parser("sample", parents=[common], help="draw samples")
    s.add_argument("--trace", default=None, help="CSV trace of the first sample")
    sub.add_parser("validate", parents=[common], help="compare frequencies with f at a simulated die")
    b = sub.add_parser("bench", parents=[common], help="mean rolls against added augmentations")
    b.add_argument("--adds", type=_int_list, default=[0])
    b.add_argument("--runs", type=int, default=100)
    b.add_argument("--units", choices=("augmentations", "added-states"), default="augmentations",
                   help="added-states counts two added states per augmentation")
    b.add_argument("--workers", type=int, default=1)
    bd = sub.add_parser("bounds", parents=[common], help="running-time bounds")
    bd.add_argument("--p", type=float, default=None, help="heads probability (coin ladders)")
    return p


# setup

def _coins(spec):
    if spec and spec.startswith("coins:"):
        try:
            return [float(x) for x in spec[6:].split(",")]
        except ValueError:
            raise ConfigError(f"bad coin probabilities {spec!r}") from None
    return None


def make_enterprise(args, auto_default=None, augment=None):
    auto = args.auto_logconcave if args.auto_logconcave is not None else auto_default
    augment = args.augment if augment is None else augment
    complement = None if args.complement == "none" else args.complement
    coins = _coins(args.die)
    if args.ladder:
        L = parse_ladder(args.ladder)
        if auto is None:
            auto = L.m == 1
        return ent.from_ladder(L, auto_logconcave=auto, augment=augment)
    if coins is not None:
        return ent.build_from_coins(args.f, len(coins), v=args.v, complement=complement,
                                    auto_logconcave=bool(auto), augment=augment,
                                    polya_max=args.polya_max, grid=args.grid)
    m = 1 if args.m is None else args.m
    return ent.build(args.f, m=m, v=args.v, complement=complement, auto_logconcave=auto,
                     augment=augment, polya_max=args.polya_max, grid=args.grid)


def make_die(args, E, seed):
    if args.die is None:
        raise ConfigError("--die is required for this command")
    coins = _coins(args.die)
    if coins is not None:
        seeds = np.random.SeedSequence(seed).spawn(len(coins) + 1)
        sources = [SimulatedDie([1 - q, q], s) for q, s in zip(coins, seeds)]
        return ent.coins_to_die_adapter(sources, seeds[-1])
    return parse_die_spec(args.die, E.m + 1, seed)


def truth(args, E, die):
    """f at the simulated die, or None when the die is opaque."""
    if args.ladder:
        p = getattr(die, "p", None)
        return None if p is None else E.ladder.outcome_distribution(p).tolist()
    coins = _coins(args.die)
    complement = None if args.complement == "none" else args.complement
    if coins is not None:
        tgt = parse_target(args.f, len(coins), args.v, complement, univariate=False)
        return tgt.evaluate(list(coins) + [0.0])
    p = getattr(die, "p", None)
    if p is None:
        return None
    m = 1 if args.m is None else args.m
    return parse_target(args.f, m, args.v, complement).evaluate(list(p))


def seeds_for(seed, n):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def run_samples(args, E, seed, n):
    die_seed, uni_seed = seeds_for(seed, 2)
    die = make_die(args, E, die_seed)
    mode = RandomnessMode.DIE_DERIVED if args.strict_randomness else RandomnessMode.PRNG
    uniform = make_uniform_source(mode, die, uni_seed)
    rep = ent.sample(E, die, n, mode=mode, cap=args.cap, doubling=args.doubling, uniform=uniform)
    return rep, die


# rendering

def render(rows, fmt, columns=None):
    if fmt == "json":
        return json.dumps(rows, indent=2, sort_keys=True) + "\n"
    if isinstance(rows, dict):
        rows = [{"key": k, "value": _cell(v)} for k, v in rows.items()]
        columns = ["key", "value"]
    columns = columns or list(rows[0].keys())
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r[c]) for c in columns])
        return buf.getvalue()
    table = [[str(c) for c in columns]] + [[_cell(r[c]) for c in columns] for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(columns))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
                     for row in table) + "\n"


def _cell(x):
    if x is None:
        return "n/a"
    if isinstance(x, float):
        return f"{x:.6g}"
    if isinstance(x, (list, tuple)):
        return " ".join(_cell(y) for y in x)
    return str(x)


def emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# commands

def cmd_build(args):
    E = make_enterprise(args)
    info = E.describe()
    if args.format == "json":
        info["kernel"] = E.kernel.to_dict()
        return render(info, "json")
    rows = [{"state": i, "R": float(r), "exp": list(map(int, e)), "weights": list(map(float, w))}
            for i, (r, e, w) in enumerate(zip(E.ladder.R, E.ladder.exps, E.ladder.weights))]
    text = render(rows, args.format, ["state", "R", "exp", "weights"])
    if args.format == "table":
        flags = info["flags"]
        text += f"\nd={E.ladder.degree} states={E.ladder.size} sampler={info['sampler']} " \
                f"fine={flags['fine']} connected={flags['connected']} " \
                f"log_concave={flags['strictly_log_concave']}\n"
        if E.ladder.size <= 12:
            text += "\n" + pretty_matrix(E.kernel) + "\n"
    return text


def cmd_sample(args):
    E = make_enterprise(args)
    rep, die = run_samples(args, E, args.seed, args.n)
    if getattr(args, "trace", None):
        die_seed, uni_seed = seeds_for(args.seed, 2)
        tdie = make_die(args, E, die_seed)
        mode = RandomnessMode.DIE_DERIVED if args.strict_randomness else RandomnessMode.PRNG
        run = E.run_once(tdie, make_uniform_source(mode, tdie, uni_seed), args.cap, args.doubling, trace=True)
        write_trace(run, args.trace)
    rows = [{"sample": i, "outcome": int(o), "state": int(s), "N": int(n), "die_rolls": int(r),
             "uniforms": int(u)}
            for i, (o, s, n, r, u) in enumerate(zip(rep.outcomes, rep.states, rep.N, rep.die_rolls, rep.uniforms))]
    if args.format == "json":
        return render({"samples": rows, "summary": rep.summary(E.v)}, "json")
    text = render(rows, args.format)
    if args.format == "table":
        text += "\n" + render(rep.summary(E.v), "table")
    return text


def simultaneous_ci(counts, alpha=0.05):
    """Bonferroni-corrected Wilson intervals, one per outcome."""
    from scipy.stats import norm
    n = counts.sum()
    z = norm.ppf(1 - alpha / (2 * len(counts)))
    out = []
    for c in counts:
        ph = c / n
        den = 1 + z * z / n
        centre = (ph + z * z / (2 * n)) / den
        half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
        out.append((max(0.0, centre - half), min(1.0, centre + half)))
    return out


def chi_square_pvalue(counts, probs):
    from scipy.stats import chisquare
    counts = np.asarray(counts, dtype=float)
    exp = np.asarray(probs, dtype=float) * counts.sum()
    keep = exp > 0
    if np.any(counts[~keep] > 0):
        return 0.0
    if keep.sum() < 2:
        return 1.0
    return float(chisquare(counts[keep], exp[keep] * counts[keep].sum() / exp[keep].sum()).pvalue)


def cmd_validate(args):
    E = make_enterprise(args)
    rep, die = run_samples(args, E, args.seed, args.n)
    f = truth(args, E, die)
    counts = np.bincount(rep.outcomes, minlength=E.v + 1)
    ci = simultaneous_ci(counts)
    rows = []
    for j in range(E.v + 1):
        row = {"outcome": j, "count": int(counts[j]), "freq": float(counts[j] / args.n),
               "ci_low": ci[j][0], "ci_high": ci[j][1]}
        if f is not None:
            row["f"] = float(f[j])
            row["in_ci"] = bool(ci[j][0] <= f[j] <= ci[j][1])
        rows.append(row)
    summary = rep.summary(E.v)
    if f is not None:
        summary["chi2_pvalue"] = chi_square_pvalue(counts, f)
    if args.format == "json":
        return render({"outcomes": rows, "summary": summary}, "json")
    text = render(rows, args.format)
    if args.format == "table":
        text += "\n" + render(summary, "table")
    return text


def config_hash(args, augmentations):
    cfg = {k: getattr(args, k) for k in ("f", "ladder", "m", "v", "complement", "die", "seed", "runs",
                                          "auto_logconcave", "strict_randomness", "doubling")}
    cfg["augmentations"] = augmentations
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:12]


def to_augmentations(adds, units):
    if units == "added-states":
        return (adds + 1) // 2
    return adds


def _bench_cell(payload):
    args, augmentations, seed = payload
    E = make_enterprise(args, auto_default=False, augment=augmentations)
    rep, _ = run_samples(args, E, seed, args.runs)
    return {"config_hash": config_hash(args, augmentations), "augmentations": augmentations,
            "runs": args.runs, "mean_N": rep.mean_N, "sd_N": rep.sd_N,
            "mean_uniforms": float(np.mean(rep.uniforms))}


def cmd_bench(args):
    cells = [to_augmentations(a, args.units) for a in args.adds]
    payload = [(args, a, s) for a, s in zip(cells, seeds_for(args.seed, len(cells)))]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            rows = list(pool.map(_bench_cell, payload))
    else:
        rows = [_bench_cell(p) for p in payload]
    cols = ["config_hash", "augmentations", "runs", "mean_N", "sd_N", "mean_uniforms"]
    fmt = "csv" if args.format == "table" and args.out and args.out.endswith(".csv") else args.format
    return render(rows, fmt, cols)


TAIL_POINTS = (1, 2, 5, 10, 20, 30)


def cmd_bounds(args):
    E = make_enterprise(args)
    p = args.p
    if p is None and args.die and args.die.startswith("sim:") and E.m == 1:
        p = float(args.die[4:].split(",")[1])
    rep = ent.bounds(E, p)
    out = rep.to_dict()
    if rep.rho is not None:
        out["tail_bound"] = {str(n): rep.tail_bound(n) for n in TAIL_POINTS}
    if args.format == "json":
        return render(out, "json")
    if rep.rho is None:
        out["rho"] = "n/a (not strictly log-concave)" if E.monotone else "n/a (not a coin ladder)"
    out["notes"] = "; ".join(out["notes"])
    for key, val in list(out.items()):
        if isinstance(val, dict):
            del out[key]
            out.update({f"{key}[n={n}]": x for n, x in val.items()})
    return render(out, args.format)


COMMANDS = {"build": cmd_build, "sample": cmd_sample, "validate": cmd_validate,
            "bench": cmd_bench, "bounds": cmd_bounds}


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        text = COMMANDS[args.command](args)
        emit(text, args.out)
    except DiceEnterpriseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
