"""Command-line entry point: ``toraldyn <subcommand> [--config PATH] ...``.

Every run writes ``report.json`` into ``--out``: a header (tool version,
config hash, timestamp) and a body that depends only on (config, seed).
Exit codes: 0 success, 1 invariant violation, 2 config error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .action import CommutingPair, corpus_lines, find_commuting_partners, rank_one_factor_scan
from .averaging import cesaro_curve, distance_to_uniform, parry_grid_measure, write_curve_csv, write_measure_csv
from .bounds import predicted_dim_bound
from .cartan import CartanElement, RootSystemSpec, SimpleFactor, cartan_dim_bound, cartan_entropy, check_theorem14_hypotheses
from .config import canonical, config_hash, load_config
from .errors import ConfigError, ToralDynError
from .orbits import (
    TorusPoint,
    avoid_check,
    epsilon_dense,
    iterate,
    precision_for,
    write_histogram_csv,
)
from .spectral import ToralMap, char_poly, entropy_report, irreducible_factors, spectral_data
from .symbolic import (
    BallSpec,
    avoid_ball_sft,
    is_admissible,
    parry_chain,
    parry_sample,
    perron,
    rng_for,
    sample_export,
)

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG = 0, 1, 2

NOTE_EVIDENCE = (
    "density passes are finite-resolution, finite-time evidence for almost-everywhere density, not a proof"
)


class InvariantViolation(ToralDynError):
    pass


def _json_default(o):
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.bool_,)):
        return bool(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def write_report(out: Path, command: str, config: dict, body: dict) -> Path:
    header = {
        "tool": "toraldyn",
        "version": __version__,
        "command": command,
        "config_hash": config_hash(config),
        "config": json.loads(canonical(config)),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    with open(path, "w") as fh:
        json.dump({"header": header, "body": body}, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _ball(cfg) -> BallSpec:
    c = cfg["center"]
    return BallSpec(tuple(c) if len(c) > 1 else c[0], cfg["radius"])


def _sft(cfg, tolerance):
    ball = _ball(cfg["ball"])
    if ball.dim != 1:
        raise ConfigError("avoid-ball SFTs live on T^1; give a single center coordinate", field="ball.center")
    inner, outer = avoid_ball_sft(cfg["base"], ball, cfg["window"])
    return ball, inner, outer, perron(inner, tolerance), perron(outer, tolerance)


def _check_perron(pd, tol, label):
    lo, hi = pd.bracket
    pad = 2 * (pd.base + 3) * np.finfo(float).eps * hi
    if not lo <= pd.spectral_radius <= hi or hi - lo > tol + 2 * pad:
        raise InvariantViolation(f"{label}: Perron bracket [{lo}, {hi}] wider than tolerance {tol}")


# -- flagship ----------------------------------------------------------------

_CTX: dict = {}


def _flagship_init(ctx):
    _CTX.clear()
    _CTX.update(ctx)
    inner = ctx["inner"]
    _CTX["perron"] = perron(inner, ctx["tolerance"])
    _CTX["chain"] = parry_chain(inner, _CTX["perron"])


def _flagship_sample(index: int) -> dict:
    c = _CTX
    inner, pd = c["inner"], c["perron"]
    digits = parry_sample(inner, pd, c["precision"], c["seed"], index, chain=c["chain"])
    point = TorusPoint.from_digits(digits, inner.base)
    s_trace = iterate(c["s_map"], point, c["steps"], c["depth"])
    verdict = epsilon_dense(s_trace, c["epsilon"])
    # x_n for n <= P - L has its first L digits inside the admissible word
    t_trace = iterate(c["t_map"], point, c["precision"] - inner.window + 1, 8)
    avoided = avoid_check(t_trace, c["ball"])
    row = {
        "index": index,
        "admissible": bool(is_admissible(inner, digits)),
        "avoid_pass": bool(avoided),
        "dense_pass": bool(verdict.achieved),
        "first_cover_step": verdict.first_cover_step,
        "empty_cells": verdict.empty_cells,
        "discrepancy": verdict.discrepancy,
        "steps": verdict.steps,
        "precision_exhausted_at": s_trace.precision_exhausted_at,
    }
    if index < c["keep_samples"]:
        row["start"] = sample_export(digits[:256], inner.base)
    return row


def run_flagship(cfg: dict, out: Path) -> tuple[int, dict]:
    base, S = cfg["base"], cfg["multiplier"]
    tol = cfg["tolerance"]
    ball, inner, outer, pin, pout = _sft(cfg, tol)
    _check_perron(pin, tol, "inner SFT")
    _check_perron(pout, tol, "outer SFT")
    if pin.dimension > pout.dimension + pin.entropy_error + pout.entropy_error:
        raise InvariantViolation("inner SFT dimension exceeds the outer one")
    t_map, s_map = ToralMap.scalar(base), ToralMap.scalar(S)
    precision = precision_for(s_map, base, cfg["steps"])
    ctx = {
        "inner": inner,
        "ball": ball,
        "t_map": t_map,
        "s_map": s_map,
        "steps": cfg["steps"],
        "depth": cfg["depth"],
        "epsilon": cfg["epsilon"],
        "seed": cfg["seed"],
        "tolerance": tol,
        "precision": precision,
        "keep_samples": cfg["keep_samples"],
    }
    M = cfg["samples"]
    if cfg["threads"] > 1 and M > 1:
        with ProcessPoolExecutor(cfg["threads"], initializer=_flagship_init, initargs=(ctx,)) as pool:
            rows = list(pool.map(_flagship_sample, range(M), chunksize=max(1, M // (4 * cfg["threads"]))))
    else:
        _flagship_init(ctx)
        rows = [_flagship_sample(i) for i in range(M)]
    rows.sort(key=lambda r: r["index"])
    avoid = sum(r["avoid_pass"] for r in rows)
    dense = sum(r["dense_pass"] for r in rows)
    both = sum(r["avoid_pass"] and r["dense_pass"] for r in rows)
    rate = both / M if M else None
    sigma = math.sqrt(M * rate * (1 - rate)) if M else None
    t_report = entropy_report(t_map)
    chain = predicted_dim_bound(t_report, pin.dimension, invertible=t_map.is_invertible)
    body = {
        "sft": {
            "ball": ball.to_dict(),
            "inner": inner.to_dict(),
            "outer": outer.to_dict(),
            "inner_perron": pin.to_dict(),
            "outer_perron": pout.to_dict(),
            "dim_E_q": [pin.dimension, pin.entropy_error / math.log(base)],
        },
        "orbit": {"T": base, "S": S, "steps": cfg["steps"], "digits": precision, "depth": cfg["depth"],
                  "epsilon": cfg["epsilon"]},
        "samples": {
            "count": M,
            "admissible": sum(r["admissible"] for r in rows),
            "avoid_pass": avoid,
            "dense_pass": dense,
            "pass_both": both,
            "pass_rate": rate,
            "binomial_sigma": sigma,
            "rows": rows,
        },
        "bound_chain": chain.to_dict(),
        "note": NOTE_EVIDENCE,
    }
    with _mk(out, "samples.csv") as fh:
        fh.write("index,avoid_pass,dense_pass,first_cover_step,empty_cells,discrepancy\n")
        for r in rows:
            fh.write(f"{r['index']},{int(r['avoid_pass'])},{int(r['dense_pass'])},"
                     f"{r['first_cover_step'] if r['first_cover_step'] is not None else ''},"
                     f"{r['empty_cells']},{r['discrepancy']!r}\n")
    status = EXIT_OK if avoid == M and all(r["admissible"] for r in rows) else EXIT_INVARIANT
    return status, body


def _mk(out: Path, name: str):
    out.mkdir(parents=True, exist_ok=True)
    return open(out / name, "w")


# -- other subcommands -------------------------------------------------------

def run_analyze_map(cfg, out):
    m = ToralMap(cfg["matrix"])
    sd = spectral_data(m, precision=cfg["precision"])
    body = {
        "matrix": [list(r) for r in m.entries],
        "kind": m.kind,
        "det": m.det,
        "char_poly": char_poly(m),
        "factors": [{"factor": f, "multiplicity": e} for f, e in irreducible_factors(char_poly(m))],
        "spectrum": sd.to_dict(),
    }
    try:
        body["entropy"] = entropy_report(m, sd).to_dict()
    except ToralDynError as exc:
        body["entropy"] = {"error": str(exc)}
    return EXIT_OK, body


def run_make_pairs(cfg, out):
    if (cfg["seed_matrix"] is None) == (cfg["seed_poly"] is None):
        raise ConfigError("give exactly one of seed_matrix or seed_poly", field="seed_matrix")
    seed = ToralMap(cfg["seed_matrix"]) if cfg["seed_matrix"] else ToralMap.companion(cfg["seed_poly"])
    partners = find_commuting_partners(seed, cfg["coeff_bound"])
    pairs = [CommutingPair.build(seed, p) for p in partners]
    lines = corpus_lines(pairs, bound=cfg["bound"])
    if not all(p.verified_commuting for p in pairs):
        raise InvariantViolation("a generated partner does not commute with the seed")
    _mk(out, "pairs.jsonl").write("".join(line + "\n" for line in lines))
    return EXIT_OK, {"seed": [list(r) for r in seed.entries], "count": len(lines),
                     "pairs": [json.loads(line) for line in lines]}


def run_rank_one_scan(cfg, out):
    pair = CommutingPair.build(ToralMap(cfg["t"]), ToralMap(cfg["s"]))
    if not pair.verified_commuting:
        raise ConfigError("t and s do not commute", field="s")
    rep = rank_one_factor_scan(pair, cfg["bound"], cfg["twist_cap"])
    return EXIT_OK, rep.to_dict()


def run_avoid_sft(cfg, out):
    tol = cfg["tolerance"]
    ball, inner, outer, pin, pout = _sft(cfg, tol)
    _check_perron(pin, tol, "inner SFT")
    _check_perron(pout, tol, "outer SFT")
    ordered = pin.dimension <= pout.dimension + pin.entropy_error + pout.entropy_error
    body = {"ball": ball.to_dict(), "inner": inner.to_dict(), "outer": outer.to_dict(),
            "inner_perron": pin.to_dict(), "outer_perron": pout.to_dict(), "sandwich_ok": ordered}
    return (EXIT_OK if ordered else EXIT_INVARIANT), body


def run_sample(cfg, out):
    _, inner, _, pin, _ = _sft(cfg, cfg["tolerance"])
    chain = parry_chain(inner, pin)
    rows = []
    ok = True
    for i in range(cfg["count"]):
        digits = parry_sample(inner, pin, cfg["length"], cfg["seed"], i, chain=chain)
        adm = is_admissible(inner, digits)
        ok &= adm
        rows.append({"index": i, "admissible": adm, **sample_export(digits, inner.base)})
    with _mk(out, "samples.jsonl") as fh:
        for r in rows:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    return (EXIT_OK if ok else EXIT_INVARIANT), {"sft": inner.to_dict(), "count": len(rows), "samples": rows}


def run_density(cfg, out):
    m = ToralMap(cfg["matrix"])
    radix = cfg["radix"]
    P = cfg["precision"] or precision_for(m, radix, cfg["steps"])
    if cfg["start"] is None:
        rng = rng_for(cfg["seed"], 0)
        nums = tuple(TorusPoint.from_digits(rng.integers(0, radix, P), radix).numerators[0] for _ in range(m.dim))
        start = TorusPoint(nums, radix, P)
    else:
        start = TorusPoint.from_fractions(tuple(cfg["start"]), radix, P)
    trace = iterate(m, start, cfg["steps"], cfg["depth"])
    verdict = epsilon_dense(trace, cfg["epsilon"])
    write_histogram_csv(trace, _ensure(out) / "histogram.csv")
    return EXIT_OK, {"trace": trace.summary(), "verdict": verdict.to_dict(), "precision": P, "note": NOTE_EVIDENCE}


def _ensure(out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_average(cfg, out):
    _, inner, _, pin, _ = _sft(cfg, cfg["tolerance"])
    m = ToralMap(cfg["matrix"])
    nu = parry_grid_measure(inner, pin, cfg["depth"])
    curve = cesaro_curve(nu, m, cfg["checkpoints"])
    rows = [(n, *distance_to_uniform(mu)) for n, mu in curve]
    mass_ok = all(abs(mu.total_mass() - 1.0) <= 1e-12 for _, mu in curve)
    write_curve_csv(rows, _ensure(out) / "tv_curve.csv")
    write_measure_csv(curve[-1][1], out / "measure.csv")
    body = {"sft": inner.to_dict(), "depth": cfg["depth"],
            "curve": [{"N": n, "total_variation": tv, "max_cell_deviation": md} for n, tv, md in rows],
            "mass_conserved": mass_ok}
    return (EXIT_OK if mass_ok else EXIT_INVARIANT), body


def run_bound_chain(cfg, out):
    m = ToralMap(cfg["matrix"])
    rep = entropy_report(m)
    b = predicted_dim_bound(rep, cfg["dim_E"], m.is_invertible, cfg["neutral_dim"])
    return EXIT_OK, {"entropy": rep.to_dict(), "bound": b.to_dict()}


def run_cartan(cfg, out):
    mult = cfg["multiplicities"] or [1] * len(cfg["factors"])
    if len(mult) != len(cfg["factors"]):
        raise ConfigError("one multiplicity per factor", field="multiplicities")
    try:
        spec = RootSystemSpec(tuple(SimpleFactor(n, k) for n, k in zip(cfg["factors"], mult)))
        a1 = CartanElement(cfg["a1"])
        a1.check(spec)
        a2 = CartanElement(cfg["a2"]) if cfg["a2"] is not None else None
    except ValueError as exc:
        raise ConfigError(str(exc), field="a1") from None
    ent = cartan_entropy(spec, a1)
    body = {"dim_G": spec.dim, "entropy": ent.to_dict()}
    if spec.eligible:
        if a2 is not None:
            body["hypotheses"] = check_theorem14_hypotheses(spec, a1, a2).to_dict()
        body["dim_bound"] = cartan_dim_bound(spec, a1, cfg["assumed_dim"]).to_dict()
    else:
        body["eligible"] = False
        body["reason"] = "some simple factor has real rank < 2"
    if ent.dim_total != spec.dim:
        return EXIT_INVARIANT, body
    return EXIT_OK, body


COMMANDS = {
    "flagship": run_flagship,
    "analyze-map": run_analyze_map,
    "make-pairs": run_make_pairs,
    "rank-one-scan": run_rank_one_scan,
    "avoid-sft": run_avoid_sft,
    "sample": run_sample,
    "density": run_density,
    "average": run_average,
    "bound-chain": run_bound_chain,
    "cartan": run_cartan,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="toraldyn", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"toraldyn {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, default=None, help="YAML config file")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed (u64)")
        sp.add_argument("--out", type=Path, default=Path("reports") / name, help="output directory")
        sp.add_argument("--threads", type=int, default=None, help="worker processes (flagship)")
        sp.add_argument("--tolerance", type=float, default=None, help="override the numeric tolerance")
    return p


def _apply_overrides(cfg: dict, args) -> dict:
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer", field="seed")
        if "seed" not in cfg:
            raise ConfigError("this subcommand takes no seed", field="seed")
        cfg["seed"] = args.seed
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("threads must be >= 1", field="threads")
        if "threads" in cfg:
            cfg["threads"] = args.threads
    if args.tolerance is not None:
        if not args.tolerance > 0:
            raise ConfigError("tolerance must be positive", field="tolerance")
        for key in ("tolerance", "precision"):
            if key in cfg and isinstance(cfg[key], float):
                cfg[key] = args.tolerance
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config, args.command), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        status, body = COMMANDS[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ToralDynError, ValueError) as exc:
        # precondition failures of the library (too-coarse window, bad geometry, ...)
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    path = write_report(args.out, args.command, cfg, body)
    print(f"{args.command}: exit {status}, report {path}")
    return status


if __name__ == "__main__":
    raise SystemExit(main())
