"""Command line: simulate sessions, compute regret, estimate values, evaluate.

Errors are reported as one JSON line on stderr with a nonzero exit status.
"""
from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .auction import DEFAULT_CTRS, DEFAULT_VALUES, CtrProfile, Mechanism
from .best_response import VARIANTS, estimate_best_response, response_curves
from .estimators import (Method, combine_mean, estimate_average_bid, estimate_regret_min,
                         estimate_regret_weighted)
from .evaluation import evaluate, modal_position, welfare_series
from .io import (BidLogError, RunManifest, load_bid_log, load_estimates, load_values, read_manifest,
                 write_bid_log, write_csv, write_estimates, write_json, write_values)
from .regret import BidderReplay, BidSequence, Window, momentary_regret_series
from .sim import AgentSpec, SessionConfig, run_session
from .vcg_ne import estimate_vcg_like_ne

SEED_ENV = "REGRET_ECON_SEED"


class CliError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message)


def _grid(text: str) -> np.ndarray:
    try:
        lo, hi = (int(x) for x in text.split(":"))
    except ValueError:
        raise CliError("usage", f"grid must look like LO:HI, got {text!r}") from None
    if lo > hi:
        raise CliError("usage", f"empty grid {text}")
    return np.arange(lo, hi + 1, dtype=float)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _window(seq: BidSequence, text: str | None) -> Window:
    w = Window.parse(text) if text else seq.default_window()
    return w.check(seq.T)


def _mechanism(args, seq: BidSequence | None = None) -> Mechanism:
    if args.mechanism:
        return Mechanism.parse(args.mechanism)
    if seq is not None and seq.mechanism is not None:
        return seq.mechanism
    return Mechanism.GSP


def _warn(message: str) -> None:
    print(json.dumps({"warning": message}), file=sys.stderr)


def _manifest(args, argv, **extra) -> RunManifest:
    opts = {k: v for k, v in extra.items() if k not in ("inputs", "outputs", "seed", "config")}
    return RunManifest(args.command, list(argv), __version__, seed=extra.get("seed"),
                       config=extra.get("config"), inputs=extra.get("inputs", {}),
                       outputs=extra.get("outputs", {}), options=opts)


# --- simulate -----------------------------------------------------------------

def _session_config(args) -> tuple[SessionConfig, int]:
    ini = configparser.ConfigParser()
    sec = {}
    if args.config:
        if not Path(args.config).exists():
            raise CliError("io", f"config file not found: {args.config}")
        ini.read(args.config)
        sec = dict(ini["session"]) if ini.has_section("session") else {}
    seed = args.seed
    if seed is None:
        seed = int(sec.get("seed", os.environ.get(SEED_ENV, 0)))
    mechanism = args.mechanism or sec.get("mechanism", "gsp")
    rounds = args.rounds or int(sec.get("rounds", 1500))
    values = _floats(args.values) if args.values else _floats(sec.get("values", "")) or DEFAULT_VALUES
    ctrs = _floats(args.ctrs) if args.ctrs else _floats(sec.get("ctrs", "")) or DEFAULT_CTRS.rates
    grid = _grid(args.grid or sec.get("grid", "1:60"))
    if args.agent:
        agents = tuple(AgentSpec.parse(a) for a in args.agent)
    elif ini.has_section("agents"):
        ag = dict(ini["agents"])
        if "default" in ag:
            agents = (AgentSpec.parse(ag["default"]),)
        else:
            agents = tuple(AgentSpec.parse(ag[str(i)]) for i in range(1, len(values) + 1))
    else:
        agents = ()
    cfg = SessionConfig(Mechanism.parse(mechanism), CtrProfile(ctrs), rounds, values, agents,
                        seed, tuple(grid))
    return cfg, seed


def cmd_simulate(args, argv) -> None:
    cfg, seed = _session_config(args)
    out = Path(args.out_dir)
    paths = {"bids": str(out / "bids.csv"), "values": str(out / "values.csv"),
             "outcomes": str(out / "outcomes.csv")}
    man = _manifest(args, argv, seed=seed, config=args.config, outputs=paths,
                    mechanism=cfg.mechanism.value, rounds=cfg.rounds, values=list(cfg.values),
                    ctrs=list(cfg.ctrs.rates), agents=[a.kind for a in cfg.agents])
    res = run_session(cfg)
    write_bid_log(paths["bids"], res.seq, man, wide=args.wide)
    write_values(paths["values"], res.values, man)
    rows = ((t + 1, i, res.seq.bids[t, j], res.positions[t, j], res.expenditures[t, j],
             res.utilities[t, j])
            for t in range(res.seq.T) for j, i in enumerate(res.seq.bidder_ids))
    write_csv(paths["outcomes"], ["auction_index", "bidder_id", "bid", "position", "expenditure",
                                  "utility"], rows, man)


# --- regret -------------------------------------------------------------------

def cmd_regret(args, argv) -> None:
    seq = load_bid_log(args.log, wide=args.wide)
    values = load_values(args.values)
    mech = _mechanism(args, seq)
    ctrs = CtrProfile(_floats(args.ctrs)) if args.ctrs else DEFAULT_CTRS
    w = _window(seq, args.window)
    grid = _grid(args.grid)
    out = Path(args.out_dir)
    paths = {"curves": str(out / "curves.csv"), "totals": str(out / "totals.csv"),
             "momentary": str(out / "momentary.csv"), "welfare": str(out / "welfare.csv")}
    man = _manifest(args, argv, inputs={"log": args.log, "values": args.values}, outputs=paths,
                    mechanism=mech.value, window=str(w), grid=args.grid, block=args.block)
    missing = [i for i in seq.bidder_ids if i not in values]
    if missing:
        raise CliError("input", f"values file lacks bidders {missing}")
    curves, totals = [], []
    for i in seq.bidder_ids:
        rep = BidderReplay(seq, i, grid, mech, ctrs)
        c = rep.curve(grid, w)
        rel = c.relative
        curves += [(i, c.values[k], c.actual[k], c.opt[k], c.regret[k], rel[k])
                   for k in range(len(c.values))]
        r = rep.report(values[i], w)
        totals.append((i, values[i], r.actual, r.opt, r.regret, r.relative))
    write_csv(paths["curves"], ["bidder", "v", "actual", "opt", "regret", "relative"], curves, man)
    write_csv(paths["totals"], ["bidder", "value", "actual", "opt", "regret", "relative"], totals, man)
    series = momentary_regret_series(seq, values, args.block, grid, mech, ctrs)
    write_csv(paths["momentary"], ["block", "group", "relative", "first", "last", "partial"],
              ((p.block, p.group, p.relative, p.first, p.last, p.partial) for p in series), man)
    ws = welfare_series(seq, values, args.block, ctrs)
    write_csv(paths["welfare"], ["block", "normalized_welfare"],
              ((k + 1, x) for k, x in enumerate(ws or [])), man)


# --- estimate -----------------------------------------------------------------

METHOD_CHOICES = [m.value for m in Method]


def run_estimators(seq: BidSequence, methods, mech: Mechanism, ctrs: CtrProfile, window: Window | None,
                   grid: np.ndarray, top_rule: str = "second", objective: str = "absolute",
                   extras: dict | None = None):
    """Run every requested method.

    A ``window`` of None lets each method pick its own default span.
    ``extras`` collects the VCG-like-NE results by method tag.
    """
    extras = {} if extras is None else extras
    records = []
    curves = {}

    def curve(i):
        if i not in curves:
            curves[i] = BidderReplay(seq, i, grid, mech, ctrs).curve(grid, window)
        return curves[i]

    for m in methods:
        m = Method(m)
        if m in (Method.VCG_NE, Method.VCG_NE_RAW):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = estimate_vcg_like_ne(BidSequence(seq.bids, seq.bidder_ids, mech, ctrs), ctrs,
                                           window, perturb=m is Method.VCG_NE, top_rule=top_rule)
            if mech is Mechanism.VCG:
                _warn(f"{m.value} assumes GSP equilibrium bids; log is from a VCG auction")
            records += res.records
            extras[m.value] = res
        elif m in VARIANTS:
            for i in seq.bidder_ids:
                records.append(estimate_best_response(seq, i, VARIANTS[m], window, grid, grid,
                                                      mech, ctrs))
        else:
            for i in seq.bidder_ids:
                if m is Method.REGRET_MIN:
                    records.append(estimate_regret_min(curve(i), objective))
                elif m is Method.AVG_BID:
                    records.append(estimate_average_bid(seq, i, window))
                elif m is Method.REGRET_WEIGHTED:
                    records.append(estimate_regret_weighted(curve(i)))
                else:
                    records.append(combine_mean([estimate_regret_min(curve(i), objective),
                                                 estimate_average_bid(seq, i, window)]))
    return records


def cmd_estimate(args, argv) -> None:
    seq = load_bid_log(args.log, wide=args.wide)
    mech = _mechanism(args, seq)
    ctrs = CtrProfile(_floats(args.ctrs)) if args.ctrs else DEFAULT_CTRS
    w = _window(seq, args.window)
    explicit = w if args.window else None
    grid = _grid(args.grid)
    methods = [m for spec in args.method for m in spec.split(",")]
    for m in methods:
        if m not in METHOD_CHOICES:
            raise CliError("usage", f"unknown method {m!r}; choose from {', '.join(METHOD_CHOICES)}")
    outputs = {"estimates": args.out}
    if args.deviations_out:
        outputs["deviations"] = args.deviations_out
    if args.curves_out:
        outputs["response_curves"] = args.curves_out
    man = _manifest(args, argv, inputs={"log": args.log}, outputs=outputs, methods=methods,
                    mechanism=mech.value, window=str(w), grid=args.grid, top_rule=args.top_rule,
                    objective=args.objective)
    extras: dict = {}
    records = run_estimators(seq, methods, mech, ctrs, explicit, grid, args.top_rule, args.objective,
                             extras)
    write_estimates(args.out, records, man)
    if args.deviations_out:
        res = extras.get(Method.VCG_NE.value)
        if res is None:
            raise CliError("usage", "--deviations-out needs --method vcg-ne")
        write_csv(args.deviations_out, ["auction_index", "mean_abs_deviation"],
                  ((res.records[0].window.first + t, d) for t, d in enumerate(res.deviations)), man)
    if args.curves_out:
        rows = []
        for i in seq.bidder_ids:
            rc = response_curves(seq, i, grid, w, mech, ctrs)
            rows += [(i, rc.grid[k], rc.Q[k], rc.TE[k]) for k in range(len(grid))]
        write_csv(args.curves_out, ["bidder", "b", "Q", "TE"], rows, man)


# --- evaluate / report --------------------------------------------------------

def _evaluation(records, values, seq: BidSequence | None, window_text: str | None):
    ranks = None
    if seq is not None:
        w = _window(seq, window_text)
        ranks = {i: modal_position(seq, i, w) for i in seq.bidder_ids}
    return evaluate(records, values, ranks)


def cmd_evaluate(args, argv) -> None:
    records = load_estimates(args.estimates)
    values = load_values(args.values)
    seq = load_bid_log(args.log, wide=args.wide) if args.log else None
    inputs = {"estimates": args.estimates, "values": args.values}
    if args.log:
        inputs["log"] = args.log
    outputs = {"report": args.out}
    if args.csv_out:
        outputs["flat"] = args.csv_out
    man = _manifest(args, argv, inputs=inputs, outputs=outputs, window=args.window)
    rep = _evaluation(records, values, seq, args.window)
    write_json(args.out, rep.to_dict(), man)
    if args.csv_out:
        cols = ["method", "bidder_id", "value", "estimate", "relative_error", "modal_rank",
                "modal_rank_tied", "flags"]
        write_csv(args.csv_out, cols,
                  ([r.get(c) if c != "flags" else ";".join(r["flags"]) for c in cols]
                   for r in rep.rows), man)


def cmd_report(args, argv) -> None:
    seq = load_bid_log(args.log, wide=args.wide)
    values = load_values(args.values)
    mech = _mechanism(args, seq)
    ctrs = CtrProfile(_floats(args.ctrs)) if args.ctrs else DEFAULT_CTRS
    w = _window(seq, args.window)
    grid = _grid(args.grid)
    methods = [m for spec in args.method for m in spec.split(",")]
    for m in methods:
        if m not in METHOD_CHOICES:
            raise CliError("usage", f"unknown method {m!r}")
    man = _manifest(args, argv, inputs={"log": args.log, "values": args.values},
                    outputs={"report": args.out}, methods=methods, mechanism=mech.value,
                    window=str(w), grid=args.grid, block=args.block)
    extras: dict = {}
    records = run_estimators(seq, methods, mech, ctrs, w if args.window else None, grid,
                             extras=extras)
    regret = {}
    for i in seq.bidder_ids:
        r = BidderReplay(seq, i, grid, mech, ctrs).report(values[i], w)
        regret[str(i)] = {"value": values[i], "actual": r.actual, "opt": r.opt, "regret": r.regret,
                          "relative": r.relative, "opt_bids": list(r.opt_bids)}
    series = momentary_regret_series(seq, values, args.block, grid, mech, ctrs)
    rep = _evaluation(records, values, seq, str(w))
    body = {
        "regret": regret,
        "momentary": [p.__dict__ for p in series],
        "welfare": welfare_series(seq, values, args.block, ctrs),
        "estimates": [{"bidder_id": r.bidder_id, "method": r.method, "estimate": r.estimate,
                       "window": str(r.window), "flags": list(r.flags)} for r in records],
        "evaluation": rep.to_dict(),
    }
    if Method.VCG_NE.value in extras:
        res = extras[Method.VCG_NE.value]
        body["vcg_ne"] = {"consistency_rate": res.consistency_rate, "excluded": res.excluded,
                          "mean_abs_deviation": float(np.nanmean(res.deviations))}
    write_json(args.out, body, man)


def cmd_rerun(args, argv) -> None:
    man = read_manifest(args.file)
    if not man or not man.get("argv"):
        raise CliError("input", f"{args.file} carries no manifest")
    code = main(man["argv"])
    if code:
        raise CliError("rerun", f"replayed command exited with status {code}")


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="regret-econ", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, log=True):
        if log:
            sp.add_argument("--log", required=True, help="bid log CSV (auction_index,bidder_id,bid)")
        sp.add_argument("--wide", action="store_true", help="bid log is wide form (one row per auction)")
        sp.add_argument("--mechanism", choices=["gsp", "vcg"],
                        help="payment rule (default: from the log's manifest, else gsp)")
        sp.add_argument("--ctrs", help="click-through rates top slot first, comma separated")
        sp.add_argument("--window", help="inclusive auction range FIRST:LAST (default: second half)")
        sp.add_argument("--grid", default="1:60", help="value and bid grid LO:HI (default 1:60)")

    s = sub.add_parser("simulate", help="run a synthetic session")
    s.add_argument("--config", help="INI config with [session] and optional [agents] sections")
    s.add_argument("--seed", type=int, help=f"session seed (default: config, then ${SEED_ENV}, then 0)")
    s.add_argument("--mechanism", choices=["gsp", "vcg"])
    s.add_argument("--rounds", type=int, help="number of auctions (default 1500)")
    s.add_argument("--values", help="bidder values, comma separated (default 21,27,33,39,45)")
    s.add_argument("--ctrs", help="click-through rates top slot first")
    s.add_argument("--grid", help="bid grid LO:HI for learners (default 1:60)")
    s.add_argument("--agent", action="append",
                   help='agent spec, e.g. "hedge", "truthful sigma=2", "eps-greedy epsilon=0.1", '
                        '"overbidder kappa=0.4 sigma=2"; give once for all bidders or once per bidder')
    s.add_argument("--wide", action="store_true", help="write the bid log in wide form")
    s.add_argument("--out-dir", required=True, help="directory for bids.csv, values.csv, outcomes.csv")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("regret", help="regret curves, totals, momentary series and welfare")
    common(r)
    r.add_argument("--values", required=True, help="values CSV (bidder_id,value)")
    r.add_argument("--block", type=int, default=60, help="auctions per momentary block (default 60)")
    r.add_argument("--out-dir", required=True)
    r.set_defaults(func=cmd_regret)

    e = sub.add_parser("estimate", help="estimate values from a bid log (never reads true values)")
    common(e)
    e.add_argument("--method", action="append", required=True,
                   help=f"one or more of: {', '.join(METHOD_CHOICES)} (repeat or comma separate)")
    e.add_argument("--top-rule", choices=["second", "max_second_own"], default="second",
                   help="VCG-like-NE value of the top-ranked bidder")
    e.add_argument("--objective", choices=["absolute", "relative"], default="absolute",
                   help="regret minimized by regret-min")
    e.add_argument("--deviations-out", help="per-auction mean absolute perturbation CSV (vcg-ne)")
    e.add_argument("--curves-out", help="response curve CSV (bidder,b,Q,TE)")
    e.add_argument("--out", required=True, help="estimates CSV")
    e.set_defaults(func=cmd_estimate)

    v = sub.add_parser("evaluate", help="score estimates against true values")
    v.add_argument("--estimates", required=True)
    v.add_argument("--values", required=True)
    v.add_argument("--log", help="bid log, enables modal-rank tables and bias correction")
    v.add_argument("--wide", action="store_true")
    v.add_argument("--window", help="window for modal ranks (default: second half)")
    v.add_argument("--out", required=True, help="report JSON")
    v.add_argument("--csv-out", help="flat per-bidder CSV")
    v.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("report", help="regret, estimates and evaluation bundled in one JSON")
    common(b)
    b.add_argument("--values", required=True)
    b.add_argument("--method", action="append",
                   default=None, help="methods to run (default: regret-min,avg-bid,regret-weighted)")
    b.add_argument("--block", type=int, default=60)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_report)

    x = sub.add_parser("rerun", help="re-execute the command recorded in an output's manifest")
    x.add_argument("file")
    x.set_defaults(func=cmd_rerun)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        if args.command == "report" and not args.method:
            args.method = ["regret-min,avg-bid,regret-weighted"]
        args.func(args, argv)
    except CliError as exc:
        print(json.dumps({"error": exc.kind, "message": str(exc)}), file=sys.stderr)
        return 2
    except (BidLogError, FileNotFoundError) as exc:
        print(json.dumps({"error": "input", "message": str(exc)}), file=sys.stderr)
        return 1
    except (ValueError, KeyError, RuntimeError) as exc:
        print(json.dumps({"error": "invalid", "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
