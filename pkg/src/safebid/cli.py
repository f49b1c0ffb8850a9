"""Command-line front end.

Every subcommand is a thin shell over the engine modules; numerical work
happens in the library. Exit codes: 0 success, 1 engine error, 2 config
error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import verify as verify_mod
from .errors import ParseError, SafebidError, ValidationError
from .harness import run_training, run_unsafe_ablation, write_run_outputs
from .market import MarketInstance, clear_market
from .milp import big_m_expand
from .safety import SafetyState, UnitSafety, filter_project, fresh_state


def _fmt(x: float) -> str:
    return repr(float(x))


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="JSON config file (default: bundled six-unit setup)")
    common.add_argument("--seed", type=int, default=None, help="master seed override")
    common.add_argument("--out", type=Path, default=None, help="output directory override")
    common.add_argument("--episodes", type=int, default=None, help="episode count override")
    common.add_argument("--mode", choices=["intent", "literal"], default=None,
                        help="safety-filter semantics override")

    p = argparse.ArgumentParser(prog="safebid",
                                description="Market bidding and maintenance scheduling "
                                            "with a safety-filtered learning loop.")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dispatch", parents=[common], help="clear one market instance")
    d.add_argument("--instance", type=Path, default=None,
                   help="JSON file with bids/maint/demand (defaults applied otherwise)")
    d.add_argument("--demand", type=float, default=None, help="demand in MW")
    d.add_argument("--bids", type=str, default=None, help="comma-separated bid multipliers")
    d.add_argument("--maint", type=str, default=None, help="comma-separated outage bits")

    f = sub.add_parser("filter", parents=[common], help="project one maintenance request")
    f.add_argument("--request", type=str, required=True, help="comma-separated request bits")
    f.add_argument("--state", type=Path, default=None,
                   help="JSON safety state (default: fresh state at t=0)")

    sub.add_parser("train", parents=[common], help="full learning run with the default agents")
    sub.add_parser("baseline-q", parents=[common], help="full run with tabular learners")
    sub.add_parser("ablate-unsafe", parents=[common], help="full run with the filter bypassed")

    m = sub.add_parser("export-milp", parents=[common],
                       help="write the projection integer program as an LP file")
    m.add_argument("--request", type=str, default=None, help="comma-separated request bits")
    m.add_argument("--big-m", type=float, default=None,
                   help="linearization constant (default: max(1000, horizon))")

    v = sub.add_parser("verify", parents=[common], help="run the self-check suite")
    v.add_argument("--check-seed", type=int, default=0)
    return p


def _load_config(args) -> config_mod.ExperimentConfig:
    if args.config is not None:
        cfg = config_mod.parse_config(args.config)
    else:
        cfg = config_mod.default_config()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = str(args.out)
    if args.episodes is not None:
        cfg.episodes = args.episodes
    if args.mode is not None:
        cfg.filter_mode = args.mode
    bad = config_mod.validate_config(cfg)
    if bad:
        raise ValidationError(bad)
    return cfg


def _parse_bits(text: str, n: int, what: str) -> np.ndarray:
    vals = [int(v) for v in text.split(",")]
    if len(vals) != n or any(v not in (0, 1) for v in vals):
        raise ParseError(f"{what} must be {n} comma-separated bits")
    return np.array(vals, dtype=int)


def _cmd_dispatch(args, cfg) -> int:
    n = cfg.n_units
    payload = {}
    if args.instance is not None:
        with open(args.instance) as fh:
            payload = json.load(fh)
    bids = payload.get("bids", [1.0] * n)
    if args.bids is not None:
        bids = [float(v) for v in args.bids.split(",")]
    maint = payload.get("maint", [0] * n)
    if args.maint is not None:
        maint = [int(v) for v in args.maint.split(",")]
    demand = payload.get("demand")
    if args.demand is not None:
        demand = args.demand
    if demand is None:
        raise ParseError("dispatch needs a demand (--demand or instance file)")
    inst = MarketInstance(
        units=cfg.units, bids=np.array(bids, dtype=float), maint=np.array(maint, dtype=int),
        demand=float(demand),
        prev_gen=np.array(payload["prev_gen"], dtype=float) if "prev_gen" in payload else None,
        ramps_enabled=bool(payload.get("ramps_enabled", False)),
    )
    out = clear_market(inst)
    print("gen " + " ".join(_fmt(g) for g in out.gen))
    print("price " + _fmt(out.price))
    print("total_cost " + _fmt(out.total_cost))
    return 0


def _state_from_json(path: Path, n: int) -> SafetyState:
    with open(path) as fh:
        raw = json.load(fh)
    units = tuple(
        UnitSafety(run_length=int(u.get("run_length", 0)),
                   last_maint=int(u.get("last_maint", 0)),
                   recent_days=tuple(int(d) for d in u.get("recent_days", [])))
        for u in raw["units"]
    )
    if len(units) != n:
        raise ParseError(f"state has {len(units)} units, config has {n}")
    return SafetyState(t=int(raw.get("t", 0)), units=units)


def _cmd_filter(args, cfg) -> int:
    request = _parse_bits(args.request, cfg.n_units, "--request")
    state = _state_from_json(args.state, cfg.n_units) if args.state else fresh_state(cfg.n_units)
    decision = filter_project(request, state, cfg.filter_config())
    print("u_f " + ",".join(str(int(v)) for v in decision.u_f))
    print("distance " + str(decision.distance))
    return 0


def _run_and_write(cfg, runner, label: str) -> int:
    result = runner(cfg)
    paths = write_run_outputs(result, cfg.out_dir)
    from .report import render_figures

    figures = render_figures(result, Path(cfg.out_dir) / "figures")
    print(f"{label} complete: {len(result.records)} steps over {cfg.episodes} episodes")
    for key in sorted(paths):
        print(f"wrote {paths[key]}")
    for fig in figures:
        print(f"wrote {fig}")
    if result.violations is not None:
        v = result.violations
        print("violations over_cap_steps " + str(len(v["over_cap_steps"])))
        print("violations coverage_steps " + str(len(v["coverage_steps"])))
        print("violations demand_infeasible_steps " + str(len(v["demand_infeasible_steps"])))
    final = result.sum_avg_reward[-min(10, len(result.sum_avg_reward)):].mean()
    print("final_smoothed_sum_avg_reward " + _fmt(final))
    return 0


def _cmd_train(args, cfg) -> int:
    return _run_and_write(cfg, run_training, "train")


def _cmd_baseline_q(args, cfg) -> int:
    cfg.learners = [dataclasses.replace(lc, kind="qlearn") for lc in cfg.learners]
    return _run_and_write(cfg, run_training, "baseline-q")


def _cmd_ablate(args, cfg) -> int:
    return _run_and_write(cfg, run_unsafe_ablation, "ablate-unsafe")


def _cmd_export_milp(args, cfg) -> int:
    request = (_parse_bits(args.request, cfg.n_units, "--request")
               if args.request else np.zeros(cfg.n_units, dtype=int))
    big_m = args.big_m if args.big_m is not None else float(max(1000, cfg.horizon))
    fcfg = cfg.filter_config()
    system = big_m_expand(fcfg, big_m, request=request)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "filter_milp.lp"
    path.write_text(system.to_lp_text())
    print(f"wrote {path}")
    print("variables " + str(len(system.variables)))
    print("rows " + str(len(system.rows)))
    return 0


def _cmd_verify(args, cfg) -> int:
    results = verify_mod.run_all(seed=args.check_seed)
    failed = 0
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failed += 0 if ok else 1
    return 1 if failed else 0


_COMMANDS = {
    "dispatch": _cmd_dispatch,
    "filter": _cmd_filter,
    "train": _cmd_train,
    "baseline-q": _cmd_baseline_q,
    "ablate-unsafe": _cmd_ablate,
    "export-milp": _cmd_export_milp,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
    except (ParseError, ValidationError, FileNotFoundError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](args, cfg)
    except (ParseError, ValidationError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except SafebidError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
