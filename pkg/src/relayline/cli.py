"""Command-line front end.

Subcommands cover the library surface: channel-rate evaluation, the
closed-form power split, offline placement, relaying-gain sweeps, the
uniform-placement limit, the deployment MDP, policy replay on a line, the
Monte Carlo offline comparison, and relay-price calibration.

Output goes to stdout or --output (a bare filename lands in
$RELAYLINE_OUT_DIR when set) as CSV (6 significant digits) or JSON; every
JSON document carries a schema_version and echoes the parameters including
the seed.  A JSON config file may supply any long-option defaults
(per-command sections keyed by the command name); explicit flags win.

Exit codes: 0 success, 1 solver non-convergence, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import channel, mdp, placement, simulate

SCHEMA_VERSION = 1

PRESETS = {
    # dense-urban numbers: path loss 0.04/m and mean line lengths of
    # 200 m / 500 m give Lambda = 8 and 20
    "urban-200": {"Lambda": 8.0, "meters_per_unit": 200.0},
    "urban-500": {"Lambda": 20.0, "meters_per_unit": 500.0},
}


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _resolve_output(path: str | None):
    if path is None:
        return None
    if not os.path.dirname(path):
        base = os.environ.get("RELAYLINE_OUT_DIR", "")
        if base:
            path = os.path.join(base, path)
    return path


def _emit_csv(columns, rows, output):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    _write_text(buf.getvalue(), output)


def _emit_json(doc, output):
    _write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", output)


def _write_text(text, output):
    path = _resolve_output(output)
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _json_doc(kind, metadata, data):
    return {"schema_version": SCHEMA_VERSION, "kind": kind, "metadata": metadata, "data": data}


def _parse_floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


def _parse_int_range(text: str) -> list[int]:
    """Accept '1..5' or '1,2,3'."""
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.split(",") if t.strip()]


def _scale(args) -> float:
    """Distance multiplier for --meters output."""
    if not getattr(args, "meters", False):
        return 1.0
    if args.meters_per_unit is None:
        raise ValueError("--meters needs --meters-per-unit or a preset that sets it")
    return args.meters_per_unit


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _layout_from_args(args) -> tuple[channel.NodeLayout, channel.ChannelParams]:
    positions = tuple(_parse_floats(args.positions)) if args.positions else ()
    layout = channel.NodeLayout(length=args.length, positions=positions)
    params = channel.ChannelParams(rho=args.rho, sigma2=args.sigma2, p_total=args.p_total)
    return layout, params


def cmd_rate(args) -> int:
    layout, params = _layout_from_args(args)
    h = channel.attenuation_H(layout, params.rho)
    rate = channel.optimized_rate(layout, params)
    alloc = channel.optimal_allocation(layout, params)
    gains = channel.build_gain_table(layout, params.rho)
    terms = channel.snr_terms(gains, alloc, params.sigma2)
    data = {
        "attenuation_h": h,
        "rate_bits_per_use": rate,
        "relaying_gain": channel.relaying_gain(layout, params.rho) if layout.n_relays else None,
        "snr_terms": terms.tolist(),
        "min_rate_raw": channel.achievable_rate_raw(gains, alloc, params.sigma2),
    }
    meta = {"command": "rate", "rho": params.rho, "sigma2": params.sigma2,
            "p_total": params.p_total, "length": layout.length,
            "positions": list(layout.positions), "seed": None}
    if args.format == "json":
        _emit_json(_json_doc("rate", meta, data), args.output)
    else:
        _emit_csv(
            ["length", "n_relays", "attenuation_h", "rate_bits_per_use"],
            [[layout.length, layout.n_relays, h, rate]],
            args.output,
        )
    return 0


def cmd_allocate(args) -> int:
    layout, params = _layout_from_args(args)
    alloc = channel.optimal_allocation(layout, params)
    n = layout.n_relays
    rows = []
    for j in range(1, n + 2):
        for i in range(0, j):
            rows.append([i, j, alloc.p[i, j]])
    meta = {"command": "allocate", "rho": params.rho, "p_total": params.p_total,
            "length": layout.length, "positions": list(layout.positions), "seed": None}
    if args.format == "json":
        data = {"gamma": alloc.gamma.tolist(), "links": [
            {"i": i, "j": j, "power_mw": p} for i, j, p in rows]}
        _emit_json(_json_doc("allocation", meta, data), args.output)
    else:
        _emit_csv(["from_node", "to_node", "power_mw"], rows, args.output)
    return 0


def cmd_place_offline(args) -> int:
    sol = placement.optimize_placement(
        placement.PlacementProblem(n_relays=args.n, lam=args.lam)
    )
    scale = _scale(args)
    meta = {"command": "place-offline", "n": args.n, "lambda": args.lam, "seed": None}
    if args.format == "json":
        data = {
            "normalized_positions": list(sol.normalized_positions),
            "objective_h": sol.objective,
            "gain": sol.gain,
        }
        _emit_json(_json_doc("placement", meta, data), args.output)
    else:
        rows = [
            [args.lam, args.n, k + 1, w * scale, sol.objective, sol.gain]
            for k, w in enumerate(sol.normalized_positions)
        ]
        _emit_csv(["lambda", "n_relays", "relay", "y_over_L", "h", "gain"], rows, args.output)
    return 0


def cmd_gain_table(args) -> int:
    lams = _parse_floats(args.lam)
    ns = _parse_int_range(args.n)
    rows = []
    for lam in lams:
        for n in ns:
            sol = placement.optimize_placement(placement.PlacementProblem(n, lam))
            rows.append([lam, n, sol.objective, sol.gain])
    meta = {"command": "gain-table", "lambda": lams, "n": ns, "seed": None}
    if args.format == "json":
        data = [{"lambda": r[0], "n": r[1], "h": r[2], "gain": r[3]} for r in rows]
        _emit_json(_json_doc("gain_table", meta, data), args.output)
    else:
        _emit_csv(["lambda", "n_relays", "h", "gain"], rows, args.output)
    return 0


def cmd_uniform_limit(args) -> int:
    ns = _parse_int_range(args.n)
    rows = [[args.lam, n, placement.uniform_rate_factor(n, args.lam)] for n in ns]
    meta = {"command": "uniform-limit", "lambda": args.lam, "n": ns, "seed": None}
    if args.format == "json":
        data = [{"n": r[1], "f": r[2]} for r in rows]
        _emit_json(_json_doc("uniform_limit", meta, data), args.output)
    else:
        _emit_csv(["lambda", "n_relays", "f"], rows, args.output)
    return 0


def _mdp_config(args) -> mdp.MdpConfig:
    return mdp.MdpConfig(
        beta=args.beta,
        rho=args.Lambda * args.beta,
        xi=args.xi,
        state_step=args.state_step,
        action_step=args.action_step,
        action_max=args.action_max,
        vi_tolerance=args.vi_tolerance,
        max_sweeps=args.max_sweeps,
    )


def _load_or_solve(args) -> mdp.MdpSolution:
    if getattr(args, "solution", None):
        with open(args.solution) as fh:
            sol = mdp.MdpSolution.from_dict(json.load(fh))
        return sol
    sol = mdp.solve(_mdp_config(args))
    if not sol.converged:
        raise _NotConverged(sol)
    return sol


class _NotConverged(Exception):
    def __init__(self, sol):
        super().__init__(f"value iteration stopped at residual {sol.residual}")
        self.solution = sol


def cmd_solve_mdp(args) -> int:
    sol = mdp.solve(_mdp_config(args))
    doc = sol.to_dict()
    doc["metadata"] = {"command": "solve-mdp", "Lambda": args.Lambda, "seed": None}
    _emit_json(doc, args.output)
    return 0 if sol.converged else 1


def cmd_deploy(args) -> int:
    sol = _load_or_solve(args)
    trace = simulate.deploy_on_line(sol, args.length)
    scale = _scale(args)
    positions = [p * scale for p in trace.relay_positions] + [trace.line_length * scale]
    meta = {
        "command": "deploy",
        "Lambda": sol.config.attenuation,
        "xi": sol.config.xi,
        "length": args.length,
        "seed": None,
    }
    if args.format == "json":
        data = {
            "line_length": trace.line_length * scale,
            "relay_positions": [p * scale for p in trace.relay_positions],
            "node_positions_with_sink": positions,
            "states": list(trace.states),
            "h_sequential": trace.h_sequential,
            "n_relays": trace.n_relays,
        }
        _emit_json(_json_doc("deployment_trace", meta, data), args.output)
    else:
        rows = [
            ["n_relays", trace.n_relays],
            ["positions", ",".join(_fmt(p) for p in positions)],
            ["states", ",".join(_fmt(s) for s in trace.states)],
            ["h_sequential", _fmt(trace.h_sequential)],
        ]
        _emit_csv(["field", "value"], rows, args.output)
    return 0


def cmd_compare(args) -> int:
    sol = _load_or_solve(args)
    stats = simulate.compare_with_offline(sol, args.samples, args.seed)
    meta = {
        "command": "compare",
        "Lambda": sol.config.attenuation,
        "xi": sol.config.xi,
        "samples": args.samples,
        "seed": args.seed,
    }
    if args.format == "json":
        _emit_json(_json_doc("comparison_stats", meta, stats.to_dict()), args.output)
    else:
        _emit_csv(
            ["xi", "Lambda", "avg_pct_diff", "mean_relays", "zero_relay_count", "max_pct_diff"],
            [[sol.config.xi, sol.config.attenuation, stats.avg_pct_diff,
              stats.mean_relays, stats.zero_relay_count, stats.max_pct_diff]],
            args.output,
        )
    return 0


def cmd_calibrate(args) -> int:
    result = simulate.calibrate_relay_price(
        args.target,
        args.Lambda,
        args.seed,
        sample_count=args.samples,
    )
    meta = {"command": "calibrate", "Lambda": args.Lambda, "target": args.target,
            "seed": args.seed}
    data = {
        "xi_star": result.xi_star,
        "achieved_mean": result.achieved_mean,
        "standard_error": result.standard_error,
        "iterations": result.iterations,
        "degenerate": result.degenerate,
    }
    if args.format == "json":
        _emit_json(_json_doc("calibration", meta, data), args.output)
    else:
        _emit_csv(
            ["Lambda", "target", "xi_star", "achieved_mean", "standard_error"],
            [[args.Lambda, args.target, result.xi_star, result.achieved_mean,
              result.standard_error]],
            args.output,
        )
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(p):
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output", default=None, help="file path; default stdout")
    p.add_argument("--config", default=None, help="JSON file with option defaults")


def _add_channel_args(p):
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--length", type=float, required=True)
    p.add_argument("--positions", default="", help="comma-separated relay distances")
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--p-total", dest="p_total", type=float, default=1.0)


def _add_mdp_args(p):
    p.add_argument("--Lambda", type=float, default=None, help="attenuation rho/beta")
    p.add_argument("--xi", type=float, default=None, help="relay price")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--state-step", dest="state_step", type=float, default=0.01)
    p.add_argument("--action-step", dest="action_step", type=float, default=0.001)
    p.add_argument("--action-max", dest="action_max", type=float, default=None)
    p.add_argument("--vi-tolerance", dest="vi_tolerance", type=float, default=1e-9)
    p.add_argument("--max-sweeps", dest="max_sweeps", type=int, default=100_000)
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--meters", action="store_true",
                   help="report distances in meters via --meters-per-unit")
    p.add_argument("--meters-per-unit", dest="meters_per_unit", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="relayline", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", help="attenuation and optimized rate of a layout")
    _add_channel_args(p)
    _add_common(p)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("allocate", help="closed-form optimal power split")
    _add_channel_args(p)
    _add_common(p)
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("place-offline", help="optimal normalized relay positions")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--meters", action="store_true")
    p.add_argument("--meters-per-unit", dest="meters_per_unit", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_place_offline)

    p = sub.add_parser("gain-table", help="relaying gain over (lambda, N) grid")
    p.add_argument("--lambda", dest="lam", required=True, help="comma-separated values")
    p.add_argument("--n", required=True, help="range like 1..5 or list 1,2,3")
    _add_common(p)
    p.set_defaults(func=cmd_gain_table)

    p = sub.add_parser("uniform-limit", help="attenuation of N uniform relays")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--n", required=True, help="range like 1..100")
    _add_common(p)
    p.set_defaults(func=cmd_uniform_limit)

    p = sub.add_parser("solve-mdp", help="value-iterate the deployment MDP")
    _add_mdp_args(p)
    _add_common(p)
    p.set_defaults(func=cmd_solve_mdp, format="json")

    p = sub.add_parser("deploy", help="replay a policy along a known line")
    _add_mdp_args(p)
    p.add_argument("--length", type=float, required=True)
    p.add_argument("--solution", default=None, help="solve-mdp JSON to reuse")
    _add_common(p)
    p.set_defaults(func=cmd_deploy)

    p = sub.add_parser("compare", help="Monte Carlo sequential-vs-offline gap")
    _add_mdp_args(p)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--solution", default=None, help="solve-mdp JSON to reuse")
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("calibrate", help="relay price for a target mean relay count")
    _add_mdp_args(p)
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_calibrate)

    return ap


def _apply_preset_and_config(ap: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    # first pass to discover --config / --preset, second with defaults injected
    args = ap.parse_args(argv)
    overrides = {}
    preset = getattr(args, "preset", None)
    if preset:
        info = PRESETS[preset]
        overrides["Lambda"] = info["Lambda"]
        overrides["meters_per_unit"] = info["meters_per_unit"]
    if args.config:
        with open(args.config) as fh:
            conf = json.load(fh)
        section = conf.get(args.command, conf)
        for key, val in section.items():
            overrides[key.replace("-", "_")] = val
    if not overrides:
        return args
    ap2 = build_parser()
    for action in ap2._subparsers._group_actions[0].choices.values():  # noqa: SLF001
        known = {a.dest for a in action._actions}  # noqa: SLF001
        action.set_defaults(**{k: v for k, v in overrides.items() if k in known})
    return ap2.parse_args(argv)


def _validate_mdp_invocation(args) -> None:
    if hasattr(args, "Lambda") and getattr(args, "solution", None) is None:
        if args.Lambda is None or args.xi is None:
            raise ValueError("--Lambda and --xi are required (or pass --solution)")


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = _apply_preset_and_config(ap, sys.argv[1:] if argv is None else argv)
        _validate_mdp_invocation(args)
        return args.func(args)
    except _NotConverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
