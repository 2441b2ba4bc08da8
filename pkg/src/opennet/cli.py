"""Command line interface: ``opennet <command> <spec> [options]``.

Exit codes: 0 success or verdict true, 1 verdict false, 2 syntax or usage
error, 3 dangling reference, 4 dimension mismatch, 5 other invalid input
(including a failed theorem hypothesis).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Any

import numpy as np

from . import __version__
from . import exprlang as el
from . import graph as gr
from . import linrel as lr
from . import network as nw
from . import sim
from .opensys import RelatednessReport
from .spaces import sample_evaluate
from .specfile import (
    COMMANDS, EXIT_FALSE, EXIT_INVALID, EXIT_OK, EXIT_SYNTAX, SpecError, SpecFile, load,
)

__all__ = ["main", "run_command", "build_parser"]


def _clean(x: Any) -> Any:
    """Make a value JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def _expr_list(exprs) -> list[str]:
    return [el.to_str(e) for e in exprs]


def _needs(spec: SpecFile, cmd: str) -> dict:
    if cmd not in spec.run:
        raise SpecError(f"no run section for command {cmd!r}", f"$.run.{cmd}", spec.path)
    return spec.run[cmd]


# ---------------------------------------------------------------------------
# commands: each returns (result dict, verdict or None, human lines)

def cmd_validate(spec: SpecFile):
    s = spec.summary()
    lines = [f"spec is valid: {len(spec.networks)} networks, {len(spec.systems)} systems, "
             f"{len(spec.network_maps)} network maps"]
    for k, v in s["networks"].items():
        lines.append(f"  network {k}: {v['nodes']} nodes, carrier dim {v['carrier_state_dim']}"
                     f" (+{v['carrier_input_dim']} inputs)")
    return s, None, lines


def cmd_compose(spec: SpecFile):
    r = _needs(spec, "compose")
    F = r["ref"].system
    coords = F.on.total_coords
    result = {
        "system": r["ref"].label,
        "coordinates": list(coords),
        "state": list(F.on.state_coords),
        "field": F.field_strings(),
    }
    lines = [f"{r['ref'].label} on {list(coords)}:"]
    lines += [f"  d{c}/dt = {s}" for c, s in zip(F.on.state_coords, result["field"])]
    verdict = None
    if "expect" in r:
        p = spec.parameters
        expect = el.compile_vector(r["expect"], coords)

        def residual(q):
            a = np.asarray(F(q))
            b = np.asarray(expect(q))
            return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b)), initial=0.0))

        worst, n, skipped = 0.0, 0, 0
        for _, v in sample_evaluate(residual, len(coords), p["samples"], p["seed"]):
            if isinstance(v, Exception):
                skipped += 1
                continue
            n += 1
            worst = max(worst, v) if not math.isnan(v) else math.inf
        verdict = worst <= p["tol"]
        result["expect"] = {"max_relative_residual": worst, "samples": n, "skipped": skipped,
                            "verdict": verdict}
        lines.append(f"matches expected field: {verdict} (max relative residual {worst:.3g} over {n} samples)")
    return result, verdict, lines


def _failure_lines(failures) -> list[str]:
    out = []
    for f in failures:
        parts = []
        if f["unlifted_edges"]:
            parts.append(f"edges {f['unlifted_edges']} of the target have no lift")
        if f["multiply_lifted_edges"]:
            parts.append(f"edges {f['multiply_lifted_edges']} are lifted more than once")
        out.append(f"  vertex {f['vertex']} (image {f['image']}): " + "; ".join(parts))
    return out


def cmd_check_fibration(spec: SpecFile):
    r = _needs(spec, "check-fibration")
    results, lines, ok = {}, [], True
    for name in r["graph_maps"]:
        gm, g, h = spec.graph_maps[name]
        failures = gr.fibration_failures(gm, spec.graphs[g], spec.graphs[h])
        fib = not failures
        ok = ok and fib
        results[name] = {"source": g, "target": h, "is_fibration": fib, "failures": failures}
        lines.append(f"{name}: {g} -> {h} is {'a fibration' if fib else 'NOT a fibration'}")
        lines += _failure_lines(failures)
    return {"graph_maps": results}, ok, lines


def cmd_enum_fibrations(spec: SpecFile):
    r = _needs(spec, "enum-fibrations")
    g, h = spec.graphs[r["source"]], spec.graphs[r["target"]]
    fibs = gr.enumerate_fibrations(g, h)
    result = {"source": r["source"], "target": r["target"], "count": len(fibs),
              "fibrations": [{"vertices": list(m.vertex_map), "edges": list(m.edge_map)} for m in fibs]}
    lines = [f"{len(fibs)} fibrations {r['source']} -> {r['target']}"]
    lines += [f"  vertices {list(m.vertex_map)} edges {list(m.edge_map)}" for m in fibs]
    return result, None, lines


def cmd_from_graph(spec: SpecFile):
    r = _needs(spec, "from-graph")
    result, lines = {}, []
    for name in r["manifold_networks"]:
        net = nw.from_graph(spec.manifold_networks[name], name=name)
        nodes = [{"state": list(n.state_coords), "input": list(n.input_coords)} for n in net.nodes]
        result[name] = {
            "nodes": nodes,
            "carrier": list(net.carrier.state_coords),
            "wiring": _expr_list(net.wiring.tot),
            "wiring_target": list(net.wiring.target.total_coords),
        }
        lines.append(f"{name}: {len(nodes)} nodes, carrier {list(net.carrier.state_coords)}")
        for a, n in enumerate(nodes):
            lines.append(f"  node {a}: state {n['state']} inputs {n['input']}")
        lines.append("  wiring: (" + ", ".join(result[name]["wiring"]) + ")")
    return result, None, lines


def _report_lines(rep: RelatednessReport, indent: str = "") -> list[str]:
    out = [f"{indent}{rep.label or 'check'}: verdict {rep.verdict}, max residual {rep.max_residual:.3g} "
           f"({rep.samples} samples, {rep.skipped} skipped, tol {rep.tol:g})"]
    for c in rep.components:
        out += _report_lines(c, indent + "  ")
    return out


def cmd_verify_map(spec: SpecFile):
    r = _needs(spec, "verify-map")
    m = spec.network_maps[r["map"]]
    p = spec.parameters
    rep = nw.verify_theorem(m, r["G"], r["F"], samples=p["samples"], tol=p["tol"], seed=p["seed"])
    result = {
        "map": r["map"],
        "two_cell_residual": m.two_cell_residual,
        "source_field": nw.compose(m.source, r["G"]).field_strings(),
        "target_field": nw.compose(m.target, r["F"]).field_strings(),
        "report": rep.to_dict(),
    }
    lines = [f"map {r['map']}: 2-cell residual {m.two_cell_residual:.3g}"]
    lines += _report_lines(rep)
    return result, rep.verdict, lines


def cmd_simulate(spec: SpecFile):
    r = _needs(spec, "simulate")
    p = spec.parameters
    F = r["ref"].system
    traj = sim.integrate(F, r["x0"], p["t1"], p["dt"])
    result: dict[str, Any] = {
        "system": r["ref"].label,
        "x0": r["x0"],
        "steps": len(traj) - 1,
        "final": traj.final,
        "monitors": {},
    }
    lines = [f"integrated {r['ref'].label} from {r['x0']} to t={p['t1']:g} ({len(traj) - 1} RK4 steps)",
             f"  final state {[float(x) for x in traj.final]}"]
    ok = True
    for name, mon in r["monitors"]:
        v = sim.monitor_invariance(traj, mon)
        good = v <= mon.tol
        ok = ok and good
        result["monitors"][name] = {"max_violation": v, "tol": mon.tol, "ok": good}
        lines.append(f"  monitor {name}: max violation {v:.3g} (tol {mon.tol:g}) {'ok' if good else 'VIOLATED'}")
    if r["push"] is not None:
        pu = r["push"]
        base = sim.integrate(pu["ref"].system, pu["x0"], p["t1"], p["dt"])
        pushed = sim.push_trajectory(pu["f"], base)
        dev = sim.max_deviation(pushed, traj)
        good = dev <= pu["tol"]
        ok = ok and good
        result["push"] = {"map": pu["map"], "system": pu["ref"].label, "x0": pu["x0"],
                          "max_deviation": dev, "tol": pu["tol"], "ok": good}
        lines.append(f"  pushed {pu['ref'].label} along {pu['map']}: max deviation {dev:.3g} "
                     f"(tol {pu['tol']:g}) {'ok' if good else 'MISMATCH'}")
    if r["csv"]:
        traj.to_csv(r["csv"])
        result["csv"] = r["csv"]
        lines.append(f"  trajectory written to {r['csv']}")
    verdict = ok if (r["monitors"] or r["push"] is not None) else None
    return result, verdict, lines


def _rel_dict(R: lr.LinRelation) -> dict:
    return {"dim_w": R.dim_w, "dim_v": R.dim_v, "dim": R.dim,
            "basis": np.round(R.basis, 12).T.tolist()}


def cmd_linrel(spec: SpecFile):
    r = _needs(spec, "linrel")
    out_ops, lines, ok = [], [], True
    for i, op in enumerate(r["ops"]):
        kind, res = op["kind"], op["result"]
        entry: dict[str, Any] = {"op": kind, "args": op["args"]}
        if op["let"] is not None:
            entry["let"] = op["let"]
        if kind in ("contains", "equal"):
            a, b = res
            val = lr.contains(a, b) if kind == "contains" else lr.equal(a, b)
            entry.update(value=val, dims=[a.dim, b.dim])
            text = f"ops[{i}] {kind}({op['args'][0]}, {op['args'][1]}) = {val} (dims {a.dim}, {b.dim})"
            if op["expect"] is not None:
                good = val == bool(op["expect"])
                entry["expect"] = bool(op["expect"])
                entry["ok"] = good
                ok = ok and good
                text += f", expected {bool(op['expect'])}: {'ok' if good else 'MISMATCH'}"
            lines.append(text)
        else:
            entry["relation"] = _rel_dict(res)
            label = op["let"] or kind
            lines.append(f"ops[{i}] {label} = {kind}({op['args']}) : R^{res.dim_v} -|-> R^{res.dim_w}, dim {res.dim}")
        out_ops.append(entry)
    return {"ops": out_ops}, ok, lines


HANDLERS = {
    "validate": cmd_validate,
    "compose": cmd_compose,
    "check-fibration": cmd_check_fibration,
    "enum-fibrations": cmd_enum_fibrations,
    "from-graph": cmd_from_graph,
    "verify-map": cmd_verify_map,
    "simulate": cmd_simulate,
    "linrel": cmd_linrel,
}


def run_command(command: str, spec: SpecFile) -> tuple[dict, int, list[str]]:
    """Run `command` on a loaded spec; returns (report, exit code, human lines)."""
    handler = HANDLERS[command]
    try:
        result, verdict, lines = handler(spec)
    except nw.HypothesisFailure as exc:
        raise SpecError(f"theorem hypothesis fails: {exc}", f"$.run.{command}", spec.path) from exc
    except (sim.IntegrationError, el.EvalError) as exc:
        raise SpecError(str(exc), f"$.run.{command}", spec.path) from exc
    report = {
        "tool": "opennet",
        "version": __version__,
        "command": command,
        "spec": spec.path,
        "parameters": dict(spec.parameters),
        "result": result,
        "verdict": verdict,
    }
    code = EXIT_FALSE if verdict is False else EXIT_OK
    return _clean(report), code, lines


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="opennet", description="Compose and verify networks of open systems.")
    ap.add_argument("--version", action="version", version=f"opennet {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("spec", help="path to a JSON spec file")
    ap.add_argument("--samples", type=int, help="sample points per relatedness check")
    ap.add_argument("--tol", type=float, help="absolute tolerance for relatedness checks")
    ap.add_argument("--dt", type=float, help="RK4 step")
    ap.add_argument("--t1", type=float, help="final time")
    ap.add_argument("--seed", type=int, help="seed for sample points")
    ap.add_argument("--out", metavar="PATH", help="also write the JSON report to PATH")
    ap.add_argument("--json", action="store_true", help="print the JSON report instead of text")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_SYNTAX if exc.code not in (0, None) else EXIT_OK
    overrides = {k: getattr(args, k) for k in ("samples", "tol", "dt", "t1", "seed")}
    try:
        spec = load(args.spec, overrides)
        report, code, lines = run_command(args.command, spec)
    except SpecError as exc:
        print(f"opennet: error: {exc}", file=sys.stderr)
        return exc.code
    text = dumps_report(report)
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"opennet: error: cannot write {args.out}: {exc.strerror}", file=sys.stderr)
            return EXIT_INVALID
    if args.json:
        sys.stdout.write(text)
    else:
        print("\n".join(lines))
        if report["verdict"] is not None:
            print(f"verdict: {'true' if report['verdict'] else 'false'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
