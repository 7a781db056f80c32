"""Command-line front end.

Every command prints its report to stdout in the format chosen by
``--output`` (``text``, ``machine`` for versioned JSON, or ``csv``).  When an
output directory is configured (``--output-dir`` or the
``ROBUST_PERSUASION_OUTPUT_DIR`` environment variable) the same report is also
written to ``<dir>/<command>-<instance>.<ext>``.

Exit status: 0 on success, 2 for invalid input, 3 for internal-consistency
failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import fixtures
from .core import PersuasionInstance, SignalPolicy, UtilityBox, indirect_values, policy_value
from .curves import emit_indirect_utility_curve
from .errors import InternalConsistencyError, NoAdjustmentError, PersuasionError
from .genericity import genericity_trial
from .geometry import all_regions, region_debug_text, vertices_of
from .instance_file import load_instance
from .robustness import (DEFAULT_WITNESS_DELTA, adjust_into, all_stability_flags, classify,
                         evaluation_from_values, inf_corner_system, induced_actions, loss_bound,
                         search_robust_policy, witness_type_set)
from .solver import solve_optimal

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "ROBUST_PERSUASION_OUTPUT_DIR"
COMMANDS = ("solve", "classify", "regret", "adjust", "generic", "inspect", "example", "curve")

_BUILTIN_BOXES: dict[str, Callable[[float], UtilityBox]] = {
    "example1": fixtures.example1_box,
    "example2": fixtures.example2_box,
}


@dataclass
class RunConfig:
    command: str
    instance: str | None = None
    delta: float | None = None
    samples: int = 0
    seed: int = 0
    tol_tie: float | None = None
    output: str = "text"
    resolution: int = 101
    states: int = 2
    actions: int = 4
    trials: int = 1000
    output_dir: str | None = None


@dataclass
class Report:
    """One command's result in all three renderings."""

    data: dict[str, Any]
    text: str
    header: list[str] = field(default_factory=list)
    rows: list[list[Any]] = field(default_factory=list)

    def render(self, fmt: str) -> str:
        if fmt == "machine":
            return json.dumps({"schema_version": SCHEMA_VERSION, **self.data}, sort_keys=True, indent=2) + "\n"
        if fmt == "csv":
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(self.header)
            for row in self.rows:
                w.writerow([_cell(x) for x in row])
            return buf.getvalue()
        return self.text.rstrip("\n") + "\n"


def _cell(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.9g}"
    return "" if x is None else str(x)


def _num(x: float) -> float:
    return float(x)


def _vec(a: np.ndarray) -> list:
    return [float(x) for x in np.asarray(a)]


def _fmt(a: np.ndarray) -> str:
    return "(" + ", ".join(f"{float(x):.9g}" for x in np.asarray(a)) + ")"


# -- instance resolution ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class _Resolved:
    name: str
    instance: PersuasionInstance
    file_box: UtilityBox | None
    builtin: bool


def _resolve(spec: str, tol_tie: float | None) -> _Resolved:
    if spec in fixtures.BUILTIN:
        inst, box, builtin, name = fixtures.BUILTIN[spec](), None, True, spec
    else:
        loaded = load_instance(spec)
        inst, box, builtin, name = loaded.instance, loaded.box, False, Path(spec).stem
    if tol_tie is not None:
        inst = inst.with_tolerances(inst.tol.replace(tie=tol_tie))
        if box is not None:
            box = UtilityBox(inst, box.lo, box.hi, box.clipped)
    return _Resolved(name, inst, box, builtin)


def _box(res: _Resolved, delta: float | None) -> UtilityBox:
    """Box for robustness questions: built-in fixture box, then file box, then uniform."""
    if res.builtin:
        box = _BUILTIN_BOXES[res.name](DEFAULT_WITNESS_DELTA if delta is None else delta)
        return UtilityBox(res.instance, box.lo, box.hi, box.clipped)
    if delta is None:
        if res.file_box is not None:
            return res.file_box
        delta = DEFAULT_WITNESS_DELTA
    return UtilityBox.uniform(res.instance, delta, clip=False)


# -- renderers --------------------------------------------------------------


def _policy_data(inst: PersuasionInstance, pol: SignalPolicy) -> list[dict[str, Any]]:
    values, acts = indirect_values(inst.reference, pol.posteriors)
    return [{"weight": _num(w), "posterior": _vec(mu), "action": inst.action_labels[a], "sender_value": _num(v)}
            for w, mu, a, v in zip(pol.weights, pol.posteriors, acts, values)]


def _policy_text(inst: PersuasionInstance, pol: SignalPolicy, indent: str = "  ") -> list[str]:
    return [f"{indent}weight {d['weight']:.9g} -> posterior {_fmt(d['posterior'])} "
            f"[{d['action']}, sender value {d['sender_value']:.9g}]" for d in _policy_data(inst, pol)]


def _policy_rows(inst: PersuasionInstance, pol: SignalPolicy, prefix: list[Any]) -> list[list[Any]]:
    return [prefix + [i, d["weight"], *d["posterior"], d["action"], d["sender_value"]]
            for i, d in enumerate(_policy_data(inst, pol))]


def _policy_header(inst: PersuasionInstance) -> list[str]:
    return ["support", "weight", *[f"mu_{s}" for s in inst.state_labels], "action", "sender_value"]


def cmd_solve(res: _Resolved, cfg: RunConfig) -> Report:
    inst = res.instance
    sol = solve_optimal(inst)
    data = {"command": "solve", "instance": res.name, "value": _num(sol.value),
            "policy": _policy_data(inst, sol.policy),
            "basic_optima": [_policy_data(inst, p) for p in sol.all_basic_optima]}
    lines = [f"instance: {res.name}", f"optimal value: {sol.value:.9g}", "optimal basic policy:"]
    lines += _policy_text(inst, sol.policy)
    lines.append(f"basic optimal policies: {len(sol.all_basic_optima)}")
    rows = []
    for k, pol in enumerate(sol.all_basic_optima):
        rows += _policy_rows(inst, pol, [k, sol.value])
    return Report(data, "\n".join(lines), ["optimum", "value", *_policy_header(inst)], rows)


def cmd_classify(res: _Resolved, cfg: RunConfig) -> Report:
    inst = res.instance
    rep = classify(inst, _box(res, cfg.delta))
    fragile = [{"posterior": _vec(mu), "inferior_action": inst.action_labels[b]} for mu, b in rep.fragile_posteriors]
    data = {"command": "classify", "instance": res.name, "verdict": rep.verdict.value,
            "gap_constant": _num(rep.gap_constant), "optimal_value": _num(rep.optimal_value),
            "pseudo_value": _num(rep.pseudo_value),
            "witness_gap": None if rep.witness_gap is None else _num(rep.witness_gap),
            "fragile_posteriors": fragile, "witness_policy": _policy_data(inst, rep.witness_policy),
            "witness_type": None if rep.witness_type is None else [_vec(r) for r in rep.witness_type.receiver_u],
            "basic_only": rep.basic_only}
    lines = [f"instance: {res.name}", f"verdict: {rep.verdict.value}",
             f"optimal value: {rep.optimal_value:.9g}", f"pseudo-type value: {rep.pseudo_value:.9g}",
             f"gap_constant: {rep.gap_constant:.9g}", "witness policy:"]
    lines += _policy_text(inst, rep.witness_policy)
    for f in fragile:
        lines.append(f"fragile posterior {_fmt(f['posterior'])} with inferior reply {f['inferior_action']}")
    if rep.witness_type is not None:
        lines.append(f"witness type gap: {rep.witness_gap:.9g}")
        for label, row in zip(inst.action_labels, rep.witness_type.receiver_u):
            lines.append(f"  u'({label}) = {_fmt(row)}")
    lines.append("note: only basic optimal policies are checked")
    rows = [[rep.verdict.value, rep.gap_constant, *f["posterior"], f["inferior_action"]] for f in fragile]
    if not rows:
        rows = [[rep.verdict.value, rep.gap_constant] + [None] * (inst.n_states + 1)]
    header = ["verdict", "gap_constant", *[f"mu_{s}" for s in inst.state_labels], "inferior_action"]
    return Report(data, "\n".join(lines), header, rows)


def cmd_regret(res: _Resolved, cfg: RunConfig) -> Report:
    inst = res.instance
    box = _box(res, cfg.delta)
    data: dict[str, Any] = {"command": "regret", "instance": res.name, "samples": cfg.samples, "seed": cfg.seed,
                            "delta": cfg.delta if cfg.delta is not None else DEFAULT_WITNESS_DELTA}
    lines = [f"instance: {res.name}", f"box widths: max {float(box.widths.max()):.9g}",
             "scores are bounds over the witness types (upper for regret, lower for max-min)"]
    rows: list[list[Any]] = []
    for crit in ("minregret", "maxmin"):
        out = search_robust_policy(inst, box, crit, cfg.samples, cfg.seed)
        data[crit] = {"score": _num(out.score), "regret": _num(out.evaluation.regret),
                      "min_utility": _num(out.evaluation.min_utility), "candidates": out.candidates,
                      "types": len(out.evaluation.per_type), "policy": _policy_data(inst, out.policy)}
        lines.append(f"{crit}: score {out.score:.9g} over {len(out.evaluation.per_type)} types "
                     f"({out.candidates} candidates)")
        lines += _policy_text(inst, out.policy, "    ")
        rows += _policy_rows(inst, out.policy, [crit, out.score])
    return Report(data, "\n".join(lines), ["criterion", "score", *_policy_header(inst)], rows)


def cmd_adjust(res: _Resolved, cfg: RunConfig) -> Report:
    """Move the reference optimum into the regions that every box type agrees on."""
    inst = res.instance
    box = _box(res, cfg.delta)
    sol = solve_optimal(inst)
    acts = induced_actions(inst.reference, sol.policy)
    for a in acts:
        if len(vertices_of(inf_corner_system(box, a), inst.tol)) == 0:
            raise NoAdjustmentError(f"action {inst.action_labels[a]} is not a best reply anywhere once the box "
                                    "lowers it and raises its rivals; no adjustment exists")
    adj = adjust_into(sol.policy, [inf_corner_system(box, a) for a in acts], inst.prior, inst.tol)
    types = witness_type_set(inst, box, cfg.samples, cfg.seed)
    ev = evaluation_from_values(types, [solve_optimal(t).value for t in types], [policy_value(t, adj.policy) for t in types])
    bound = 2 * loss_bound(adj.gamma, inst.prior)
    data = {"command": "adjust", "instance": res.name, "source_policy": _policy_data(inst, sol.policy),
            "adjusted_policy": _policy_data(inst, adj.policy), "gamma": _num(adj.gamma),
            "shift_norm": _num(adj.shift_norm), "correction_weight": _num(adj.correction_weight),
            "loss_bound": _num(loss_bound(adj.gamma, inst.prior)), "regret_bound": _num(bound),
            "regret": _num(ev.regret), "min_utility": _num(ev.min_utility)}
    lines = [f"instance: {res.name}", "reference optimum:", *_policy_text(inst, sol.policy),
             "adjusted into the inf-corner regions:", *_policy_text(inst, adj.policy),
             f"gamma: {adj.gamma:.9g}", f"correction weight: {adj.correction_weight:.9g}",
             f"regret over witness types: {ev.regret:.9g} (bound 2*D(gamma) = {bound:.9g})",
             f"min utility over witness types: {ev.min_utility:.9g}"]
    rows = _policy_rows(inst, adj.policy, [adj.gamma, ev.regret])
    return Report(data, "\n".join(lines), ["gamma", "regret", *_policy_header(inst)], rows)


def cmd_inspect(res: _Resolved, cfg: RunConfig) -> Report:
    inst = res.instance
    flags = all_stability_flags(inst)
    regions = all_regions(inst)
    data = {"command": "inspect", "instance": res.name, "regions": [
        {"action": inst.action_labels[f.action], "dim": f.dim, "nonempty": f.nonempty, "u1": f.u1, "u2": f.u2,
         "duplicates": [inst.action_labels[b] for b in f.duplicates],
         "vertices": [_vec(v) for v in r.vertices]} for f, r in zip(flags, regions)]}
    blocks = [f"instance: {res.name}"]
    for f, r in zip(flags, regions):
        blocks.append(region_debug_text(r, inst.action_labels))
        blocks.append(f"  flags: nonempty={f.nonempty} u1={f.u1} u2={f.u2} "
                      f"duplicates={[inst.action_labels[b] for b in f.duplicates]}")
    rows = [[inst.action_labels[f.action], f.dim, f.nonempty, f.u1, f.u2, len(r.vertices)]
            for f, r in zip(flags, regions)]
    return Report(data, "\n".join(blocks), ["action", "dim", "nonempty", "u1", "u2", "vertices"], rows)


def cmd_curve(res: _Resolved, cfg: RunConfig) -> Report:
    inst = res.instance
    rows = emit_indirect_utility_curve(inst, cfg.resolution)
    data = {"command": "curve", "instance": res.name, "resolution": cfg.resolution,
            "rows": [{"p": r.p, "value": r.value, "action": inst.action_labels[r.action],
                      "breakpoint": r.breakpoint} for r in rows]}
    text = ["p            value        action  breakpoint"]
    text += [f"{r.p:<12.9g} {r.value:<12.9g} {inst.action_labels[r.action]:<7} {'yes' if r.breakpoint else ''}"
             for r in rows]
    table = [[r.p, r.value, inst.action_labels[r.action], r.breakpoint] for r in rows]
    return Report(data, "\n".join(text), ["p", "value", "action", "breakpoint"], table)


def cmd_example(res: _Resolved, cfg: RunConfig) -> Report:
    parts = [cmd_solve(res, cfg), cmd_classify(res, cfg), cmd_regret(res, cfg)]
    data = {"command": "example", "instance": res.name,
            "solve": parts[0].data, "classify": parts[1].data, "regret": parts[2].data}
    text = "\n\n".join(p.text for p in parts)
    rows = [["solve", "value", parts[0].data["value"]],
            ["classify", "verdict", parts[1].data["verdict"]],
            ["classify", "gap_constant", parts[1].data["gap_constant"]],
            ["regret", "minregret", parts[2].data["minregret"]["score"]],
            ["regret", "maxmin", parts[2].data["maxmin"]["score"]]]
    return Report(data, text, ["section", "quantity", "value"], rows)


def cmd_generic(cfg: RunConfig) -> Report:
    out = genericity_trial(cfg.states, cfg.actions, cfg.trials, cfg.seed)
    data = {"command": "generic", "n_states": out.n_states, "n_actions": out.n_actions, "trials": out.trials,
            "seed": out.seed, "pass_stability": out.pass_stability, "pass_lrs": out.pass_lrs,
            "pass_classifier": out.pass_classifier, "mismatches": out.mismatches, "prior_floor": out.prior_floor}
    rows = [[r.index, r.stability, r.lrs, r.robust, r.failing_action] for r in out.records]
    return Report(data, out.summary(), ["trial", "stability", "lrs", "robust", "failing_action"], rows)


_HANDLERS = {"solve": cmd_solve, "classify": cmd_classify, "regret": cmd_regret, "adjust": cmd_adjust,
             "inspect": cmd_inspect, "curve": cmd_curve, "example": cmd_example}


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute one command; returns the process exit status."""
    stdout = stdout or sys.stdout
    try:
        if cfg.command == "generic":
            report, name = cmd_generic(cfg), f"N{cfg.states}-M{cfg.actions}"
        else:
            if cfg.instance is None:
                raise PersuasionError("an instance path or built-in name is required")
            if cfg.command == "example" and cfg.instance not in fixtures.BUILTIN:
                raise PersuasionError(f"unknown example {cfg.instance!r}; choose from {sorted(fixtures.BUILTIN)}")
            res = _resolve(cfg.instance, cfg.tol_tie)
            report, name = _HANDLERS[cfg.command](res, cfg), res.name
        text = report.render(cfg.output)
    except InternalConsistencyError as exc:
        print(f"internal consistency error: {exc}", file=sys.stderr)
        return 3
    except (PersuasionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    stdout.write(text)
    out_dir = cfg.output_dir or os.environ.get(OUTPUT_DIR_ENV)
    if out_dir:
        ext = {"machine": "json", "csv": "csv"}.get(cfg.output, "txt")
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / f"{cfg.command}-{name}.{ext}").write_text(text, encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robust-persuasion",
                                description="Solve and audit finite Bayesian persuasion instances.")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", choices=("text", "machine", "csv"), default="text")
    common.add_argument("--output-dir", default=None,
                        help=f"also write the report here (default: ${OUTPUT_DIR_ENV} if set)")
    common.add_argument("--tol-tie", type=float, default=None, help="tie tolerance for best replies")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--samples", type=int, default=0, help="random box types added to the witness set")
    common.add_argument("--delta", type=float, default=None, help="box width (defaults to 0.1)")
    common.add_argument("-v", "--verbose", action="store_true")
    helps = {"solve": "optimal value and basic optimal policies",
             "classify": "continuity/robustness verdict with witnesses",
             "regret": "min-regret and max-min policy search over the box",
             "adjust": "adjust the reference optimum into the inf-corner regions",
             "inspect": "dump best-reply regions and stability flags",
             "example": "reproduce a built-in example (example1 or example2)",
             "curve": "indirect utility curve for two-state instances"}
    for name, text in helps.items():
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("instance", help="instance file or built-in name (example1, example2)")
        if name == "curve":
            sp.add_argument("--resolution", type=int, default=101)
    g = sub.add_parser("generic", parents=[common], help="Monte Carlo genericity harness")
    g.add_argument("--states", type=int, default=2)
    g.add_argument("--actions", type=int, default=4)
    g.add_argument("--trials", type=int, default=1000)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = RunConfig(command=args.command, instance=getattr(args, "instance", None), delta=args.delta,
                    samples=args.samples, seed=args.seed, tol_tie=args.tol_tie, output=args.output,
                    resolution=getattr(args, "resolution", 101), states=getattr(args, "states", 2),
                    actions=getattr(args, "actions", 4), trials=getattr(args, "trials", 1000),
                    output_dir=args.output_dir)
    return run(cfg)
