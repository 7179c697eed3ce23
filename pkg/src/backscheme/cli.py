"""Command line front end.

Subcommands map onto the library layers: `analyze` runs the backwards
scheme and every structural report, `loynes` runs the monotone envelope
machinery, `bounds` prints the window quantities and cardinal ceilings,
`cftp` draws perfect samples, `validate` only parses and builds.  Reports
go to stdout as JSON (exact decimals or fractions rendered as strings) or
as an indented text table; errors are JSON objects with a machine-readable
reason and a distinct exit code per failure class.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Any

from .backwards import (
    BackwardsRun,
    backwards_run,
    extension_measure,
    invariant_sets,
    period_permutation,
    stationary_solutions,
    verify_structure,
)
from .cftp import cftp_estimate
from .config import AbstractJob, CftpJob, ConfigError, Job, QueueJob, load_job
from .core import ModelError, RandomSet, format_exact
from .monotone import dominates, loynes_solve, order_checks
from .queueing import (
    ImpatienceModel,
    ImpatienceParams,
    LossModel,
    comparison_maps,
    index_scheme_compare,
    lower_envelope,
    upper_envelope,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MODEL = 3
EXIT_UNSTABLE = 4


class _Unstable(Exception):
    def __init__(self, payload: dict):
        super().__init__(payload.get("reason", "not stabilized"))
        self.payload = payload


def _fr(value: Fraction) -> str:
    return format_exact(value)


def _label_values(data: dict[str, Any]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for label, value in data.items():
        if isinstance(value, Fraction):
            out[label] = _fr(value)
        elif isinstance(value, tuple):
            out[label] = [_fr(v) if isinstance(v, Fraction) else v for v in value]
        else:
            out[label] = value
    return out


def _require_stabilized(run: BackwardsRun) -> None:
    if not run.stabilized:
        raise _Unstable(
            {
                "error": "not-stabilized",
                "reason": (
                    f"the set family did not repeat within {run.max_sweeps} sweeps; "
                    "raise max_sweeps or check the model"
                ),
                "max_sweeps": run.max_sweeps,
            }
        )


def _backwards_sections(run: BackwardsRun) -> dict:
    _require_stabilized(run)
    system = run.system
    labels = system.labels
    structure = verify_structure(run)
    measure = extension_measure(run)
    perm = period_permutation(run)
    families = invariant_sets(perm)
    solutions = stationary_solutions(run)

    history = []
    for sweep in range(1, len(run.history) + 1):
        history.append(
            {label: [_fr(v) for v in run.history_values(sweep, label)] for label in labels}
        )

    mapping = perm.mapping_values()
    family_list: list[dict[str, list[str]]] | None = None
    if families.families is not None:
        family_list = [
            {label: [_fr(v) for v in values] for label, values in family.items()}
            for family in families.families
        ]
    return {
        "start_sets": {
            label: [_fr(v) for v in run.start_sets.values(label)] for label in labels
        },
        "sweeps": {
            "settled_after": run.settle_index,
            "max_sweeps": run.max_sweeps,
            "history": history,
        },
        "limit": {
            "sets": {label: [_fr(v) for v in run.limit_values(label)] for label in labels},
            "cardinal": structure.cardinal,
            "bijective": structure.bijective,
        },
        "extension": {
            "atom_weight": _fr(measure.atom_weight),
            "atoms": [[label, _fr(value)] for label, value in measure.atoms],
            "shift_invariant": measure.shift_invariant,
            "uniform_marginal": measure.marginal_uniform,
        },
        "period_permutation": {
            "base": perm.base_label,
            "mapping": [[_fr(x), _fr(y)] for x, y in sorted(mapping.items())],
            "cycles": [[_fr(v) for v in cycle] for cycle in perm.cycles_values()],
        },
        "invariant_families": {
            "ergodic": families.ergodic,
            "cycle_lengths": list(families.cycle_lengths),
            "count": None if families.truncated else (2 ** len(families.cycle_lengths)) - 1,
            "families": family_list,
            "truncated": families.truncated,
        },
        "solutions": [
            {label: _fr(value) for label, value in selection.items()}
            for selection in solutions
        ],
    }


def _lattice_section(lattice) -> dict:
    return {"step": _fr(lattice.step), "bound": _fr(lattice.bound), "size": lattice.size}


def _loss_report(model: LossModel) -> dict:
    report = model.report
    return {
        "step": _fr(report.step),
        "in_service_candidates": {k: list(v) for k, v in report.in_service_candidates.items()},
        "candidate_horizon": dict(report.candidate_horizon),
        "shared_horizon": report.shared_horizon,
        "residual_workloads": _label_values(report.residual_workloads),
    }


def _impatience_report(model: ImpatienceModel) -> dict:
    report = model.report
    bounds = report.bounds
    return {
        "step": _fr(report.step),
        "lower_envelope": _label_values(report.lower_envelope),
        "upper_envelope": _label_values(report.upper_envelope),
        "waiting_candidates": {k: list(v) for k, v in report.waiting_candidates.items()},
        "last_waiting": dict(report.last_waiting),
        "expiry_count": dict(report.expiry_count),
        "service_candidates": {k: list(v) for k, v in report.service_candidates.items()},
        "service_reach": dict(report.service_reach),
        "reach_floor": report.reach_floor,
        "waiting_floor": report.waiting_floor,
        "service_steps_min": report.service_steps_min,
        "service_steps_max": report.service_steps_max,
        "patience_steps_max": report.patience_steps_max,
        "workload_ceiling": _label_values(report.workload_ceiling),
        "bounds": {
            "window_peak": bounds.window_peak,
            "window_service_sum": bounds.window_service_sum,
            "peak_plus_tail": bounds.peak_plus_tail,
            "peak_plus_tail_fallback": bounds.peak_plus_tail_fallback,
            "best": bounds.best,
            "time_units": bounds.time_units,
            "step_counts": bounds.step_counts,
            "load_based": bounds.load_based,
        },
        "load_check": {
            "mean_patience": _fr(report.load_check.mean_patience),
            "mean_drain": _fr(report.load_check.mean_drain),
            "strictly_greater": report.load_check.strictly_greater,
        },
    }


def _index_section(model: LossModel, max_sweeps: int | None) -> dict:
    scheme = index_scheme_compare(model, max_sweeps)
    labels = model.system.labels
    return {
        "index_bound": scheme.index_lattice.size - 1,
        "index_sets": {
            label: sorted(int(scheme.index_lattice.value(i)) for i in scheme.index_run.limit[s])
            for s, label in enumerate(labels)
        },
        "projection": {
            label: {str(i): _fr(v) for i, v in sorted(scheme.projection[label].items())}
            for label in labels
        },
        "surjective": dict(scheme.surjective),
        "all_surjective": scheme.all_surjective,
    }


def _cmd_analyze(job: Job, args: argparse.Namespace) -> dict:
    if isinstance(job, CftpJob):
        raise ConfigError("analyze does not run cftp configs; use the cftp subcommand")
    max_sweeps = args.max_sweeps if args.max_sweeps is not None else job.max_sweeps
    if isinstance(job, AbstractJob):
        run = backwards_run(job.map, job.start_sets, max_sweeps)
        report = {
            "model": "abstract",
            "samples": list(job.system.labels),
            "lattice": _lattice_section(job.map.lattice),
        }
        report.update(_backwards_sections(run))
        return report

    model = job.model
    run = model.run(max_sweeps)
    report = {
        "model": job.kind,
        "samples": list(job.system.labels),
        "lattice": _lattice_section(model.lattice),
    }
    report.update(_backwards_sections(run))
    if isinstance(model, ImpatienceModel):
        report["queue_report"] = _impatience_report(model)
    else:
        report["queue_report"] = _loss_report(model)
        report["index_scheme"] = _index_section(model, max_sweeps)
    return report


def _as_impatience(job: QueueJob) -> tuple[ImpatienceParams, QueueJob]:
    model = job.model
    if isinstance(model, ImpatienceModel):
        return model.params, job
    params = model.params
    zeros = tuple(Fraction(0) for _ in params.service)
    return ImpatienceParams(params.service, params.interarrival, zeros), job


def _cmd_loynes(job: Job, args: argparse.Namespace) -> dict:
    if not isinstance(job, QueueJob):
        raise ConfigError("loynes needs a loss or impatience config")
    params, _ = _as_impatience(job)
    system = job.system
    trio = comparison_maps(system, params)
    lower_closed = lower_envelope(system, params)
    upper_closed = upper_envelope(system, params)
    lower_solve = loynes_solve(trio.lower)
    upper_solve = loynes_solve(trio.upper)

    zeros = [Fraction(0)] * system.period
    lower_sets = RandomSet.intervals(
        system, trio.lattice, zeros, [lower_closed[l] for l in system.labels]
    )
    upper_sets = RandomSet.intervals(
        system, trio.lattice, zeros, [upper_closed[l] for l in system.labels]
    )
    lower_run = backwards_run(trio.lower, lower_sets)
    upper_run = backwards_run(trio.upper, upper_sets)

    def singleton(run: BackwardsRun, closed: dict[str, Fraction]) -> dict:
        _require_stabilized(run)
        matches = all(
            run.limit_values(label) == (closed[label],) for label in system.labels
        )
        return {"cardinal": run.cardinal, "matches_envelope": matches}

    return {
        "model": "envelopes",
        "samples": list(system.labels),
        "lattice": _lattice_section(trio.lattice),
        "monotone": {
            "lower": order_checks(trio.lower).monotone,
            "exact": order_checks(trio.exact).monotone,
            "upper": order_checks(trio.upper).monotone,
            "continuity": "vacuous on a finite lattice",
        },
        "domination": {
            "lower_below_exact": dominates(trio.lower, trio.exact),
            "exact_below_upper": dominates(trio.exact, trio.upper),
        },
        "lower_envelope": _label_values(lower_closed),
        "upper_envelope": _label_values(upper_closed),
        "iterative_lower": _label_values(lower_solve.as_dict()),
        "iterative_upper": _label_values(upper_solve.as_dict()),
        "closed_form_matches": (
            lower_solve.as_dict() == lower_closed and upper_solve.as_dict() == upper_closed
        ),
        "singleton_lower": singleton(lower_run, lower_closed),
        "singleton_upper": singleton(upper_run, upper_closed),
    }


def _cmd_bounds(job: Job, args: argparse.Namespace) -> dict:
    if not isinstance(job, QueueJob):
        raise ConfigError("bounds needs a loss or impatience config")
    model = job.model
    base = {
        "model": job.kind,
        "samples": list(job.system.labels),
        "lattice": _lattice_section(model.lattice),
    }
    if isinstance(model, ImpatienceModel):
        base["queue_report"] = _impatience_report(model)
    else:
        base["queue_report"] = _loss_report(model)
    return base


def _cmd_cftp(job: Job, args: argparse.Namespace) -> dict:
    if not isinstance(job, CftpJob):
        raise ConfigError("cftp needs a cftp config")
    seed = args.seed if args.seed is not None else job.seed
    jobs = args.jobs if args.jobs is not None else job.jobs
    replications = (
        args.replications if args.replications is not None else job.replications
    )
    estimate = cftp_estimate(job.config, replications, seed=seed, jobs=jobs)
    return {
        "model": "cftp",
        "step": _fr(job.config.step),
        "start_states": int(job.config.top_value / job.config.step) + 1
        if job.config.top_value % job.config.step == 0
        else int(job.config.top_value // job.config.step) + 1,
        "seed": seed,
        "replications": estimate.replications,
        "coupled": estimate.coupled,
        "uncoupled": estimate.replications - estimate.coupled,
        "max_horizon": estimate.max_horizon,
        "stability_warning": estimate.stability_warning,
        "distribution": {_fr(v): _fr(p) for v, p in estimate.distribution().items()},
    }


def _cmd_validate(job: Job, args: argparse.Namespace) -> dict:
    return {"valid": True, "model": job.kind}


_COMMANDS = {
    "analyze": _cmd_analyze,
    "loynes": _cmd_loynes,
    "bounds": _cmd_bounds,
    "cftp": _cmd_cftp,
    "validate": _cmd_validate,
}


def _inline(value: Any) -> bool:
    if isinstance(value, list):
        return all(not isinstance(v, (dict, list)) for v in value)
    if isinstance(value, dict):
        return not value
    return True


def _scalar(value: Any) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(value)


def _render_value(value: Any) -> str:
    if isinstance(value, list):
        return "[" + ", ".join(_scalar(v) for v in value) + "]"
    return _scalar(value)


def _walk(node: Any, depth: int, lines: list[str]) -> None:
    pad = "  " * depth
    if isinstance(node, dict):
        for key, value in node.items():
            if _inline(value):
                lines.append(f"{pad}{key}: {_render_value(value)}")
            else:
                lines.append(f"{pad}{key}:")
                _walk(value, depth + 1, lines)
    elif isinstance(node, list):
        for item in node:
            if _inline(item):
                lines.append(f"{pad}- {_render_value(item)}")
            else:
                lines.append(f"{pad}-")
                _walk(item, depth + 1, lines)


def render_table(report: dict) -> str:
    lines: list[str] = []
    _walk(report, 0, lines)
    return "\n".join(lines) + "\n"


def _emit(report: dict, args: argparse.Namespace) -> None:
    if getattr(args, "format", "json") == "table":
        text = render_table(report)
    else:
        text = json.dumps(report, indent=2) + "\n"
    sys.stdout.write(text)
    output = getattr(args, "output", None)
    if output:
        with open(output, "w", encoding="utf-8") as handle:
            handle.write(text)


def _emit_error(kind: str, reason: str, args: argparse.Namespace | None, code: int) -> int:
    payload = {"error": kind, "reason": reason}
    text = json.dumps(payload, indent=2) + "\n"
    sys.stdout.write(text)
    output = getattr(args, "output", None) if args is not None else None
    if output:
        with open(output, "w", encoding="utf-8") as handle:
            handle.write(text)
    print(f"error ({kind}): {reason}", file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="backscheme",
        description=(
            "Stationary solutions of lattice-valued stochastic recursions over "
            "finite cyclic bases, with loss and impatience queue front ends."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("analyze", "run the backwards scheme and report every structural result"),
        ("loynes", "run the monotone envelope analysis"),
        ("bounds", "report window quantities and cardinal ceilings"),
        ("cftp", "draw perfect samples by coupling from the past"),
        ("validate", "parse and build the config, then stop"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("config", help="path to a JSON run configuration")
        cmd.add_argument("--output", help="also write the report to this file")
        cmd.add_argument(
            "--format", choices=("json", "table"), default="json", help="report format"
        )
        if name == "analyze":
            cmd.add_argument(
                "--max-sweeps", type=int, default=None, help="sweep budget override"
            )
        if name == "cftp":
            cmd.add_argument("--seed", type=int, default=None, help="root seed override")
            cmd.add_argument("--jobs", type=int, default=None, help="parallel workers")
            cmd.add_argument(
                "--replications", type=int, default=None, help="replication override"
            )
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        job = load_job(args.config)
        report = _COMMANDS[args.command](job, args)
    except ConfigError as exc:
        return _emit_error("config", str(exc), args, EXIT_CONFIG)
    except ModelError as exc:
        return _emit_error("model", str(exc), args, EXIT_MODEL)
    except _Unstable as exc:
        return _emit_error("not-stabilized", exc.payload["reason"], args, EXIT_UNSTABLE)
    _emit(report, args)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
