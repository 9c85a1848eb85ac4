"""Command-line entry point.

Subcommands:
  simulate     run a preset (or config file) scenario; writes
               trajectory.csv, verdict.json, plot_data.csv and a PNG figure
  audit        run one of the numbered certificate suites (--prop 1..5)
  list         enumerate presets with provenance tags
  export-plot  re-render plot data and figure from a trajectory CSV

Exit codes: 0 success, 1 audit summary failed, 2 usage/configuration
error, 3 numeric failure (divergence); stable contract.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import plots, sim, systems, verify
from .errors import ConfigurationError, ContractError, NumericsError

SCHEMA_VERSION = 1


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        _write_numeric_failure(args, exc)
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phiac",
        description="Simulate and certify integral-action control of disturbed "
        "port-Hamiltonian systems.",
    )
    sub = parser.add_subparsers(required=True)

    sim_p = sub.add_parser("simulate", help="run a scenario and export its records")
    _common_source(sim_p)
    sim_p.add_argument("--out", default="out", help="output directory")
    sim_p.add_argument("--seed", type=int, default=0, help="recorded in the verdict")
    sim_p.set_defaults(func=cmd_simulate)

    audit_p = sub.add_parser("audit", help="run a certificate suite")
    _common_source(audit_p)
    audit_p.add_argument("--prop", type=int, required=True, help="claim number 1-5")
    audit_p.add_argument("--out", default="out")
    audit_p.add_argument("--seed", type=int, default=0)
    audit_p.add_argument("--json", action="store_true", help="print the JSON report")
    audit_p.set_defaults(func=cmd_audit)

    list_p = sub.add_parser("list", help="list presets")
    list_p.add_argument("--json", action="store_true")
    list_p.set_defaults(func=cmd_list)

    plot_p = sub.add_parser("export-plot", help="render plot data from a trajectory CSV")
    plot_p.add_argument("--traj", required=True, help="trajectory.csv produced by simulate")
    plot_p.add_argument("--config-dim", type=int, default=None,
                        help="configuration dimension for mechanical layouts")
    plot_p.add_argument("--out", default="out")
    plot_p.set_defaults(func=cmd_export_plot)
    return parser


def _common_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", help="preset name (see `phiac list`)")
    p.add_argument("--config", help="path to a preset-schema JSON file")
    p.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted-path override into the preset, e.g. scenario.t_end=10 or "
        "params.tau_l=0.8 (t_end/dt/stride address the scenario block)",
    )


def _load_preset(args) -> systems.Preset:
    if bool(args.preset) == bool(args.config):
        raise ConfigurationError("exactly one of --preset or --config is required")
    if args.preset:
        preset = systems.load_preset(args.preset)
    else:
        preset = systems.preset_from_dict(json.loads(Path(args.config).read_text()))
    if args.override:
        data = json.loads(json.dumps(preset.raw))  # deep copy
        for item in args.override:
            _apply_override(data, item)
        preset = systems.preset_from_dict(data)
    return preset


_SCENARIO_SUGAR = {"t_end", "dt", "stride", "tol", "controller"}


def _apply_override(data: dict, item: str) -> None:
    if "=" not in item:
        raise ConfigurationError(f"override {item!r} is not KEY=VALUE")
    key, raw_value = item.split("=", 1)
    path = key.split(".")
    if len(path) == 1 and path[0] in _SCENARIO_SUGAR:
        path = ["scenario", path[0]]
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value
    node = data
    for part in path[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise ConfigurationError(f"override path {key!r} not found in preset")
        node = node[part]
    leaf = path[-1]
    if not isinstance(node, dict) or leaf not in node:
        raise ConfigurationError(f"override path {key!r} not found in preset")
    old = node[leaf]
    if isinstance(old, bool) != isinstance(value, bool) or (
        isinstance(old, (int, float)) and not isinstance(value, (int, float))
    ) or (isinstance(old, list) and not isinstance(value, list)) or (
        isinstance(old, str) and not isinstance(value, str)
    ):
        raise ConfigurationError(
            f"override {key!r}: type mismatch (preset has {type(old).__name__})"
        )
    node[leaf] = value


def cmd_simulate(args) -> int:
    preset = _load_preset(args)
    scenario, context = systems.make_scenario(preset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        traj = sim.integrate(scenario)
    except NumericsError as exc:
        diag = {
            "schema_version": SCHEMA_VERSION,
            "preset": preset.name,
            "error": str(exc),
            "t": getattr(exc, "t", None),
        }
        (out / "failure.json").write_text(json.dumps(diag, indent=2, sort_keys=True) + "\n")
        raise
    verdict = sim.check_convergence(traj, scenario.prediction, scenario.tol)
    traj.to_csv(out / "trajectory.csv")
    plots.write_plot_data(traj, out / "plot_data.csv")
    plots.render_timeseries(traj, out / f"{preset.name}.png")
    payload = {
        "schema_version": SCHEMA_VERSION,
        "preset": preset.name,
        "seed": args.seed,
        "dt": scenario.dt,
        "t_end": scenario.t_end,
        "tolerance": scenario.tol,
        "predicted_equilibrium": np.asarray(scenario.prediction.w_bar).tolist(),
        "equilibrium_residual": scenario.prediction.residual,
        "verdict": verdict.as_dict(),
        "step_doubling_max": traj.meta.get("step_doubling_max"),
    }
    (out / "verdict.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    status = "converged" if verdict.converged else "not converged"
    print(f"{preset.name}: {status}, final error {verdict.final_error:.3e}; "
          f"outputs in {out}/")
    return 0


def cmd_audit(args) -> int:
    if args.prop not in (1, 2, 3, 4, 5):
        raise ConfigurationError(f"--prop must be 1..5, got {args.prop}")
    preset = _load_preset(args)
    _, context = systems.make_scenario(preset)
    report = _run_audit(args.prop, preset, context, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / f"audit_{preset.name}_prop{args.prop}.json"
    report_path.write_text(report.to_json() + "\n")
    print(report.to_json() if args.json else report.render_text())
    return 0 if report.passed else 1


def _run_audit(prop: int, preset: systems.Preset, context: dict, seed: int):
    plant, gains = context["plant"], context["gains"]
    # the VTOL's slowest closed-loop mode needs a longer window before the
    # decay checks are meaningful
    t_sim = 45.0 if preset.system == "vtol" else 20.0
    if prop == 1:
        return verify.audit_proposition1(plant, gains, seed=seed)
    if prop == 5:
        if "mech" not in context:
            raise ConfigurationError(f"preset {preset.name} is not a mechanical system")
        return verify.audit_proposition5(context["mech"], gains, seed=seed,
                                         box=2.0, t_sim=t_sim)
    md = plant.dist.matched
    ud = plant.dist.unmatched
    if prop == 2:
        if md is None:
            raise ConfigurationError(
                f"preset {preset.name} has no matched disturbance (claim 2 needs one)"
            )
        d_bar_a = sim._effective_matched_amount(plant, gains)
        return verify.audit_proposition2(plant, gains, d_bar_a, seed=seed, t_sim=t_sim)
    if ud is None:
        raise ConfigurationError(
            f"preset {preset.name} has no unmatched disturbance (claim {prop} needs one)"
        )
    if prop == 3:
        return verify.audit_proposition3(plant, gains, ud.amount, seed=seed, t_sim=t_sim)
    d_bar_a = np.zeros(plant.partition.m) if md is None else sim._effective_matched_amount(plant, gains)
    return verify.audit_proposition4(plant, gains, d_bar_a, ud.amount, seed=seed, t_sim=t_sim)


def cmd_list(args) -> int:
    entries = []
    for name in systems.available_presets():
        preset = systems.load_preset(name)
        entries.append({
            "name": name,
            "system": preset.system,
            "provenance": preset.provenance,
        })
    if args.json:
        print(json.dumps({"schema_version": SCHEMA_VERSION, "presets": entries},
                         indent=2, sort_keys=True))
    else:
        for e in entries:
            print(f"{e['name']:24s} {e['system']:12s} [{e['provenance']}]")
    return 0


def cmd_export_plot(args) -> int:
    path = Path(args.traj)
    if not path.exists():
        raise ConfigurationError(f"no such trajectory file: {path}")
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    traj = _trajectory_from_table(header, table, path.stem, args.config_dim)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    plots.write_plot_data(traj, out / "plot_data.csv")
    fig = plots.render_timeseries(traj, out / f"{path.stem}.png")
    print(f"wrote {out / 'plot_data.csv'} and {fig}")
    return 0


def _trajectory_from_table(header, table, name, config_dim) -> sim.Trajectory:
    def cols(prefix):
        idx = [i for i, h in enumerate(header) if h.startswith(prefix) and h[len(prefix):].isdigit()]
        return table[:, idx] if idx else np.zeros((table.shape[0], 0))

    named = {h: table[:, i] for i, h in enumerate(header)}
    for required in ("t", "H_cl", "W", "Ya_norm", "Yu_norm"):
        if required not in named:
            raise ConfigurationError(f"trajectory file lacks required column {required!r}")
    t = named["t"]
    dt = float(t[1] - t[0]) if t.size > 1 else 1.0
    return sim.Trajectory(
        name=name,
        controller="iac",
        dt=dt,
        stride=1,
        t=t,
        x=cols("x"),
        xc=cols("xc"),
        u=cols("u"),
        h_cl=named["H_cl"],
        lyap=named["W"],
        y_a_norm=named["Ya_norm"],
        y_u_norm=named["Yu_norm"],
        config_dim=config_dim,
    )


def _write_numeric_failure(args, exc) -> None:
    out = getattr(args, "out", None)
    if out is None:
        return
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    diag = {"schema_version": SCHEMA_VERSION, "error": str(exc),
            "t": getattr(exc, "t", None)}
    (path / "failure.json").write_text(json.dumps(diag, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    sys.exit(main())
