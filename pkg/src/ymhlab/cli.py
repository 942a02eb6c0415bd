"""Command-line harness: ``ymhlab <subcommand> --config FILE --set key=value``.

Each run writes ``summary.json`` (resolved config, status, failure reason,
results) into the output directory, plus ``monitors.csv`` and snapshots for
the flow commands.  Exit status: 0 success, 1 invalid input, 2 numerical
failure.
"""

import argparse
import csv
import json
import logging
import math
import os
import sys

import numpy as np

from . import config as cfgmod
from .errors import ConfigError, YMHError
from .fiber import make_fiber
from .flow import (MONITOR_FIELDS, FlowState, energy_identity_gap, metric_initial, metric_pair,
                   run_metric, run_pair)
from .lattice import write_snapshot
from .rng import SplitMix64

log = logging.getLogger("ymhlab")

COMMANDS = ("flow-pair", "flow-metric", "reconstruct-check", "check-identities", "gradcheck",
            "stability-scan", "sigma-check", "psi-check")


class NumericalFailure(Exception):
    """A run finished but ended in a numerical failure state."""

    def __init__(self, reason, results):
        super().__init__(reason)
        self.reason = reason
        self.results = results


def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def _write_monitors(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MONITOR_FIELDS)
        for r in records:
            w.writerow([repr(float(v)) for v in r.row()])


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _snapshots(out, states, every, pair_of=lambda s: (s.A, s.u)):
    if every <= 0 or not states:
        return []
    names = []
    for st in states:
        A, u = pair_of(st)
        name = f"snapshot_t{st.t:.6f}.txt"
        write_snapshot(os.path.join(out, name), A.grid, A.links, u.sites, st.t)
        names.append(name)
    return names


def _setup(cfg):
    from .experiments import grid_from, initial_pair

    grid = grid_from(cfg)
    fiber = make_fiber(cfg["fiber.model"])
    A, u = initial_pair(grid, fiber, cfg["init.kind"], cfg["flow.c"], cfg["run.seed"],
                        cfg["init.amplitude"], cfg["init.link_noise"])
    return grid, A, u


def _flow_kwargs(cfg):
    return dict(monitors_every=cfg["flow.monitors_every"], scheme=cfg["flow.scheme"],
                conv_tol=cfg["flow.conv_tol"], cfl_kappa=cfg["flow.cfl_kappa"])


# -- subcommands -------------------------------------------------------------

def cmd_flow_pair(cfg, out):
    _, A, u = _setup(cfg)
    snap = cfg["flow.snapshot_every"]
    res = run_pair(FlowState(A, u), cfg["flow.c"], cfg["flow.dt"], cfg["flow.t_end"],
                   keep_every=snap if snap > 0 else None, **_flow_kwargs(cfg))
    _write_monitors(os.path.join(out, "monitors.csv"), res.records)
    results = {"status": res.status, "steps": res.steps, "t_final": res.final.t,
               "energy_final": float(res.energies[-1]), "sup_ehat_final": float(res.sup_ehat[-1]),
               "l2_residual_final": res.records[-1].l2_residual,
               "energy_identity_gap": energy_identity_gap(res), "flags": res.flags,
               "snapshots": _snapshots(out, res.trajectory, snap)}
    if res.status == "blowup":
        raise NumericalFailure("blowup", results)
    return results


def cmd_flow_metric(cfg, out):
    _, A, u = _setup(cfg)
    snap = cfg["flow.snapshot_every"]
    res = run_metric(metric_initial(A, u), cfg["flow.c"], cfg["flow.dt"], cfg["flow.t_end"],
                     keep_every=snap if snap > 0 else None, **_flow_kwargs(cfg))
    _write_monitors(os.path.join(out, "monitors.csv"), res.records)
    last = res.records[-1]
    results = {"status": res.status, "steps": res.steps, "t_final": res.final.t,
               "sup_ehat_final": float(res.sup_ehat[-1]), "l2_residual_final": last.l2_residual,
               "psi_c_final": last.psi_c, "sup_s_final": last.sup_s,
               "trace_mean": last.trace_mean, "trace_var": last.trace_var,
               "snapshots": _snapshots(out, res.trajectory, snap, metric_pair)}
    if res.status == "blowup":
        raise NumericalFailure("blowup", results)
    return results


def cmd_reconstruct_check(cfg, out):
    from .experiments import equivalence_mismatch

    _, A, u = _setup(cfg)
    c, dt, t_end = cfg["flow.c"], cfg["flow.dt"], cfg["flow.t_end"]
    coarse, gaps = equivalence_mismatch(A, u, c, dt, t_end, cfg["flow.scheme"])
    fine, gaps_fine = equivalence_mismatch(A, u, c, dt / 2, t_end, cfg["flow.scheme"])
    return {"mismatch": coarse, "mismatch_half_dt": fine,
            "improvement": coarse / fine if fine > 0 else float("inf"),
            "observables": gaps, "observables_half_dt": gaps_fine}


def cmd_check_identities(cfg, out):
    from .kahler import refinement_study

    study = refinement_study(tuple(cfg["check.sizes"]), cfg["check.length"], cfg["grid.d"])
    n = len(study.sizes)
    header = (["identity", "variant"] + [f"res_{s}" for s in study.sizes]
              + [f"order_{study.sizes[i]}_{study.sizes[i + 1]}" for i in range(n - 1)])
    rows = [[k, variant] + list(vals) + list(orders) for k, variant, vals, orders in study.table()]
    _write_rows(os.path.join(out, "identities.csv"), header, rows)
    passed = study.passed()
    return {"sizes": list(study.sizes), "passed": passed, "all_passed": all(passed.values()),
            "forward": study.forward, "centered": study.centered,
            "orders_forward": study.orders_forward, "orders_centered": study.orders_centered}


def cmd_gradcheck(cfg, out):
    from .experiments import gradient_check, grid_from, initial_pair

    grid = grid_from(cfg)
    fiber = make_fiber(cfg["fiber.model"])
    rng = SplitMix64(cfg["run.seed"])
    rows = []
    for k in range(cfg["check.samples"]):
        A, u = initial_pair(grid, fiber, "random", cfg["flow.c"], cfg["run.seed"] + k + 1,
                            cfg["init.amplitude"], cfg["init.link_noise"])
        wu, wa = gradient_check(A, u, cfg["flow.c"], rng, h=cfg["check.step"])
        rows.append([k, wu, wa])
    _write_rows(os.path.join(out, "gradcheck.csv"), ["sample", "worst_u", "worst_A"], rows)
    return {"worst_u": max(r[1] for r in rows), "worst_A": max(r[2] for r in rows),
            "samples": len(rows)}


def cmd_stability_scan(cfg, out):
    from .experiments import grid_from
    from .stability import ScanConfig, stability_scan, write_scan_csv

    grid = grid_from(cfg)
    sc = ScanConfig(dt=cfg["flow.dt"], t_end=cfg["flow.t_end"], conv_tol=cfg["flow.conv_tol"],
                    scheme=cfg["flow.scheme"], cfl_kappa=cfg["flow.cfl_kappa"],
                    flow=cfg["scan.flow"], seed=cfg["run.seed"])
    verdicts = stability_scan(grid.d, grid, cfg["scan.c_values"], sc, jobs=cfg["run.jobs"])
    write_scan_csv(os.path.join(out, "scan.csv"), verdicts)
    return {"verdicts": [dict(zip(("c", "threshold", "predicted", "observed", "residual_at_end",
                                   "T_plus", "T_minus"), v.row()), note=v.note, agrees=v.agrees)
                         for v in verdicts]}


def cmd_sigma_check(cfg, out):
    from .experiments import random_sigma_pairs, sigma_trajectories

    grid, A, u = _setup(cfg)
    props = random_sigma_pairs(SplitMix64(cfg["run.seed"]), n=1000)
    x, y = grid.coords()
    lx, ly = grid.lengths
    s2 = 0.8 * np.sin(2 * np.pi * x / lx) * np.cos(2 * np.pi * y / ly) + 0.3
    times, sups = sigma_trajectories(A, u, cfg["flow.c"], s2, cfg["flow.dt"], cfg["flow.t_end"],
                                     cfg["flow.scheme"])
    _write_rows(os.path.join(out, "sigma.csv"), ["t", "sup_sigma"], zip(times, sups))
    inc = np.diff(sups)
    return {"random_pairs": props, "sup_sigma_start": float(sups[0]),
            "sup_sigma_end": float(sups[-1]),
            "max_increase": float(inc.max()) if inc.size else 0.0}


def cmd_psi_check(cfg, out):
    from .donaldson import dichotomy_probe
    from .experiments import c0_ratio_series, psi_identity_check

    _, A, u = _setup(cfg)
    kw = _flow_kwargs(cfg)
    stable = run_metric(metric_initial(A, u), cfg["flow.c"], cfg["flow.dt"], cfg["flow.t_end"],
                        keep_every=100, track_psi=True, **kw)
    unstable = run_metric(metric_initial(A, u), cfg["psi.c_unstable"], cfg["flow.dt"],
                          cfg["psi.t_end_unstable"], keep_every=None, **kw)
    _write_monitors(os.path.join(out, "monitors.csv"), stable.records)
    chk = psi_identity_check(stable, cfg["flow.c"])
    results = {"stable_status": stable.status, "unstable_status": unstable.status,
               "psi_closed_form": chk.report.psi_closed_form,
               "psi_path_integral": chk.report.psi_path_integral,
               "psi_mismatch": chk.report.mismatch, "fd_mismatch_max": chk.max_fd_mismatch,
               "fd_samples": chk.samples_compared, "psi_max": chk.psi_max}
    ratios = c0_ratio_series(stable)
    results["c0_l1_ratio_max"] = float(ratios.max()) if ratios.size else 0.0
    try:
        results["probe"] = dichotomy_probe(stable, unstable).as_dict()
    except YMHError as exc:
        results["probe"] = {"error": exc.reason, "message": str(exc)}
    return results


HANDLERS = {
    "flow-pair": cmd_flow_pair, "flow-metric": cmd_flow_metric,
    "reconstruct-check": cmd_reconstruct_check, "check-identities": cmd_check_identities,
    "gradcheck": cmd_gradcheck, "stability-scan": cmd_stability_scan,
    "sigma-check": cmd_sigma_check, "psi-check": cmd_psi_check,
}


def build_parser():
    p = argparse.ArgumentParser(prog="ymhlab", description="Abelian YMH flow laboratory on a lattice torus.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", metavar="PATH", help="flat 'section.key = value' config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    p.add_argument("--output", metavar="DIR", help="output directory (overrides run.output_dir)")
    p.add_argument("--jobs", type=int, metavar="N", help="parallel scan workers (overrides run.jobs)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _dump(out, summary):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(_clean(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    summary = {"command": args.command, "config": None, "warnings": [], "status": "error",
               "reason": None, "message": None, "results": {}}
    out = args.output or "out"
    try:
        overrides = list(args.overrides)
        if args.jobs is not None:
            overrides.append(f"run.jobs={args.jobs}")
        if args.output is not None:
            overrides.append(f"run.output_dir={args.output}")
        cfg, warnings = cfgmod.load(args.config, overrides, args.command)
        out = cfg["run.output_dir"]
        summary["config"] = cfg.flat()
        summary["warnings"] = warnings
        os.makedirs(out, exist_ok=True)
        summary["results"] = HANDLERS[args.command](cfg, out)
        summary["status"] = "ok"
        code = 0
    except NumericalFailure as exc:
        summary.update(status="failed", reason=exc.reason, results=exc.results)
        code = 2
    except (ConfigError, ValueError) as exc:
        summary.update(status="invalid", reason=getattr(exc, "reason", "invalid-input"),
                       message=str(exc))
        code = 1
    except YMHError as exc:
        summary.update(status="failed", reason=exc.reason, message=str(exc))
        code = 2
    try:
        _dump(out, summary)
    except OSError as exc:
        print(f"ymhlab: cannot write summary: {exc}", file=sys.stderr)
    if code:
        print(f"ymhlab {args.command}: {summary['status']} ({summary['reason']}): "
              f"{summary['message'] or ''}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
