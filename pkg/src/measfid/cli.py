"""Command-line front end.

Exit codes: 0 success, 1 invalid model or arguments, 2 I/O or schema error,
3 numerical failure. Errors are written to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import platform
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import formats, metrics, protocols, qubit, tomography
from .core import MeasurementModelError, NumericalFailure, Rank1Pvm, overlaps
from .device import NoisyDevice

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3

# built-in values for options that may also come from --config
DEFAULTS = {
    "epsilon": 0.01,
    "delta": 0.05,
    "lambda": 1.0,
    "seed": None,
    "integrator": None,
    "mc_samples": 1_000_000,
    "threads": 1,
    "exhaustive_pairs": False,
    "u_guess": 0.99,
    "shots": 10_000,
    "gamma_points": None,
    "u0": "0.99,0.995,0.999",
    "full": False,
}


class UsageError(ValueError):
    pass


def _floats(text: str) -> list:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="measfid", description="Average measurement fidelity toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option values; flags win on conflict")
    common.add_argument("--out", help="write the result payload here")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--povm", help="POVM JSON file")
    model.add_argument("--device", help="device JSON file (POVM plus optional output states)")
    model.add_argument("--pvm", help="ideal basis JSON file (default: computational)")

    est = argparse.ArgumentParser(add_help=False)
    est.add_argument("--epsilon", type=float)
    est.add_argument("--delta", type=float)
    est.add_argument("--lambda", dest="lambda_", type=float)
    est.add_argument("--u-guess", type=float)
    est.add_argument("--exhaustive-pairs", action="store_true", default=None)

    sub.add_parser("validate", parents=[common, model], help="check that a POVM or device file is valid")

    f = sub.add_parser("fidelity", parents=[common, model], help="average measurement fidelity and its bound")
    f.add_argument("--integrator", choices=["quad", "mc"])
    f.add_argument("--mc-samples", type=int)

    b = sub.add_parser("bound", parents=[common], help="closed-form lower bound from overlaps")
    b.add_argument("--u", type=_floats, required=True)
    b.add_argument("--q", type=_floats)

    sub.add_parser("protocol", parents=[common, model, est], help="estimate lb from probabilities")
    sub.add_parser("protocol-states", parents=[common, model, est], help="estimate lb from output states")

    t = sub.add_parser("tomography", parents=[common, model], help="reconstruct the POVM from d^2 probes")
    t.add_argument("--shots", type=int)
    t.add_argument("--lambda", dest="lambda_", type=float)
    t.add_argument("--exact", action="store_true", default=None)

    s = sub.add_parser("sweep", parents=[common], help="exact F and lb over the coherence range (CSV)")
    s.add_argument("--u0")
    s.add_argument("--gamma-points", type=int)

    sc = sub.add_parser("scan", parents=[common], help="search for F < lb over a grid of qubit POVMs")
    sc.add_argument("--gamma-points", type=int)
    sc.add_argument("--full", action="store_true", default=None, help="u0 step 1e-4 (slow)")

    tr = sub.add_parser("trials", parents=[common, est], help="Chebyshev and Hoeffding trial counts")
    tr.add_argument("--u", type=_floats, help="alias for --u-guess")
    return p


def _resolve(args: argparse.Namespace) -> dict:
    """Merge built-in defaults, the config file and explicit flags."""
    cfg = dict(DEFAULTS)
    if args.config:
        data = formats.load_json(args.config)
        if not isinstance(data, dict):
            raise formats.SchemaError("config file must hold a JSON object")
        cfg.update({k.replace("-", "_"): v for k, v in data.items()})
    for k, v in vars(args).items():
        key = "lambda" if k == "lambda_" else k
        if v is not None:
            cfg[key] = v
    if cfg.get("u") is not None and args.command == "trials":
        cfg["u_guess"] = cfg["u"][0] if isinstance(cfg["u"], list) else cfg["u"]
    return cfg


def _load_device(cfg: dict) -> NoisyDevice:
    if cfg.get("device"):
        dev = formats.device_from_json(formats.load_json(cfg["device"]))
        if cfg["seed"] is not None:
            dev = NoisyDevice(dev.povm, dev.output_states, seed=cfg["seed"])
        return dev
    if cfg.get("povm"):
        return NoisyDevice(formats.povm_from_json(formats.load_json(cfg["povm"])), seed=_seed(cfg))
    raise UsageError(f"--povm or --device is required for {cfg['command']}")


def _load_pvm(cfg: dict, dim: int) -> Rank1Pvm:
    if cfg.get("pvm"):
        pvm = formats.pvm_from_json(formats.load_json(cfg["pvm"]))
        if pvm.dim != dim:
            raise UsageError("ideal basis and POVM dimensions differ")
        return pvm
    return Rank1Pvm.computational(dim)


def _seed(cfg: dict) -> int:
    return 0 if cfg["seed"] is None else int(cfg["seed"])


def _est_config(cfg: dict) -> protocols.EstimationConfig:
    return protocols.EstimationConfig(
        epsilon=cfg["epsilon"],
        delta=cfg["delta"],
        lam=cfg["lambda"],
        seed=_seed(cfg),
        u_guess=cfg["u_guess"],
        exhaustive_pairs=bool(cfg["exhaustive_pairs"]),
    )


def write_atomic(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _emit(cfg: dict, payload: str) -> None:
    out = cfg.get("out")
    if not out:
        return
    write_atomic(out, payload)
    echo = {k: v for k, v in cfg.items() if k not in ("out", "config")}
    meta = {
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "host": platform.node(),
        "python": platform.python_version(),
        "config": echo,
    }
    write_atomic(f"{out}.meta.json", formats.dumps(meta))


# -- commands ----------------------------------------------------------------


def cmd_validate(cfg):
    dev = _load_device(cfg)
    print(f"valid: dim={dev.dim} outcomes={dev.povm.n_outcomes} "
          f"completeness_residual={dev.povm.completeness_residual:.3e}")
    return {"valid": True, "dim": dev.dim, "outcomes": dev.povm.n_outcomes}


def _integrator(cfg, dim):
    choice = cfg["integrator"] or ("quad" if dim == 2 else "mc")
    if choice == "quad":
        if dim != 2:
            raise UsageError("quadrature integrator supports d = 2 only")
        return metrics.Quadrature()
    return metrics.MonteCarlo(n=cfg["mc_samples"], seed=_seed(cfg), threads=cfg["threads"])


def cmd_fidelity(cfg):
    dev = _load_device(cfg)
    pvm = _load_pvm(cfg, dev.dim)
    integ = _integrator(cfg, dev.dim)
    res = metrics.avg_fidelity_probs(pvm, dev.povm, integ)
    lb = metrics.closed_form_bound(pvm, dev.povm).value
    out = {"F": res.value, "error": 1 - res.value, "uncertainty": res.uncertainty, "method": res.method,
           "lb": lb, "ub": 1 - lb}
    line = f"F={res.value:.6f} (+/- {res.uncertainty:.1e}) lb={lb:.4f} ub={1 - lb:.4f}"
    if dev.output_states is not None:
        st = metrics.avg_fidelity_states(pvm, dev, integ)
        u = overlaps(pvm, dev.povm)
        q = [dev.repeat_probability(k) for k in range(dev.dim)]
        lbs = metrics.lower_bound_states(metrics.BoundInputs(u, q))
        out.update({"F_states": st.value, "lb_states": lbs})
        line += f" F_states={st.value:.6f} lb_states={lbs:.4f}"
    print(line)
    return out


def cmd_bound(cfg):
    u = cfg["u"]
    q = cfg.get("q")
    if q is None:
        lb = metrics.lower_bound_probs(u)
    else:
        lb = metrics.lower_bound_states(metrics.BoundInputs(u, q))
    print(f"lb={lb:.4f} ub={metrics.upper_bound_error(lb):.4f}")
    return {"lb": lb, "ub": metrics.upper_bound_error(lb), "u": u, "q": q}


def _protocol(cfg, runner):
    dev = _load_device(cfg)
    pvm = _load_pvm(cfg, dev.dim)
    rep = runner(dev, pvm, _est_config(cfg))
    acc = rep.trial_accounting
    print(f"lb_hat={rep.lb_hat:.4f} ub_hat={1 - rep.lb_hat:.4f} K={rep.K} shots={acc['device_shots']}")
    return rep.to_dict()


def cmd_protocol(cfg):
    return _protocol(cfg, protocols.run_protocol_probs)


def cmd_protocol_states(cfg):
    return _protocol(cfg, protocols.run_protocol_states)


def cmd_tomography(cfg):
    dev = _load_device(cfg)
    pvm = _load_pvm(cfg, dev.dim)
    plan = tomography.TomographyPlan(dev.dim, int(cfg["shots"]), pvm, cfg["lambda"])
    rec = tomography.reconstruct(dev, plan, exact=bool(cfg.get("exact")))
    err = float(np.max(np.abs(rec.povm.effects - dev.povm.effects)))
    cost = tomography.cost_model(dev.dim, plan.shots_per_state)
    print(f"states={cost['states']} probabilities={cost['probabilities']} shots={dev.shots} "
          f"max_entry_error={err:.3e}")
    return {"povm": formats.povm_to_json(rec.povm), "diagnostics": rec.diagnostics, "cost": cost,
            "device_shots": dev.shots, "max_entry_error": err, "plan": plan.to_dict()}


def cmd_sweep(cfg):
    u0 = _floats(cfg["u0"]) if isinstance(cfg["u0"], str) else list(cfg["u0"])
    rows = qubit.sweep_table1(None, u0, int(cfg["gamma_points"] or 50), threads=cfg["threads"])
    for r in rows:
        if r.gamma_abs == 0.0:
            print(f"u0={r.u0:g} gamma=0 F={r.F_exact:.6f} lb={r.lb:.4f} ub={r.ub:.4f}")
    print(f"rows={len(rows)} min_gap={min(r.gap for r in rows):.3e}")
    return qubit.rows_to_csv(rows)


def cmd_scan(cfg):
    grid = qubit.full_u0_grid() if cfg.get("full") else qubit.desk_u0_grid()
    res = qubit.violation_scan(grid, int(cfg["gamma_points"] or 20), threads=cfg["threads"])
    print(f"points={len(res.rows)} violations={len(res.violations)} "
          f"max(lb-F)={res.max_negative_gap:.3e}")
    return qubit.rows_to_csv(res.rows)


def cmd_trials(cfg):
    ec = _est_config(cfg)
    n = protocols.chebyshev_trials(ec)
    k = protocols.hoeffding_pairs(ec)
    print(f"chebyshev_trials={n} hoeffding_pairs={k}")
    return {"chebyshev_trials": n, "hoeffding_pairs": k, "config": ec.to_dict()}


COMMANDS = {
    "validate": cmd_validate,
    "fidelity": cmd_fidelity,
    "bound": cmd_bound,
    "protocol": cmd_protocol,
    "protocol-states": cmd_protocol_states,
    "tomography": cmd_tomography,
    "sweep": cmd_sweep,
    "scan": cmd_scan,
    "trials": cmd_trials,
}


def _fail(code: int, exc: BaseException) -> int:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        cfg = _resolve(args)
        result = COMMANDS[args.command](cfg)
        payload = result if isinstance(result, str) else formats.dumps(result)
        _emit(cfg, payload)
    except (formats.SchemaError, OSError) as exc:
        return _fail(EXIT_IO, exc)
    except (MeasurementModelError, UsageError, ValueError) as exc:
        return _fail(EXIT_INVALID, exc)
    except (NumericalFailure, ArithmeticError) as exc:
        return _fail(EXIT_NUMERIC, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
