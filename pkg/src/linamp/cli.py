"""Batch front end.

Exit codes: 0 success, 2 bad configuration or input file, 3 numerical or
truncation failure, 4 verdict ``NOT_SIMULABLE`` from ``certify``.
Errors are reported on stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
import tempfile

import jsonschema
import numpy as np

from . import certifier as cert
from .errors import DomainError, LinampError, TruncationError
from .fock import StateSpec, make_state, moments, pure_state_vector
from .lindblad import EvolveConfig, LindbladSpec, moment_trajectory, phase_covariance_residual, \
    phase_insensitivity_report
from .paramp import ParampSpec, paramp_predict
from .trajectories import TrajectoryConfig, run_trajectories
from .zoo import A2, gain, kind_from_dict, kind_to_dict, predict_moments, to_spec

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS, EXIT_NOT_SIMULABLE = 0, 2, 3, 4

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_CPLX = {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}]}

STATE_SCHEMA = {
    "type": "object",
    "properties": {"kind": {"enum": ["vacuum", "fock", "coherent", "thermal"]},
                   "n": {"type": "integer", "minimum": 0}, "alpha": _CPLX, "nbar": _NONNEG},
    "required": ["kind"],
    "additionalProperties": False,
}
AMPLIFIER_SCHEMA = {
    "type": "object",
    "properties": {"kind": {"enum": ["A1", "A2", "A3", "TwoPhoton"]}, "kappa_up": _NONNEG,
                   "kappa_down": _NONNEG, "gamma": _POS, "kappa_up2": _NONNEG, "kappa_down2": _NONNEG},
    "required": ["kind"],
    "additionalProperties": False,
}
SPEC_SCHEMA = {
    "type": "array", "minItems": 1,
    "items": {"type": "object",
              "properties": {"rate": _NONNEG, "op": {"enum": ["lower", "raise"]},
                             "power": {"type": "integer", "minimum": 1}},
              "required": ["rate", "op"], "additionalProperties": False},
}
_SOLVER = {"rel_tol": _POS, "abs_tol": _POS, "max_step": _POS,
           "method": {"enum": ["auto", "adaptive_rk", "bdf", "dense_expm"]}, "tail_tol": _POS}
_GENERATOR = {"amplifier": AMPLIFIER_SCHEMA, "spec": SPEC_SCHEMA}
_ONE_GENERATOR = {"oneOf": [{"required": ["amplifier"]}, {"required": ["spec"]}]}

EVOLVE_SCHEMA = {
    "type": "object",
    "properties": {**_GENERATOR, **_SOLVER, "state": STATE_SCHEMA,
                   "times": {"type": "array", "items": _NONNEG, "minItems": 1},
                   "dim": {"type": "integer", "minimum": 2}, "output": {"type": "string"}},
    "required": ["state", "times", "dim"],
    "additionalProperties": False, **_ONE_GENERATOR,
}
TRAJECTORIES_SCHEMA = {
    "type": "object",
    "properties": {**_GENERATOR, "state": STATE_SCHEMA, "t": _NONNEG, "dim": {"type": "integer", "minimum": 2},
                   "n_traj": {"type": "integer", "minimum": 1},
                   "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
                   "max_jumps": {"type": "integer", "minimum": 0}, "tail_tol": _POS,
                   "norm_threshold_sampling": {"type": "boolean"}, "dt": _POS,
                   "workers": {"type": "integer", "minimum": 1},
                   "output": {"type": "string"}, "jump_log": {"type": "string"}},
    "required": ["state", "t", "dim", "n_traj", "seed"],
    "additionalProperties": False, **_ONE_GENERATOR,
}
PHASE_SCHEMA = {
    "type": "object",
    "properties": {**_GENERATOR, **_SOLVER, "state": STATE_SCHEMA, "t": _NONNEG,
                   "dim": {"type": "integer", "minimum": 2},
                   "moment_dim": {"type": "integer", "minimum": 2},
                   "phis": {"type": "array", "items": _NUM, "minItems": 1},
                   "output": {"type": "string"}},
    "required": ["state", "t", "dim", "phis"],
    "additionalProperties": False, **_ONE_GENERATOR,
}
PREDICT_SCHEMA = {
    "type": "object",
    "properties": {"amplifier": AMPLIFIER_SCHEMA, "t": _NONNEG,
                   "paramp": {"type": "object",
                              "properties": {"G": {"type": "number", "minimum": 1}, "sigma": STATE_SCHEMA,
                                             "dim_a": {"type": "integer", "minimum": 2},
                                             "dim_b": {"type": "integer", "minimum": 2}},
                              "required": ["G"], "additionalProperties": False},
                   "in_amp": _CPLX, "in_n": _NONNEG, "output": {"type": "string"}},
    "required": ["in_amp", "in_n"],
    "additionalProperties": False,
    "oneOf": [{"required": ["amplifier", "t"]}, {"required": ["paramp"]}],
}
RECORD_SCHEMA = {
    "type": "object",
    "properties": {"label": {"type": "string"}, "in_amp": _CPLX, "in_n": _NONNEG, "out_amp": _CPLX,
                   "out_n": _NONNEG},
    "required": ["in_amp", "in_n", "out_amp", "out_n"],
    "additionalProperties": False,
}


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- output

def fmt(x: float) -> str:
    """17 significant digits: enough to round-trip any double."""
    return "%.17g" % x


def dumps(obj) -> str:
    """JSON with every float written to 17 significant digits; NaN and inf become null."""
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(float(obj)) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(text: str, path: str | None) -> None:
    if path:
        write_atomic(path, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- config

def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(config: dict, overrides) -> dict:
    config = copy.deepcopy(config)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        parts = key.split(".")
        node = config
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {key}: {p} is not an object")
        node[parts[-1]] = _parse_value(raw)
    return config


def load_config(path, overrides, schema) -> dict:
    config = {}
    if path:
        try:
            with open(path) as fh:
                config = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    config = apply_overrides(config, overrides)
    try:
        jsonschema.validate(config, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    return config


def _generator(config):
    if "amplifier" in config:
        kind = kind_from_dict(config["amplifier"])
        return kind, to_spec(kind)
    return None, LindbladSpec.from_json(config["spec"])


def _evolve_cfg(config):
    keys = ("rel_tol", "abs_tol", "max_step", "method", "tail_tol")
    return EvolveConfig(**{k: config[k] for k in keys if k in config})


def _input_state(spec: StateSpec, dim: int):
    """The input on the smallest power-of-two cutoff (<= dim) that holds it."""
    if spec.kind == "fock" and spec.n >= dim:
        raise DomainError(f"fock({spec.n}) does not fit in dim={dim}")
    d = min(dim, 32)
    while True:
        try:
            return make_state(spec, d)
        except TruncationError:
            if d >= dim:
                raise
            d = min(dim, 2 * d)


# ---------------------------------------------------------------- commands

EVOLVE_COLUMNS = ["t", "re_amp", "im_amp", "n", "n2", "a2norm", "tail_mass"]


def cmd_evolve(args) -> int:
    config = load_config(args.config, args.set, EVOLVE_SCHEMA)
    _, spec = _generator(config)
    state = StateSpec.from_dict(config["state"])
    rho0 = _input_state(state, config["dim"])
    reports = moment_trajectory(rho0, spec, config["times"], _evolve_cfg(config), dim=config["dim"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVOLVE_COLUMNS)
    for t, m in zip(config["times"], reports):
        w.writerow([fmt(v) for v in (t, m.mean_amp.real, m.mean_amp.imag, m.mean_n, m.mean_n2,
                                     m.mean_a2norm, m.tail_mass)])
    emit(buf.getvalue(), config.get("output"))
    return EXIT_OK


def read_records(path) -> list:
    records = []
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read records {path}: {exc}") from None
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            jsonschema.validate(doc, RECORD_SCHEMA)
        except (json.JSONDecodeError, jsonschema.ValidationError) as exc:
            msg = exc.message if isinstance(exc, jsonschema.ValidationError) else str(exc)
            raise ConfigError(f"{path}:{lineno}: {msg}") from None
        doc.setdefault("label", f"record{lineno}")
        records.append(cert.MomentRecord.from_dict(doc))
    if not records:
        raise ConfigError(f"{path} holds no records")
    return records


def cmd_certify(args) -> int:
    records = read_records(args.records)
    g = args.g if args.g is not None else cert.estimate_gain(records, args.tol)
    result = cert.certify(records, g, args.tol)
    sys.stdout.write(dumps(result.to_dict()) + "\n")
    if result.verdict == cert.NOT_SIMULABLE:
        return EXIT_NOT_SIMULABLE
    if result.verdict == cert.INCONSISTENT_GAIN:
        return EXIT_PHYSICS
    return EXIT_OK


def parse_grid(text: str) -> list:
    """``"0,1,2.5"`` or ``"start:stop:step"`` (stop included when hit)."""
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0:
                raise ValueError("step must be positive")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [start + i * step for i in range(count)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}: {exc}") from None


def cmd_scan_region(args) -> int:
    grid = parse_grid(args.grid)
    bbdag = parse_grid(args.bbdag)
    if not grid or not bbdag:
        raise ConfigError("grid and bbdag lists must be nonempty")
    table = cert.forbidden_region(args.gamma, args.t, grid, bbdag)
    header = table.header()
    sims = None
    if args.simulate:
        if any(n != int(n) for n in grid):
            raise ConfigError("--simulate needs integer photon numbers in the grid (Fock inputs)")
        cfg = EvolveConfig(method="bdf", tail_tol=args.tail_tol)
        spec = to_spec(kind_from_dict({"kind": "A3", "gamma": args.gamma}))
        sims = []
        for n in grid:
            rho = make_state(StateSpec.fock(int(n)), max(8, int(n) + 4))
            sims.append(moment_trajectory(rho, spec, [args.t], cfg, dim=args.dim)[0])
        header = header + ["sim_n", "sim_tail_mass"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for i, (n_in, lb, lines) in enumerate(table.rows):
        row = [n_in, lb, *lines, *table.n_star]
        if sims is not None:
            row += [sims[i].mean_n, sims[i].tail_mass]
        w.writerow([fmt(v) for v in row])
    emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_trajectories(args) -> int:
    config = load_config(args.config, args.set, TRAJECTORIES_SCHEMA)
    _, spec = _generator(config)
    psi0 = pure_state_vector(StateSpec.from_dict(config["state"]), config["dim"])
    keys = ("max_jumps", "tail_tol", "norm_threshold_sampling", "dt", "workers")
    cfg = TrajectoryConfig(config["n_traj"], config["seed"], config["t"],
                           **{k: config[k] for k in keys if k in config})
    log = [] if config.get("jump_log") else None
    stats = run_trajectories(spec, psi0, cfg, jump_log=log)
    if log is not None:
        write_atomic(config["jump_log"], "".join(dumps(e) + "\n" for e in log))
    emit(dumps(stats.to_dict()) + "\n", config.get("output"))
    return EXIT_OK


def cmd_phase_check(args) -> int:
    config = load_config(args.config, args.set, PHASE_SCHEMA)
    kind, spec = _generator(config)
    cfg = _evolve_cfg(config)
    state = StateSpec.from_dict(config["state"])
    rho = make_state(state, config["dim"])
    phis = [float(p) for p in config["phis"]]
    t = config["t"]
    residuals = [phase_covariance_residual(spec, rho, phi, t, cfg) for phi in phis]
    gains, noise = phase_insensitivity_report(spec, rho, t, phis, cfg, dim=config.get("moment_dim"))
    defined = [g for g in gains if not math.isnan(g)]
    report = {
        "t": t,
        "covariance": [{"phi": p, "residual": r} for p, r in zip(phis, residuals)],
        "max_residual": max(residuals),
        "insensitivity": [{"phi": p, "g": g, "N": n} for p, g, n in zip(phis, gains, noise)],
        "g_spread": max(defined) - min(defined),
        "N_spread": max(noise) - min(noise),
        "variance_reading": "Var x_phi(t) = g^2 Var x_phi(0) + N",
    }
    if isinstance(kind, A2):
        g = gain(kind, t)
        report["N_reference"] = g * g * (g * g - 1) * (moments(rho).mean_n + 0.5)
    emit(dumps(report) + "\n", config.get("output"))
    return EXIT_OK


def cmd_predict(args) -> int:
    config = load_config(args.config, args.set, PREDICT_SCHEMA)
    a = config["in_amp"]
    in_amp = complex(a[0], a[1]) if isinstance(a, list) else complex(a)
    if "paramp" in config:
        ps = ParampSpec.from_dict(config["paramp"])
        amp, n = paramp_predict(in_amp, config["in_n"], ps)
        out = {"model": "paramp", "G": ps.G, "mean_amp": [amp.real, amp.imag], "mean_n": n,
               "mean_n_is_lower_bound": False}
    else:
        kind = kind_from_dict(config["amplifier"])
        p = predict_moments(kind, config["t"], in_amp, config["in_n"])
        amp = complex(p.mean_amp)
        out = {"model": kind_to_dict(kind), "gain": p.gain, "mean_amp": [amp.real, amp.imag],
               "mean_n": p.mean_n, "mean_n_is_lower_bound": p.is_lower_bound}
    emit(dumps(out) + "\n", config.get("output"))
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linamp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", nargs="?", help="JSON config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config entry; dotted keys reach nested objects")
        p.set_defaults(func=func)
        return p

    with_config("evolve", cmd_evolve, "moments of an evolved state, one CSV row per time")
    with_config("trajectories", cmd_trajectories, "quantum-jump estimate of <n> and <a>")
    with_config("phase-check", cmd_phase_check, "phase covariance and insensitivity report")
    with_config("predict", cmd_predict, "closed-form moments of an amplifier or paramp")

    p = sub.add_parser("certify", help="paramp-simulability test on JSON-lines records")
    p.add_argument("records")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--g", type=float, default=None, help="gain; estimated from the records when omitted")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("scan-region", help="three-photon bound against paramp lines, as CSV")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--grid", required=True, help="photon numbers: 'a,b,c' or 'start:stop:step'")
    p.add_argument("--bbdag", required=True, help="idler <b b^+> values, same syntax")
    p.add_argument("--out", default=None)
    p.add_argument("--simulate", action="store_true", help="add simulated three-photon <n> per Fock input")
    p.add_argument("--dim", type=int, default=131072)
    p.add_argument("--tail-tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_scan_region)
    return parser


def _error(exc, code) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("tail_mass", "dim"):
        if getattr(exc, attr, None) is not None:
            payload[attr] = getattr(exc, attr)
    sys.stderr.write(dumps(payload) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        return _error(exc, EXIT_CONFIG)
    except LinampError as exc:
        return _error(exc, EXIT_PHYSICS)


if __name__ == "__main__":
    sys.exit(main())
