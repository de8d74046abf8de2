"""Command-line front end: ``csym-rd <command> [options]``.

Options may also come from a flat JSON file given with ``--config``; flags
override the file, which overrides the built-in defaults.  Exit codes: 0
success, 1 a verdict ``Fails`` or a residual above its tolerance, 2 usage
errors, 3 other library errors.  Errors are reported on stderr as a single
JSON line.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from .catalog import OPERATOR_IDS, PAIRING, SCHEMA, DESCRIPTIONS, catalog_operator, catalog_system
from .catalog import resolve_params
from .errors import CsymError, InvalidParams, UsageError

MODEL_KEYS = {
    "beta": float, "kappa": float, "mu": float, "alpha": float, "alpha1": float,
    "alpha2": float, "alpha1s": float, "alpha2s": float, "k": float, "delta2": float,
    "d1": str, "sign": float, "u0": float, "h0": float, "h0prime": float, "u_min": float,
    "u_max": float, "variant": str,
}
FAMILY_EXTRA = {"lambda1": float, "t0": float}

COMMANDS = {
    "catalog list": {"format": "json"},
    "certify": {"system": None, "operator": None, "samples": 200, "seed": None, "tol": 1e-9,
                "out": None},
    "reduce": {"system": None, "ansatz": None, "points": 100, "seed": None, "tol": 1e-10,
               "out": None},
    "integrate": {"system": None, "ansatz": None, "phi0": 1.0, "psi0": 1.0, "t_start": 0.0,
                  "t_end": 1.0, "rtol": 1e-9, "atol": 1e-12, "out": None},
    "exact eval": {"family": "C14", "t": "0.0", "x": "0.0", "tol": 1e-9, "out": None},
    "classify": {"alpha1s": None, "alpha2s": None, "kappa": None, "k": None, "t0": None},
    "simulate": {"system": "S-c13", "family": "C14", "n": 128, "x_left": 0.0, "x_right": 0.5,
                 "t_start": 0.0, "t_end": 0.25, "cfl": 0.9, "snapshots": None,
                 "engine": "auto", "out": None},
    "convergence": {"system": "S-c13", "family": "C14", "grids": "64,128,256", "x_left": 0.0,
                    "x_right": 0.5, "t_start": 0.0, "t_end": 0.25, "cfl": 0.9,
                    "order_min": 1.9, "order_max": 2.1, "engine": "auto", "out": None},
}
TYPES = {"samples": int, "points": int, "seed": int, "n": int, "tol": float, "phi0": float,
         "psi0": float, "t_start": float, "t_end": float, "rtol": float, "atol": float,
         "x_left": float, "x_right": float, "cfl": float, "order_min": float,
         "order_max": float}
WITH_MODEL = {"certify", "reduce", "integrate", "exact eval", "simulate", "convergence"}
BENCHMARK = {"beta": 2.0, "k": 1.0, "alpha1s": 3.0, "alpha2s": 3.0, "t0": -1.0}


@dataclass
class RunConfig:
    """Resolved parameters of one command."""

    command: str
    values: dict
    model: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"command": self.command, **self.values, "params": self.model}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _keys(command):
    keys = dict(COMMANDS[command])
    if command in WITH_MODEL:
        keys.update({k: None for k in MODEL_KEYS})
        if command in ("exact eval", "simulate", "convergence"):
            keys.update({k: None for k in FAMILY_EXTRA})
    return keys


def _add_options(p, command):
    p.add_argument("--config", default=argparse.SUPPRESS, help="flat JSON file of options")
    for key in _keys(command):
        if command == "catalog list" and key == "format":
            p.add_argument("--format", choices=("json", "text"), default=argparse.SUPPRESS)
            continue
        typ = TYPES.get(key) or MODEL_KEYS.get(key) or FAMILY_EXTRA.get(key) or str
        if command == "classify":
            typ = float
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="csym-rd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    cat = sub.add_parser("catalog", help="browse the catalogue")
    catsub = cat.add_subparsers(dest="action", required=True)
    _add_options(catsub.add_parser("list", help="list catalogued systems and operators"),
                 "catalog list")
    ex = sub.add_parser("exact", help="exact solution families")
    exsub = ex.add_subparsers(dest="action", required=True)
    _add_options(exsub.add_parser("eval", help="evaluate a family and its residual"), "exact eval")
    helps = {"certify": "certify a (system, operator) pair",
             "reduce": "validate an ansatz reduction", "integrate": "integrate a reduced system",
             "classify": "blow-up regime of the exact family",
             "simulate": "finite-difference run of a physical system",
             "convergence": "grid refinement study against an exact family"}
    for name, text in helps.items():
        _add_options(sub.add_parser(name, help=text), name)
    return parser


def _load_file(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"--config: invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("--config: the file must hold a JSON object")
    return data


def _coerce(key, val, command):
    typ = TYPES.get(key) or MODEL_KEYS.get(key) or FAMILY_EXTRA.get(key)
    if command == "classify":
        typ = float
    if val is None or typ is None:
        return val
    try:
        return typ(val)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"--{key.replace('_', '-')}: expected {typ.__name__}, got {val!r}") from exc


def parse_config(argv, file: str | None = None) -> RunConfig:
    """Parse flags, merge ``--config`` (or ``file``) and defaults, and validate.

    Raises
    ------
    UsageError
        Unknown flag or file key, missing required option or invalid parameters.
    """
    ns = build_parser().parse_args(list(argv))
    command = ns.command + (f" {ns.action}" if getattr(ns, "action", None) else "")
    flags = {k: val for k, val in vars(ns).items() if k not in ("command", "action")}
    path = flags.pop("config", file)
    keys = _keys(command)
    values = dict(keys)
    if path is not None:
        data = _load_file(path)
        unknown = sorted(set(data) - set(keys))
        if unknown:
            raise UsageError(f"--config: unknown key(s) {unknown} for {command}")
        values.update({k: _coerce(k, val, command) for k, val in data.items()})
    values.update(flags)
    model = {k: values.pop(k) for k in list(values)
             if (k in MODEL_KEYS or k in FAMILY_EXTRA) and command != "classify"}
    model = {k: val for k, val in model.items() if val is not None}
    if "seed" in values and values["seed"] is None:
        from .symmetry import default_seed
        values["seed"] = default_seed()
    cfg = RunConfig(command, values, model)
    _validate(cfg)
    return cfg


def _require(cfg, key, choices=None):
    val = cfg.values.get(key)
    if val is None:
        hint = f"; one of: {', '.join(choices)}" if choices else ""
        raise UsageError(f"--{key.replace('_', '-')} is required{hint}")
    if choices is not None and val not in choices:
        raise UsageError(f"--{key.replace('_', '-')}: unknown value {val!r}; one of: {', '.join(choices)}")


def _system_params(system_id, model, flag_prefix="--"):
    allowed = set(SCHEMA[system_id])
    extra = sorted(set(model) - allowed - set(FAMILY_EXTRA))
    if extra:
        raise UsageError(f"{flag_prefix}{extra[0].replace('_', '-')} does not apply to {system_id}; "
                         f"parameters: {sorted(allowed)}")
    params = {k: val for k, val in model.items() if k in allowed}
    try:
        resolve_params(system_id, params)
    except InvalidParams as exc:
        raise UsageError(f"invalid parameters for {system_id}: {exc}") from exc
    return params


def _validate(cfg: RunConfig) -> None:
    c, v = cfg.command, cfg.values
    ids = tuple(SCHEMA)
    if c in ("certify", "reduce", "integrate"):
        _require(cfg, "system", ids)
        _system_params(v["system"], cfg.model)
    if c == "certify" and v["operator"] is not None:
        _require(cfg, "operator", OPERATOR_IDS)
    if c == "classify":
        for key in ("alpha1s", "alpha2s", "kappa", "k", "t0"):
            _require(cfg, key)
    if c in ("simulate", "convergence"):
        _require(cfg, "system", ("S-c13",))
        _require(cfg, "family", ("C14", "PlaneWaveUV"))
        _require(cfg, "engine", ("auto", "numba", "numpy"))
    if c == "exact eval":
        _require(cfg, "family", ("C9", "C14", "PlaneWave", "PlaneWaveUV"))
    for key in ("samples", "points", "n"):
        if key in v and v[key] is not None and v[key] <= 0:
            raise UsageError(f"--{key} must be positive")


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

def _emit(cfg: RunConfig, text: str, stdout) -> None:
    path = cfg.values.get("out")
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        stdout.write(text)


def _csv_header(cfg: RunConfig) -> str:
    return f"# config: {json.dumps(cfg.to_dict(), sort_keys=True)}\n"


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _floats(text, name):
    try:
        return [float(s) for s in str(text).split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(f"--{name}: expected comma-separated numbers, got {text!r}") from exc


def _cmd_catalog(cfg, out):
    rows = [{"id": sid, "kind": "system", "defaults": {k: val for k, val in SCHEMA[sid].items()},
             "description": DESCRIPTIONS.get(sid, ""), "operator": PAIRING.get(sid)}
            for sid in SCHEMA]
    rows += [{"id": oid, "kind": "operator"} for oid in OPERATOR_IDS]
    if cfg.values["format"] == "text":
        lines = [f"{r['id']:<14} {r['kind']:<9} {r.get('description', '')}" for r in rows]
        out.write("\n".join(lines) + "\n")
    else:
        out.write(_json({"catalog": rows}))
    return 0


def _cmd_certify(cfg, out):
    from .symmetry import certify
    v = cfg.values
    params = _system_params(v["system"], cfg.model)
    sys_ = catalog_system(v["system"], params)
    op_id = v["operator"] or PAIRING[v["system"]]
    Q = catalog_operator(op_id, system=sys_)
    rep = certify(sys_, Q, n=v["samples"], seed=v["seed"], tol=v["tol"])
    _emit(cfg, _json({"config": cfg.to_dict(), "report": rep.to_dict()}), out)
    return 1 if rep.verdict == "Fails" else 0


def _reduction_triple(cfg):
    from .reduction import build_ansatz, reduce
    v = cfg.values
    sid = v["system"]
    params = _system_params(sid, cfg.model)
    sys_ = catalog_system(sid, params)
    ans_id = v["ansatz"]
    if ans_id is None:
        if sid == "T1-II":
            row = {("exp", True): 1, ("exp", False): 2, ("power", True): 3, ("power", False): 4}
            full = resolve_params("T1-II", params)
            ans_id = f"table1-row{row[(full['d1'], full['mu'] > 0)]}"
        else:
            ans_id = "c3"
    full = resolve_params(sid, params)
    p = {k: full[k] for k in ("d1", "beta", "mu", "alpha") if k in full}
    ans = build_ansatz(ans_id, p)
    return sys_, ans, reduce(sys_, ans)


def _cmd_reduce(cfg, out):
    from .reduction import reduction_residual
    v = cfg.values
    sys_, ans, ode = _reduction_triple(cfg)
    rng = np.random.Generator(np.random.PCG64(v["seed"]))
    lo, hi = ans.x_domain
    lo, hi = max(lo, -1.0), min(hi, 1.0)
    pad = 1e-3 * (hi - lo)
    n = v["points"]
    xs = rng.uniform(lo + pad, hi - pad, n)
    ph, ps = rng.uniform(0.5, 2.0, n), rng.uniform(0.5, 2.0, n)
    ts = rng.uniform(0.0, 1.0, n)
    r1, r2 = reduction_residual(sys_, ans, ode, ts, xs, ph, ps, normalized=True)
    worst = float(max(np.max(r1), np.max(r2)))
    rep = {"config": cfg.to_dict(), "system": sys_.catalog_id, "ansatz": ans.ansatz_id,
           "ode": {"kind": ode.kind, "coeffs": ode.coeffs, "beta": ode.beta},
           "max_residual": worst, "tol": v["tol"],
           "sampler": {"generator": "PCG64", "seed": v["seed"]}, "passed": worst < v["tol"]}
    _emit(cfg, _json(rep), out)
    return 0 if worst < v["tol"] else 1


def _cmd_integrate(cfg, out):
    from .ode import write_trajectory_csv
    from .reduction import integrate
    v = cfg.values
    _, _, ode = _reduction_triple(cfg)
    tr = integrate(ode, (v["phi0"], v["psi0"]), (v["t_start"], v["t_end"]), v["rtol"], v["atol"])
    buf = io.StringIO()
    buf.write(_csv_header(cfg))
    buf.write(f"# termination: {tr.termination}"
              + (f" t_star={tr.t_star:.17g}" if tr.t_star is not None else "") + "\n")
    write_trajectory_csv(buf, tr)
    _emit(cfg, buf.getvalue(), out)
    return 0


def _family(cfg, default_benchmark=False):
    from .exact import make_family
    model = dict(cfg.model)
    fid = cfg.values["family"]
    variant = model.pop("variant", "verified")
    if default_benchmark:
        base = dict(BENCHMARK)
        if "kappa" in model:
            base.pop("beta")
        if "alpha1" in model:
            base.pop("alpha1s")
        if "alpha2" in model:
            base.pop("alpha2s")
        model = {**base, **model}
    if fid in ("PlaneWave", "PlaneWaveUV"):
        model = {k: val for k, val in model.items() if k in ("beta", "alpha1", "alpha2", "lambda1")}
    try:
        return make_family(fid, model, variant) if fid == "C14" else make_family(fid, model)
    except InvalidParams as exc:
        raise UsageError(f"invalid family parameters: {exc}") from exc


def _cmd_exact(cfg, out):
    from .exact import eval_family, solution_residual
    v = cfg.values
    fam = _family(cfg)
    ts, xs = _floats(v["t"], "t"), _floats(v["x"], "x")
    T, X = (a.ravel() for a in np.meshgrid(ts, xs, indexing="ij"))
    vals = eval_family(fam, T, X)
    r1, r2 = solution_residual(None, fam, T, X)
    worst = float(max(np.max(r1), np.max(r2)))
    a, b = fam.names
    buf = io.StringIO()
    buf.write(_csv_header(cfg))
    buf.write(f"t,x,{a},{b},residual1,residual2\n")
    for row in zip(T, X, vals[a], vals[b], r1, r2):
        buf.write(",".join(f"{z:.17g}" for z in row) + "\n")
    _emit(cfg, buf.getvalue(), out)
    return 0 if worst < v["tol"] else 1


def _cmd_classify(cfg, out):
    from .exact import classify_regime
    v = cfg.values
    reg = classify_regime(v["alpha1s"], v["alpha2s"], v["kappa"], v["k"], v["t0"])
    out.write(reg.value + "\n")
    return 0


def _cmd_simulate(cfg, out):
    from .pdelab import DirichletExact, GridField, error_vs_exact, simulate
    v = cfg.values
    fam = _family(cfg, default_benchmark=True)
    snaps = None if v["snapshots"] is None else _floats(v["snapshots"], "snapshots")
    ic = GridField.from_family(fam, (v["x_left"], v["x_right"]), v["n"], v["t_start"])
    res = simulate(fam.system(), ic, DirichletExact(fam), v["t_end"], v["cfl"], snaps, v["engine"])
    errs = error_vs_exact(res.snapshots, fam)
    buf = io.StringIO()
    buf.write(_csv_header(cfg))
    buf.write("t,x,U,V\n")
    for s in res.snapshots:
        for xi, a, b in zip(s.x, s.U, s.V):
            buf.write(f"{s.t:.17g},{xi:.17g},{a:.17g},{b:.17g}\n")
    _emit(cfg, buf.getvalue(), out)
    summary = {"steps": res.n_steps, "max_dt_ratio": res.max_dt_ratio, "engine": res.engine,
               "errors": errs}
    (sys.stderr if not v["out"] else out).write(_json(summary))
    return 0


def _cmd_convergence(cfg, out):
    from .pdelab import convergence_study
    v = cfg.values
    fam = _family(cfg, default_benchmark=True)
    grids = [int(g) for g in _floats(v["grids"], "grids")]
    study = convergence_study(fam.system(), fam, grids, (v["x_left"], v["x_right"]),
                              v["t_start"], v["t_end"], v["cfl"], v["engine"])
    ok = v["order_min"] <= study.order <= v["order_max"]
    body = study.to_dict()
    body["study"] = body.pop("config")
    rep = {"config": cfg.to_dict(), **body, "order_band": [v["order_min"], v["order_max"]],
           "passed": ok}
    _emit(cfg, _json(rep), out)
    return 0 if ok else 1


HANDLERS = {"catalog list": _cmd_catalog, "certify": _cmd_certify, "reduce": _cmd_reduce,
            "integrate": _cmd_integrate, "exact eval": _cmd_exact, "classify": _cmd_classify,
            "simulate": _cmd_simulate, "convergence": _cmd_convergence}


def execute(cfg: RunConfig, stdout=None) -> int:
    """Run a parsed command; returns the exit code."""
    return HANDLERS[cfg.command](cfg, stdout or sys.stdout)


def _error_record(exc, code):
    return json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code})


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
        code = execute(cfg)
    except UsageError as exc:
        print(_error_record(exc, 2), file=sys.stderr)
        return 2
    except CsymError as exc:
        print(_error_record(exc, 3), file=sys.stderr)
        return 3
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
