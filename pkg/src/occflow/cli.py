"""``occflow`` command line.

Subcommands: simulate, price, replicate, lov-sim, stop, converge-eps, reproduce.
Exit codes: 0 success, 1 reproduction mismatch, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, constants
from .errors import ConfigurationError, DomainError, OccflowError
from .lov import (
    EmaSensitivity,
    LovConfig,
    OneFactorSensitivity,
    TanhSensitivity,
    ZeroSensitivity,
    simulate_lov,
)
from .occupation import Clock, make_grid, write_occupation_csv
from .pricing import (
    AsianFloatingCall,
    CorridorVarFloatingLeg,
    LookbackFloatingCall,
    OptionSurface,
    ParisianUpOutAssetOrNothing,
    RangeAccrual,
    TimerCall,
    VanillaCall,
    VanillaPut,
    bl_occupation_strike,
    mc_price,
    read_quotes_csv,
)
from .rng import set_default_workers
from .sde import ConstantVol, GuyonToyVol, LocalVol, SimConfig, euler_occupied, read_local_vol_csv, simulate_bm
from .stopping import analytic_euro_value, eps_sweep, inspection_value, lsmc_value, two_date_value

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


# key-value config files


def parse_keyfile(text: str, source="<config>") -> dict:
    """Parse ``key = value`` lines; ``[section]`` headers prefix keys with ``section.``.

    ``#`` starts a comment.  Values are kept as strings; typing happens
    against a schema.
    """
    out = {}
    prefix = ""
    for k, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            prefix = line[1:-1].strip() + "."
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{k}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = prefix + key
        if key in out:
            raise ConfigurationError(f"{source}:{k}: duplicate key {key!r}")
        out[key] = value.strip("'\"")
    return out


def _to_bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


_TYPES = {"float": float, "int": int, "bool": _to_bool, "str": str}


def resolve(schema: dict, file_values: dict, flag_values: dict, source="<config>") -> dict:
    """Merge defaults < config file < flags, rejecting unknown keys and bad types."""
    unknown = sorted(set(file_values) - set(schema))
    if unknown:
        raise ConfigurationError(f"{source}: unknown key(s) {', '.join(unknown)}; allowed: {', '.join(sorted(schema))}")
    out = {}
    for key, (kind, default) in schema.items():
        value = default
        if key in file_values:
            value = file_values[key]
        if flag_values.get(key) is not None:
            value = flag_values[key]
        if value is not None:
            try:
                value = _TYPES[kind](value)
            except (TypeError, ValueError):
                raise ConfigurationError(f"{key}: expected {kind}, got {value!r}") from None
        out[key] = value
    return out


def _load(path):
    if path is None:
        return {}
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_keyfile(text, str(p))


def _seed(flag_seed, values):
    """Seed precedence: flag > ``OCCFLOW_SEED`` > config file > default."""
    if flag_seed is not None:
        return flag_seed
    env = os.environ.get("OCCFLOW_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigurationError(f"OCCFLOW_SEED must be an integer, got {env!r}") from None
    return values


def _config_hash(command, params):
    canon = command + "\n" + "\n".join(f"{k}={params[k]!r}" for k in sorted(params))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _header(command, params, seed):
    lines = [f"# occflow {__version__} seed={seed} config_hash={_config_hash(command, params)}", f"# command={command}"]
    lines += [f"# {k}={params[k]}" for k in sorted(params)]
    return "\n".join(lines) + "\n"


def _emit(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _summary(msg):
    print(msg, file=sys.stderr)


def _parse_list(text, kind=float, name="list"):
    try:
        return [kind(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"{name}: expected a comma-separated list, got {text!r}") from None


def _grid(spec, x0):
    if spec is None:
        span = abs(x0) / 2 if x0 != 0 else 3.0
        return make_grid(x0, span, 41)
    parts = _parse_list(spec, float, "grid")
    if len(parts) != 3:
        raise ConfigurationError(f"grid: expected center,span,bins, got {spec!r}")
    c, s, b = parts
    if b != int(b):
        raise ConfigurationError("grid: bin count must be an integer")
    return make_grid(c, s, int(b))


def _fmt(x):
    return repr(float(x))


# model construction

_SIM_SCHEMA = {
    "sim.t": ("float", 1.0),
    "sim.steps": ("int", 100),
    "sim.paths": ("int", 1000),
    "sim.seed": ("int", 0),
    "sim.x0": ("float", 100.0),
    "sim.rate": ("float", 0.0),
    "sim.dividend": ("float", 0.0),
    "sim.antithetic": ("bool", False),
    "grid.center": ("float", None),
    "grid.span": ("float", None),
    "grid.bins": ("int", 41),
}

_LOV_SCHEMA = {
    **_SIM_SCHEMA,
    "sigma_loc": ("str", None),
    "sigma_loc.constant": ("float", None),
    "ell.kind": ("str", "zero"),
    "ell.beta": ("float", 0.0),
    "ell.lower": ("float", -math.inf),
    "ell.upper": ("float", math.inf),
    "ell.scale": ("float", None),
    "ell.alpha": ("float", 5.0),
    "kappa": ("float", 12.0),
    "multiplicative": ("bool", False),
    "bandwidth.kappa_b": ("float", 1.5),
    "bandwidth.exponent": ("float", -0.2),
    "var_floor": ("float", 1e-8),
}


def _lov_from(values, base_dir):
    if values["sigma_loc"] is not None:
        path = Path(values["sigma_loc"])
        if not path.is_absolute():
            path = base_dir / path
        table = read_local_vol_csv(path)
        sigma_loc, floor = table, table.floor
    elif values["sigma_loc.constant"] is not None:
        s0 = values["sigma_loc.constant"]
        if not s0 > 0:
            raise ConfigurationError("sigma_loc.constant must be positive")
        sigma_loc, floor = (lambda t, x: np.full(np.shape(x), s0)), s0
    else:
        raise ConfigurationError("LOV config needs sigma_loc (CSV file) or sigma_loc.constant")
    kind = values["ell.kind"]
    if kind == "zero":
        ell = ZeroSensitivity()
    elif kind == "one_factor":
        ell = OneFactorSensitivity(values["ell.beta"], values["ell.lower"], values["ell.upper"])
    elif kind == "ema":
        ell = EmaSensitivity(values["ell.beta"])
    elif kind == "tanh":
        scale = values["ell.scale"] if values["ell.scale"] is not None else 0.25 * floor**2
        ell = TanhSensitivity(scale, values["ell.alpha"])
    else:
        raise ConfigurationError(f"ell.kind: expected zero, one_factor, ema or tanh, got {kind!r}")
    return LovConfig(
        sigma_loc, ell, values["kappa"], values["multiplicative"],
        values["bandwidth.kappa_b"], values["bandwidth.exponent"], values["var_floor"],
    )


def _sim_from(values, seed, clock=None):
    x0 = values["sim.x0"]
    center = values["grid.center"] if values["grid.center"] is not None else x0
    span = values["grid.span"] if values["grid.span"] is not None else (abs(x0) / 2 if x0 else 3.0)
    return SimConfig(
        values["sim.t"], values["sim.steps"], values["sim.paths"], seed, values["sim.antithetic"],
        values["sim.rate"], values["sim.dividend"], x0, clock or Clock.calendar(),
        make_grid(center, span, values["grid.bins"]),
    )


def _paths_csv(ens, max_paths=None):
    buf = io.StringIO()
    buf.write("path,step,time,level,vol\n")
    J = ens.n_paths if max_paths is None else min(max_paths, ens.n_paths)
    N = ens.levels.shape[1] - 1
    for j in range(J):
        for n in range(N + 1):
            vol = _fmt(ens.vols[j, n]) if n < N else ""
            buf.write(f"{j},{n},{_fmt(ens.times[n])},{_fmt(ens.levels[j, n])},{vol}\n")
    return buf.getvalue()


# subcommands


def cmd_simulate(a):
    x0 = a.x0 if a.x0 is not None else (0.0 if a.model == "bm" else 100.0)
    params = dict(model=a.model, t=a.t, steps=a.steps, paths=a.paths, x0=x0, kappa=a.kappa,
                  sigma=a.sigma, rate=a.rate, dividend=a.dividend, grid=a.grid, antithetic=a.antithetic)
    seed = _seed(a.seed, 0)
    clock = Clock.exponential(a.kappa) if a.kappa > 0 else Clock.calendar()
    cfg = SimConfig(a.t, a.steps, a.paths, seed, a.antithetic, a.rate, a.dividend, x0, clock, _grid(a.grid, x0))
    t0 = time.perf_counter()
    if a.model == "bm":
        ens = simulate_bm(cfg)
    elif a.model == "gbm":
        ens = euler_occupied(cfg, ConstantVol(a.sigma))
    elif a.model == "guyon":
        ens = euler_occupied(cfg, GuyonToyVol(2.1, 1.2, 1.9, x0))
    else:
        if a.config is None:
            raise ConfigurationError("--model lov needs --config with the LOV keys")
        values = resolve(_LOV_SCHEMA, _load(a.config), {}, a.config)
        params.update({f"lov.{k}": v for k, v in values.items() if not k.startswith(("sim.", "grid."))})
        ens = simulate_lov(cfg, _lov_from(values, Path(a.config).parent)).ensemble
    text = _header("simulate", params, seed) + _paths_csv(ens)
    _emit(text, a.out)
    if a.occupation_out:
        _emit(_header("simulate", params, seed) + write_occupation_csv(ens.occupation[a.occupation_path], None), a.occupation_out)
    xT = ens.levels[:, -1]
    _summary(f"simulate: {ens.n_paths} paths, mean X_T = {xT.mean():.6g}, {time.perf_counter() - t0:.2f}s")
    return EXIT_OK


_PAYOFF_SCHEMA = {
    "kind": ("str", None),
    "strike": ("float", None),
    "lower": ("float", -math.inf),
    "upper": ("float", math.inf),
    "coupon": ("float", 1.0),
    "barrier": ("float", None),
    "window": ("float", None),
    "budget": ("float", None),
}


def _payoff_from(v):
    kind = v["kind"]

    def need(*keys):
        missing = [k for k in keys if v[k] is None]
        if missing:
            raise ConfigurationError(f"payoff {kind} needs key(s) {', '.join(missing)}")

    if kind == "AsianFloatingCall":
        return AsianFloatingCall()
    if kind == "LookbackFloatingCall":
        return LookbackFloatingCall()
    if kind == "RangeAccrual":
        return RangeAccrual(v["lower"], v["upper"], v["coupon"])
    if kind == "ParisianUpOutAssetOrNothing":
        need("barrier", "window")
        return ParisianUpOutAssetOrNothing(v["barrier"], v["window"])
    if kind == "CorridorVarFloatingLeg":
        return CorridorVarFloatingLeg(v["lower"], v["upper"])
    if kind == "TimerCall":
        need("budget", "strike")
        return TimerCall(v["budget"], v["strike"])
    if kind == "VanillaCall":
        need("strike")
        return VanillaCall(v["strike"])
    if kind == "VanillaPut":
        need("strike")
        return VanillaPut(v["strike"])
    raise ConfigurationError(f"payoff kind: unknown or missing ({kind!r})")


def cmd_price(a):
    pv = resolve(_PAYOFF_SCHEMA, _load(a.payoff), {}, a.payoff)
    spec = _payoff_from(pv)
    seed = _seed(a.seed, 0)
    params = dict(model=a.model, t=a.t, steps=a.steps, paths=a.paths, x0=a.x0, sigma=a.sigma,
                  rate=a.rate, dividend=a.dividend, kappa=a.kappa, grid=a.grid,
                  **{f"payoff.{k}": v for k, v in pv.items()})
    clock = Clock.exponential(a.kappa) if a.kappa > 0 else Clock.calendar()
    cfg = SimConfig(a.t, a.steps, a.paths, seed, a.paths % 2 == 0, a.rate, a.dividend, a.x0, clock, _grid(a.grid, a.x0))
    record = ("calendar", "quadratic")
    t0 = time.perf_counter()
    if a.model == "gbm":
        ens = euler_occupied(cfg, ConstantVol(a.sigma), record=record)
    elif a.model == "guyon":
        ens = euler_occupied(cfg, GuyonToyVol(2.1, 1.2, 1.9, a.x0), record=record)
    elif a.model == "local":
        if a.sigma_loc is None:
            raise ConfigurationError("--model local needs --sigma-loc table.csv")
        ens = euler_occupied(cfg, LocalVol(read_local_vol_csv(a.sigma_loc)), record=record)
    else:
        if a.config is None:
            raise ConfigurationError("--model lov needs --config with the LOV keys")
        values = resolve(_LOV_SCHEMA, _load(a.config), {}, a.config)
        ens = simulate_lov(cfg, _lov_from(values, Path(a.config).parent), record=record).ensemble
    est = mc_price(spec, ens)
    text = _header("price", params, seed) + "payoff,value,stderr,n_paths,seed\n"
    text += f"{pv['kind']},{_fmt(est.value)},{_fmt(est.stderr)},{est.n_paths},{seed}\n"
    _emit(text, a.out)
    _summary(f"price: {pv['kind']} = {est.value:.6g} +/- {est.stderr:.2g}, {time.perf_counter() - t0:.2f}s")
    return EXIT_OK


def cmd_replicate(a):
    quotes = read_quotes_csv(a.quotes)
    bounds = _parse_list(a.corridor, float, "--corridor")
    if len(bounds) != 2:
        raise ConfigurationError(f"--corridor expects x1,x2, got {a.corridor!r}")
    lo, hi = bounds
    surface = OptionSurface.from_quotes(quotes, a.spot, a.rate, a.dividend)
    occ = bl_occupation_strike(surface, lo, hi, a.maturity)
    params = dict(quotes=str(a.quotes), lower=lo, upper=hi, maturity=a.maturity, spot=a.spot, rate=a.rate, dividend=a.dividend)
    text = _header("replicate", params, "none") + "lower,upper,maturity,expected_occupation,variance_strike\n"
    text += f"{_fmt(lo)},{_fmt(hi)},{_fmt(a.maturity)},{_fmt(occ)},{_fmt(occ / a.maturity)}\n"
    _emit(text, a.out)
    _summary(f"replicate: E[O_T([{lo}, {hi}])] = {occ:.6g}, corridor variance strike^2 = {occ / a.maturity:.6g}")
    return EXIT_OK


def cmd_lov_sim(a):
    values = resolve(_LOV_SCHEMA, _load(a.config), {"sim.seed": a.seed, "sim.paths": a.paths}, a.config)
    seed = _seed(a.seed, values["sim.seed"])
    cfg = _sim_from(values, seed)
    lov = _lov_from(values, Path(a.config).parent)
    t0 = time.perf_counter()
    res = simulate_lov(cfg, lov)
    params = dict(values)
    params["sim.seed"] = seed
    head = _header("lov-sim", params, seed)
    head += f"# positivity={'pass' if res.positivity.passed else 'fail'} worst_ratio={float(res.positivity.worst_ratio)!r} floored={res.n_floored}\n"
    _emit(head + _paths_csv(res.ensemble), a.out)
    _summary(
        f"lov-sim: {cfg.n_paths} particles, positivity {'pass' if res.positivity.passed else 'FAIL'}, "
        f"{res.n_floored} floored variances, {time.perf_counter() - t0:.2f}s"
    )
    return EXIT_OK


def _timing_cols(timing, r):
    return f",{r.runtime:.3f}" if timing else ""


def cmd_stop(a):
    seed = _seed(a.seed, 0)
    timing = ",runtime_s" if a.timing else ""
    params = dict(method=a.method, T=a.T, steps=a.steps, eps=a.eps, paths=a.paths)
    if a.method == "two-date":
        ts = _parse_list(a.t, float, "--t")
        params["t"] = a.t
        rows = [("t", t, two_date_value(a.T, t, a.steps, a.eps, a.paths, seed)) for t in ts]
    elif a.method == "inspection":
        iotas = _parse_list(a.iota, float, "--iota")
        params["iota"] = a.iota
        rows = [("iota", i, inspection_value(i, a.T, a.steps, a.eps, a.paths, seed=seed)) for i in iotas]
    else:
        mbars = _parse_list(a.mbar, int, "--mbar")
        params.update(mbar=a.mbar, paths_offline=a.paths_offline)
        params.pop("eps")
        rows = [("mbar", m, lsmc_value(m, a.steps, a.paths_offline, a.paths, a.T, seed)) for m in mbars]
    name = rows[0][0]
    text = _header("stop", params, seed) + f"method,{name},value,mc_error{timing}\n"
    for _, p, r in rows:
        text += f"{a.method},{p},{r.value:.6f},{r.stderr:.6f}{_timing_cols(a.timing, r)}\n"
    _emit(text, a.out)
    for _, p, r in rows:
        _summary(f"stop {a.method} {name}={p}: {r.value:.4f} +/- {r.stderr:.4f} ({r.runtime:.1f}s)")
    return EXIT_OK


def cmd_converge_eps(a):
    seed = _seed(a.seed, 0)
    eps = _parse_list(a.eps, float, "--eps")
    params = dict(strategy=a.strategy, eps=a.eps, T=a.T, steps=a.steps, paths=a.paths, iota=a.iota)
    res = eps_sweep(a.strategy, eps, a.T, a.steps, a.paths, seed, a.iota)
    ref = ",reference" if a.strategy == "european" else ""
    text = _header("converge-eps", params, seed) + f"eps,value,mc_error{ref}\n"
    for e, r in zip(eps, res):
        extra = f",{r.extras['reference']:.6f}" if ref else ""
        text += f"{e!r},{r.value:.6f},{r.stderr:.6f}{extra}\n"
    _emit(text, a.out)
    _summary("converge-eps: " + ", ".join(f"{e:g}: {r.value:.4f}" for e, r in zip(eps, res)))
    return EXIT_OK


def _reproduce_rows(target, seed):
    """Rows ``(label, value, mc_error, reference, passed)`` for a reproduction target."""
    tol = constants.TABLE_TOL
    rows = []
    if target == "table1":
        s = constants.TWO_DATE["settings"]
        r = two_date_value(s["T"], s["t"], s["N"], s["eps"], s["J"], seed)
        ref = constants.TWO_DATE["rows"]["{0.5,1}"][0]
        rows.append(("{0.5,1}", r.value, r.stderr, ref, abs(r.value - ref) <= tol))
        v = analytic_euro_value(s["T"])
        ref = constants.TWO_DATE["rows"]["{1}"][0]
        rows.append(("{1}", v, 0.0, ref, abs(v - ref) <= 5e-5))
    elif target == "table2":
        s = constants.INSPECTION["settings"]
        lo, hi, n = s["grid"]
        for iota, (ref, _) in constants.INSPECTION["rows"].items():
            r = inspection_value(iota, s["T"], s["N"], s["eps"], s["J"], np.linspace(lo, hi, n), seed)
            rows.append((f"iota={iota}", r.value, r.stderr, ref, abs(r.value - ref) <= tol))
    elif target == "table3":
        s = constants.LSMC["settings"]
        for mbar, (ref, _) in constants.LSMC["rows"].items():
            r = lsmc_value(mbar, s["N"], s["J_off"], s["J_on"], s["T"], seed)
            rows.append((f"mbar={mbar}", r.value, r.stderr, ref, abs(r.value - ref) <= tol))
    elif target == "eps-curve":
        s = constants.EPS_CURVE["settings"]
        res = eps_sweep("inspection", constants.EPS_CURVE["eps"], s["T"], s["N"], s["J"], seed, s["iota"])
        prev = None
        for e, r in zip(constants.EPS_CURVE["eps"], res):
            ok = prev is None or r.value <= prev.value + 3 * math.hypot(r.stderr, prev.stderr)
            rows.append((f"eps={e}", r.value, r.stderr, math.nan, ok))
            prev = r
    else:
        raise ConfigurationError(f"unknown reproduction target {target!r}")
    return rows


def cmd_reproduce(a):
    seed = _seed(a.seed, 0)
    t0 = time.perf_counter()
    rows = _reproduce_rows(a.target, seed)
    text = _header("reproduce", dict(target=a.target, tolerance=constants.TABLE_TOL), seed)
    text += "row,value,mc_error,reference,diff,status\n"
    for label, v, se, ref, ok in rows:
        diff = v - ref
        text += f"{label},{v:.6f},{se:.6f},{ref:.4f},{diff:+.4f},{'pass' if ok else 'fail'}\n"
    _emit(text, a.out)
    failed = [r for r in rows if not r[4]]
    for label, v, se, ref, ok in rows:
        _summary(f"{a.target} {label}: {v:.4f} +/- {se:.4f} (reference {ref:.4f}) {'pass' if ok else 'FAIL'}")
    _summary(f"reproduce {a.target}: {len(rows) - len(failed)}/{len(rows)} rows pass, {time.perf_counter() - t0:.1f}s")
    return EXIT_MISMATCH if failed else EXIT_OK


# argument parsing


def build_parser():
    p = argparse.ArgumentParser(prog="occflow", description="Occupied-process simulation, pricing and stopping.")
    p.add_argument("--version", action="version", version=f"occflow {__version__}")
    p.add_argument("--threads", type=int, default=None, help="worker threads (results do not depend on it)")
    sub = p.add_subparsers(dest="command", required=True)

    def sim_flags(s, paths=1000, steps=100):
        s.add_argument("--t", type=float, default=1.0, help="horizon in years")
        s.add_argument("--steps", type=int, default=steps)
        s.add_argument("--paths", type=int, default=paths)
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--kappa", type=float, default=0.0, help="exponential clock rate (0: calendar clock)")
        s.add_argument("--grid", default=None, help="center,span,bins")
        s.add_argument("--rate", type=float, default=0.0)
        s.add_argument("--dividend", type=float, default=0.0)
        s.add_argument("--sigma", type=float, default=0.2)
        s.add_argument("--config", default=None, help="LOV key-value file (model lov)")
        s.add_argument("--out", default=None)

    s = sub.add_parser("simulate", help="simulate paths to CSV")
    s.add_argument("--model", choices=["bm", "gbm", "guyon", "lov"], default="gbm")
    s.add_argument("--x0", type=float, default=None)
    s.add_argument("--antithetic", action="store_true")
    s.add_argument("--occupation-out", default=None, help="write one path's terminal occupation here")
    s.add_argument("--occupation-path", type=int, default=0)
    sim_flags(s, paths=10)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("price", help="Monte Carlo price of a payoff")
    s.add_argument("--payoff", required=True, help="payoff key-value file")
    s.add_argument("--model", choices=["gbm", "guyon", "local", "lov"], default="gbm")
    s.add_argument("--sigma-loc", default=None, help="t,x,vol CSV for --model local")
    s.add_argument("--x0", type=float, default=100.0)
    sim_flags(s, paths=2**14)
    s.set_defaults(func=cmd_price)

    s = sub.add_parser("replicate", help="expected corridor occupation from vanilla quotes")
    s.add_argument("--quotes", required=True)
    s.add_argument("--corridor", required=True, help="x1,x2")
    s.add_argument("--maturity", type=float, required=True)
    s.add_argument("--spot", type=float, default=100.0)
    s.add_argument("--rate", type=float, default=0.0)
    s.add_argument("--dividend", type=float, default=0.0)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_replicate)

    s = sub.add_parser("lov-sim", help="particle simulation of the LOV model")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--paths", type=int, default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_lov_sim)

    s = sub.add_parser("stop", help="spot local time stopping strategies")
    s.add_argument("--method", choices=["two-date", "inspection", "lsmc"], required=True)
    s.add_argument("--T", type=float, default=1.0)
    s.add_argument("--t", default="0.5", help="intermediate date(s) for two-date")
    s.add_argument("--iota", default="0.7", help="inspection date(s)")
    s.add_argument("--mbar", default="2", help="truncation radius (radii) for lsmc")
    s.add_argument("--steps", type=int, default=400)
    s.add_argument("--eps", type=float, default=0.05)
    s.add_argument("--paths", type=int, default=2**14)
    s.add_argument("--paths-offline", type=int, default=2**11)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--timing", action="store_true", help="add a runtime column (output no longer byte-stable)")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_stop)

    s = sub.add_parser("converge-eps", help="value as a function of the corridor half-width")
    s.add_argument("--strategy", choices=["european", "inspection"], default="inspection")
    s.add_argument("--eps", default="0.01,0.02,0.05,0.1,0.2")
    s.add_argument("--T", type=float, default=1.0)
    s.add_argument("--iota", type=float, default=0.7)
    s.add_argument("--steps", type=int, default=400)
    s.add_argument("--paths", type=int, default=2**14)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_converge_eps)

    s = sub.add_parser("reproduce", help="rerun a published table and compare")
    s.add_argument("target", choices=["table1", "table2", "table3", "eps-curve"])
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads is not None:
            set_default_workers(args.threads)
        return args.func(args)
    except (ConfigurationError, DomainError) as exc:
        print(f"occflow: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OccflowError, FloatingPointError) as exc:
        print(f"occflow: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    finally:
        set_default_workers(None)


if __name__ == "__main__":
    sys.exit(main())
