"""Command-line interface: price, sweep, swing, classify, validate.

Configuration is a sectioned key-value file (INI style); every key can also
be supplied as a dotted flag, e.g. ``--model.sigma 0.2``, which overrides the
file.  Numeric output uses 12 significant digits with a '.' decimal point so
emitted files diff cleanly across runs.
"""

from __future__ import annotations

import argparse
import configparser
import io
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from .errors import (
    DomainError,
    FinitenessError,
    InvalidParameterError,
    LevyOptStopError,
    MissingPhiError,
    OptimizerError,
)
from .levy import (
    Family,
    JumpSign,
    LevyModel,
    laplace_exponent,
    model_from_rates,
    phi_right_inverse,
    psi_equation_roots,
    sn_exponent,
)
from .mc import McConfig, mc_entrance_value
from .pricing import (
    ContinuationRegion,
    OptionKind,
    OptionSpec,
    Regime,
    classify_region,
    optimize_put_boundaries,
    price_put,
    put_entrance_value,
    put_value_curve,
    smooth_fit_residual,
)
from .scale import laplace_identity_residual
from .swing import Refraction, RefractionKind, SwingSpec, solve_swing
from .symmetry import dual_levy_model, mathring_model, price_call

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FINITENESS = 3
EXIT_OPTIMIZER = 4
EXIT_VALIDATION = 5

_CORRUPT_ENV = "LEVY_OPTSTOP_CORRUPT_BOUNDARY"

_REGIME_LABELS = {
    Regime.NO_EARLY_EXERCISE: "none",
    Regime.SINGLE_HALF_LINE: "single",
    Regime.DOUBLE_REGION: "double",
    Regime.DEGENERATE_POINT: "point",
}


def _fmt(x: float) -> str:
    return "%.12g" % x


def _to_json(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_to_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _emit(text: str, out_path: Optional[str]) -> None:
    if out_path:
        with open(out_path, "w", newline="") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _render_table(payload: dict, indent: str = "") -> str:
    lines = []
    for key, value in payload.items():
        if isinstance(value, dict):
            lines.append(f"{indent}{key}:")
            lines.append(_render_table(value, indent + "  "))
        elif isinstance(value, float):
            lines.append(f"{indent}{key}: {_fmt(value)}")
        else:
            lines.append(f"{indent}{key}: {value}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def _parse_args(argv: list[str]) -> tuple[argparse.Namespace, dict[tuple[str, str], str]]:
    parser = argparse.ArgumentParser(
        prog="levy-optstop",
        description="Perpetual American and Swing option pricing under negative rates",
    )
    parser.add_argument("command", choices=["price", "sweep", "swing", "classify", "validate"])
    parser.add_argument("--config", default=None, help="sectioned key-value config file")
    parser.add_argument("--out", default=None, help="output file path")
    parser.add_argument("--format", default="table", choices=["json", "csv", "table"])
    parser.add_argument("--seed", type=int, default=None, help="override swing and mc seeds")
    args, extra = parser.parse_known_args(argv)

    overrides: dict[tuple[str, str], str] = {}
    i = 0
    while i < len(extra):
        token = extra[i]
        if not token.startswith("--") or "." not in token:
            raise InvalidParameterError(f"unrecognized argument: {token}")
        if "=" in token:
            key, value = token[2:].split("=", 1)
        else:
            if i + 1 >= len(extra):
                raise InvalidParameterError(f"flag {token} is missing a value")
            key, value = token[2:], extra[i + 1]
            i += 1
        section, _, name = key.partition(".")
        overrides[(section, name)] = value
        i += 1
    return args, overrides


def _load_config(args: argparse.Namespace, overrides: dict[tuple[str, str], str]) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    if args.config:
        if not os.path.exists(args.config):
            raise InvalidParameterError(f"config file not found: {args.config}")
        cp.read(args.config)
    for (section, key), value in overrides.items():
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, value)
    if args.seed is not None:
        for section in ("swing", "mc"):
            if not cp.has_section(section):
                cp.add_section(section)
            cp.set(section, "seed", str(args.seed))
    return cp


def _get_float(cp: configparser.ConfigParser, section: str, key: str, default: Optional[float] = None) -> float:
    if cp.has_option(section, key):
        try:
            return cp.getfloat(section, key)
        except ValueError as exc:
            raise InvalidParameterError(f"[{section}] {key} must be a number") from exc
    if default is None:
        raise InvalidParameterError(f"missing required key [{section}] {key}")
    return default


def _build_model(cp: configparser.ConfigParser) -> LevyModel:
    if not cp.has_section("model"):
        raise InvalidParameterError("missing [model] section")
    family_name = cp.get("model", "family", fallback="black_scholes").strip().lower()
    family = {
        "black_scholes": Family.BLACK_SCHOLES,
        "bs": Family.BLACK_SCHOLES,
        "exp_jump_diffusion": Family.EXP_JUMP_DIFFUSION,
        "jd": Family.EXP_JUMP_DIFFUSION,
    }.get(family_name)
    if family is None:
        raise InvalidParameterError(f"unknown model family: {family_name}")
    sigma = _get_float(cp, "model", "sigma")
    q = _get_float(cp, "model", "q")
    delta = _get_float(cp, "model", "delta")
    lam = _get_float(cp, "model", "lambda", 0.0)
    rho = _get_float(cp, "model", "rho", 1.0)
    sign_name = cp.get("model", "jump_sign", fallback="spectrally_negative").strip().lower()
    jump_sign = {
        "spectrally_negative": JumpSign.SPECTRALLY_NEGATIVE,
        "negative": JumpSign.SPECTRALLY_NEGATIVE,
        "spectrally_positive": JumpSign.SPECTRALLY_POSITIVE,
        "positive": JumpSign.SPECTRALLY_POSITIVE,
    }.get(sign_name)
    if jump_sign is None:
        raise InvalidParameterError(f"unknown jump_sign: {sign_name}")

    has_mu = cp.has_option("model", "mu")
    martingale = cp.getboolean("model", "martingale", fallback=False)
    if has_mu == martingale:
        raise InvalidParameterError("give exactly one of [model] mu or martingale = true")
    mu = _get_float(cp, "model", "mu") if has_mu else None
    return model_from_rates(family, sigma, q, delta, lam=lam, rho=rho, jump_sign=jump_sign, mu=mu)


def _build_contract(cp: configparser.ConfigParser, spot: Optional[float] = None) -> OptionSpec:
    if not cp.has_section("contract"):
        raise InvalidParameterError("missing [contract] section")
    kind_name = cp.get("contract", "kind", fallback="put").strip().lower()
    kind = {"put": OptionKind.PUT, "call": OptionKind.CALL}.get(kind_name)
    if kind is None:
        raise InvalidParameterError(f"unknown contract kind: {kind_name}")
    strike = _get_float(cp, "contract", "strike")
    if spot is None:
        spot = _get_float(cp, "contract", "spot")
    return OptionSpec(
        kind=kind,
        strike=strike,
        q=_get_float(cp, "model", "q"),
        delta=_get_float(cp, "model", "delta"),
        spot=spot,
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _region_payload(region: ContinuationRegion) -> dict:
    return {
        "regime": _REGIME_LABELS[region.regime],
        "l_star": region.l_star,
        "u_star": region.u_star,
        "l_star_asset": math.exp(region.l_star) if region.l_star is not None else None,
        "u_star_asset": math.exp(region.u_star) if region.u_star is not None else None,
    }


def cmd_price(cp: configparser.ConfigParser, fmt: str, out_path: Optional[str]) -> int:
    model = _build_model(cp)
    spec = _build_contract(cp)
    result = price_put(model, spec) if spec.kind is OptionKind.PUT else price_call(model, spec)
    payload = {
        "price": result.price if result.price_available else None,
        **_region_payload(result.region),
        "phi_q": result.phi_q,
        "residuals": {"l": result.smooth_fit_residual_l, "u": result.smooth_fit_residual_u},
        "diagnostics": dict(sorted(result.diagnostics.items())),
    }
    if fmt == "json":
        _emit(_to_json(payload) + "\n", out_path)
    elif fmt == "csv":
        raise InvalidParameterError("csv output applies to sweep and swing commands")
    else:
        _emit(_render_table(payload) + "\n", out_path)
    return EXIT_OK


def _sweep_spots(cp: configparser.ConfigParser) -> np.ndarray:
    lo = _get_float(cp, "contract", "spot_min")
    hi = _get_float(cp, "contract", "spot_max")
    n = int(_get_float(cp, "contract", "spot_points", 300))
    if not (0.0 < lo < hi) or n < 2:
        raise InvalidParameterError("sweep needs 0 < spot_min < spot_max and >= 2 points")
    return np.linspace(lo, hi, n)


def _in_stopping_region(region: ContinuationRegion, kind: OptionKind, x: float) -> int:
    if region.regime is Regime.NO_EARLY_EXERCISE:
        return 0
    if region.regime is Regime.SINGLE_HALF_LINE:
        if kind is OptionKind.PUT:
            return int(x <= region.u_star)
        return int(x >= region.l_star)
    return int(region.l_star <= x <= region.u_star)


def cmd_sweep(cp: configparser.ConfigParser, fmt: str, out_path: Optional[str]) -> int:
    model = _build_model(cp)
    spots = _sweep_spots(cp)
    kind_name = cp.get("contract", "kind", fallback="put").strip().lower()

    rows = []
    if kind_name == "put":
        spec = _build_contract(cp, spot=float(spots[0]))
        region = optimize_put_boundaries(model, spec)
        if region.regime is Regime.NO_EARLY_EXERCISE:
            raise FinitenessError("sweep value is unavailable: no early exercise regime")
        values = put_value_curve(model, spec, region, np.log(spots))
        for s, v in zip(spots, values):
            intrinsic = max(spec.strike - s, 0.0)
            rows.append((float(s), intrinsic, float(v), _in_stopping_region(region, OptionKind.PUT, math.log(s))))
    else:
        for s in spots:
            spec = _build_contract(cp, spot=float(s))
            result = price_call(model, spec)
            if not result.price_available:
                raise FinitenessError("sweep value is unavailable: no early exercise regime")
            intrinsic = max(s - spec.strike, 0.0)
            rows.append(
                (float(s), intrinsic, result.price, _in_stopping_region(result.region, OptionKind.CALL, math.log(s)))
            )

    buf = io.StringIO()
    buf.write("spot,intrinsic,value,in_stopping_region\n")
    for s, intrinsic, value, flag in rows:
        buf.write(f"{_fmt(s)},{_fmt(intrinsic)},{_fmt(value)},{flag}\n")
    _emit(buf.getvalue(), out_path)
    return EXIT_OK


def _build_swing_spec(cp: configparser.ConfigParser, strike: float) -> SwingSpec:
    if not cp.has_section("swing"):
        raise InvalidParameterError("missing [swing] section")
    kind_name = cp.get("swing", "refraction", fallback="deterministic").strip().lower()
    kind = {
        "deterministic": RefractionKind.DETERMINISTIC,
        "exponential": RefractionKind.EXPONENTIAL,
    }.get(kind_name)
    if kind is None:
        raise InvalidParameterError(f"unknown refraction kind: {kind_name}")
    return SwingSpec.for_strike(
        strike,
        n_rights=int(_get_float(cp, "swing", "n_rights", 1)),
        refraction=Refraction(kind, _get_float(cp, "swing", "refraction_parameter", 0.5)),
        grid_points=int(_get_float(cp, "swing", "grid_points", 451)),
        mc_paths=int(_get_float(cp, "swing", "mc_paths", 10_000)),
        seed=int(_get_float(cp, "swing", "seed", 0)),
    )


def cmd_swing(cp: configparser.ConfigParser, fmt: str, out_path: Optional[str]) -> int:
    model = _build_model(cp)
    spec = _build_contract(cp)
    if spec.kind is not OptionKind.PUT:
        raise InvalidParameterError("the swing command prices puts")
    swing = _build_swing_spec(cp, spec.strike)
    result = solve_swing(model, spec, swing)

    if fmt == "csv":
        buf = io.StringIO()
        buf.write("k,l_star,u_star,se_l,se_u,value_at_spot\n")
        for k, ((l, u), (sl, su), v) in enumerate(
            zip(result.intervals, result.interval_se, result.value_at_spot), start=1
        ):
            buf.write(f"{k},{_fmt(l)},{_fmt(u)},{_fmt(sl)},{_fmt(su)},{_fmt(v)}\n")
        _emit(buf.getvalue(), out_path)
        return EXIT_OK

    payload = {
        "n_rights": swing.n_rights,
        "value_at_spot": result.value_at_spot[-1],
        "levels": [
            {"k": k, "l_star": l, "u_star": u, "se_l": sl, "se_u": su, "value_at_spot": v}
            for k, ((l, u), (sl, su), v) in enumerate(
                zip(result.intervals, result.interval_se, result.value_at_spot), start=1
            )
        ],
        "diagnostics": dict(sorted(result.diagnostics.items())),
    }
    if fmt == "json":
        _emit(_to_json(payload) + "\n", out_path)
    else:
        _emit(_render_table({"n_rights": payload["n_rights"], "value_at_spot": payload["value_at_spot"]}) + "\n" + "\n".join(
            f"k={lvl['k']}: l*={_fmt(lvl['l_star'])} u*={_fmt(lvl['u_star'])} "
            f"se=({_fmt(lvl['se_l'])}, {_fmt(lvl['se_u'])}) value={_fmt(lvl['value_at_spot'])}"
            for lvl in payload["levels"]
        ) + "\n", out_path)
    return EXIT_OK


def cmd_classify(cp: configparser.ConfigParser, fmt: str, out_path: Optional[str]) -> int:
    model = _build_model(cp)
    spec = _build_contract(cp)
    regime = classify_region(model, spec)
    payload = {"kind": spec.kind.value, "regime": _REGIME_LABELS[regime]}
    if fmt == "json":
        _emit(_to_json(payload) + "\n", out_path)
    else:
        _emit(_render_table(payload) + "\n", out_path)
    return EXIT_OK


def cmd_validate(cp: configparser.ConfigParser, fmt: str, out_path: Optional[str]) -> int:
    model = _build_model(cp)
    spec = _build_contract(cp)
    q = spec.q
    checks: list[tuple[str, float, float, bool]] = []  # name, measured, tolerance, ok

    def add(name: str, measured: float, tol: float) -> None:
        checks.append((name, measured, tol, bool(measured <= tol)))

    # Laplace-transform identity on five points right of the inverse.
    phi_q = phi_right_inverse(model, q)
    if phi_q is None:
        raise MissingPhiError("validation fixture must have a well-defined right inverse")
    residual = max(
        laplace_identity_residual(model, q, phi_q + off) for off in (0.5, 1.0, 2.0, 5.0, 10.0)
    )
    add("laplace_identity", residual, 1e-8)

    roots = psi_equation_roots(model, q)
    add(
        "root_residuals",
        max(abs(sn_exponent(model, r) - q) for r in roots.all_roots),
        1e-10,
    )

    put_spec = OptionSpec(OptionKind.PUT, spec.strike, q, spec.delta, spec.spot)
    region = optimize_put_boundaries(model, put_spec)
    if region.regime is Regime.NO_EARLY_EXERCISE:
        raise MissingPhiError("validation fixture must admit an exercise region")
    xs = np.log(np.linspace(0.05 * spec.strike, 3.0 * spec.strike, 200))
    curve = put_value_curve(model, put_spec, region, xs)
    intrinsic = np.maximum(spec.strike - np.exp(xs), 0.0)
    add("dominance", float(np.max(intrinsic - curve)), 1e-10)
    add("monotonicity", float(np.max(np.diff(curve))), 1e-10)
    add("convexity", float(-np.min(np.diff(curve, 2))), 1e-9)

    if region.regime is Regime.DOUBLE_REGION:
        corrupt = float(os.environ.get(_CORRUPT_ENV, "0") or 0.0)
        probe_region = ContinuationRegion(
            regime=region.regime, l_star=region.l_star + corrupt, u_star=region.u_star
        )
        res_l, res_u = smooth_fit_residual(model, put_spec, probe_region)
        add("smooth_fit", max(res_l, res_u), 1e-6)

    # Monte Carlo agreement on an interior point and a creeping-side point.
    mc_cfg = McConfig(
        paths=int(_get_float(cp, "mc", "paths", 100_000)) if cp.has_section("mc") else 100_000,
        dt=_get_float(cp, "mc", "dt", 1e-3) if cp.has_section("mc") else 1e-3,
        horizon=_get_float(cp, "mc", "horizon", 200.0) if cp.has_section("mc") else 200.0,
        seed=int(_get_float(cp, "mc", "seed", 0)) if cp.has_section("mc") else 0,
    )
    if region.regime is Regime.DOUBLE_REGION:
        l, u = region.l_star, region.u_star
    else:
        l, u = region.u_star - 0.3, region.u_star
    inside = 0.5 * (l + u)
    # Start below the interval (the sure-entry side for an upward-drifting
    # underlying), at a moderate distance: very close starts leave the
    # discounted payoff dominated by rare slow paths that a finite sample
    # undershoots.
    near = l - 0.35
    for label, x in (("mc_inside", inside), ("mc_near_boundary", near)):
        analytic = put_entrance_value(model, put_spec, l, u, x)
        est = mc_entrance_value(model, l, u, x, q, mc_cfg, strike=spec.strike)
        tol = 3.0 * est.std_error + est.truncation_bound
        add(label, abs(analytic - est.mean), max(tol, 1e-12))

    # Symmetry round trip on the exponent level.
    dual = dual_levy_model(model)
    grid = np.linspace(-1.5, 1.5, 21)
    dual_gap = max(
        abs(laplace_exponent(dual, p) - (laplace_exponent(model, 1.0 - p) - laplace_exponent(model, 1.0)))
        for p in grid
    )
    add("symmetry_exponent", dual_gap, 1e-12)
    # Evaluate the reflected dual at the implied dual rate q - psi(1), which
    # equals delta exactly when the drift obeys the martingale identity.
    ring_phi = phi_right_inverse(mathring_model(model), q - laplace_exponent(model, 1.0))
    if ring_phi is not None:
        add("symmetry_inverse", abs(ring_phi - (phi_q - 1.0)), 1e-10)

    all_ok = all(ok for _, _, _, ok in checks)
    payload = {
        "checks": [
            {"name": name, "measured": measured, "tolerance": tol, "status": "pass" if ok else "FAIL"}
            for name, measured, tol, ok in checks
        ],
        "status": "pass" if all_ok else "FAIL",
    }
    if fmt == "json":
        _emit(_to_json(payload) + "\n", out_path)
    else:
        lines = [
            f"{name:<22} measured={_fmt(measured):<16} tol={_fmt(tol):<10} {'pass' if ok else 'FAIL'}"
            for name, measured, tol, ok in checks
        ]
        lines.append(f"overall: {'pass' if all_ok else 'FAIL'}")
        _emit("\n".join(lines) + "\n", out_path)
    return EXIT_OK if all_ok else EXIT_VALIDATION


def main(argv: Optional[list[str]] = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        args, overrides = _parse_args(argv)
        cp = _load_config(args, overrides)
        dispatch = {
            "price": cmd_price,
            "sweep": cmd_sweep,
            "swing": cmd_swing,
            "classify": cmd_classify,
            "validate": cmd_validate,
        }
        return dispatch[args.command](cp, args.format, args.out)
    except (InvalidParameterError, DomainError, MissingPhiError, configparser.Error) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FinitenessError as exc:
        print(f"finiteness violation: {exc}", file=sys.stderr)
        return EXIT_FINITENESS
    except OptimizerError as exc:
        print(f"optimizer failure: {exc}", file=sys.stderr)
        return EXIT_OPTIMIZER
    except LevyOptStopError as exc:  # pragma: no cover - defensive
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def console_main() -> None:
    sys.exit(main())
