"""Command-line front end: ``levylab {price,recover,calls,replicate,simulate,gauge}``.

Exit codes: 0 ok, 2 input error, 3 domain/data error, 4 numerical failure.
Errors are reported on stderr as a JSON object.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ActivityError, DataError, DomainError, LevyLabError, NumericalError, ParameterError, UnsupportedError
from .exponents import exponent_from_dict, make_catalog_process, rescale
from .formats import (build_manifest, dumps, load_json, manifest_digest, manifest_path, parse_grid, parse_kv,
                      read_csv, read_price_curve, sidecar_path, write_csv, write_price_curve, write_text)
from .fourier import (gaussian_payoff, gaussian_payoff_price_gbm, gaussian_transform, replicate_payoff,
                      smoothed_indicator_payoff, tabulated_payoff, transform_from_payoff)
from .market import MarketModel, sample_power_curve
from .montecarlo import SimConfig, mc_deflated_gain_test, mc_exponent, mc_payoff_price, mc_power_price
from .options import CallCurve, distribution_from_calls, model_call_curve, power_prices_from_distribution, rn_exponent
from .recovery import (compute_D0, fit_gauge, node_aligned_grid, recover_exponent, recover_numeraire,
                       unit_volatility_exponent, verify_recovery)

EXIT_INPUT, EXIT_DOMAIN, EXIT_NUMERICAL = 2, 3, 4


class InputError(LevyLabError):
    pass


def _load_json_file(path: str):
    p = Path(path)
    if not p.is_file():
        raise InputError(f"no such file: {path}")
    try:
        return load_json(p)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from None


def _load_model(path: str) -> MarketModel:
    data = _load_json_file(path)
    if not isinstance(data, dict):
        raise InputError(f"{path}: model JSON must be an object")
    return MarketModel.from_dict(data)


def _load_exponent(path: str):
    data = _load_json_file(path)
    if isinstance(data, dict) and "recovered" in data and "kind" not in data:
        data = data["recovered"]
    if isinstance(data, dict) and "exponent" in data and "kind" not in data:
        data = data["exponent"]
    return exponent_from_dict(data)


def _number(v: str) -> float:
    try:
        return float(v)
    except ValueError:
        raise ParameterError(f"not a number: {v!r}") from None


def parse_process(spec: str):
    """``kind:k=v,...`` (jump-law keys for compound Poisson: law, size, mean, var, p_up, eta_up, eta_down)."""
    if Path(spec).is_file():
        return _load_exponent(spec)
    kind, kv = parse_kv(spec)
    params: dict = {}
    jumps: dict = {}
    for k, v in kv.items():
        if k == "m":
            params["m"] = _number(v)
        elif k == "law":
            jumps["law"] = v
        else:
            jumps[k] = _number(v)
    if jumps:
        jumps.setdefault("law", "normal")
        params["jumps"] = jumps
    return make_catalog_process(kind, params)


def parse_payoff(spec: str):
    """``gaussian:a=..,u=..``, ``indicator:lo=..,hi=..,w=..`` or ``table:path.csv`` (columns x,f)."""
    name, kv = parse_kv(spec)
    if name == "gaussian":
        a, u = _number(kv.get("a", "0")), _number(kv.get("u", "1"))
        return gaussian_payoff(a, u), gaussian_transform(a, u), {"a": a, "u": u}
    if name == "indicator":
        lo, hi, w = _number(kv.get("lo", "-0.5")), _number(kv.get("hi", "0.5")), _number(kv.get("w", "0.1"))
        p = smoothed_indicator_payoff(lo, hi, w)
        return p, transform_from_payoff(p), None
    if name == "table":
        path = spec.partition(":")[2]
        if not Path(path).is_file():
            raise InputError(f"no such file: {path}")
        cols = read_csv(path, ("x", "f"))
        p = tabulated_payoff([_number(v) for v in cols["x"]], [_number(v) for v in cols["f"]])
        return p, transform_from_payoff(p), None
    raise ParameterError(f"unknown payoff preset {name!r}")


# --------------------------------------------------------------------------- #
# Output helpers
# --------------------------------------------------------------------------- #


def _emit_json(args, payload: dict, command: str, params: dict, inputs, seed=None) -> None:
    out = getattr(args, "out", None)
    outputs = [out] if out else []
    manifest = build_manifest(command, params, inputs, outputs, seed)
    digest = manifest_digest(manifest)
    payload = dict(payload, manifest_sha256=digest)
    text = dumps(payload)
    if out:
        write_text(out, text)
        write_text(manifest_path(out), dumps(manifest))
    else:
        sys.stdout.write(text)


def _finish_files(out: str, manifest: dict) -> str:
    write_text(manifest_path(out), dumps(manifest))
    return manifest_digest(manifest)


# --------------------------------------------------------------------------- #
# Commands
# --------------------------------------------------------------------------- #


def cmd_price(args) -> int:
    model = _load_model(args.model)
    q = parse_grid(args.q_grid)
    curve = sample_power_curve(model, q, args.maturity)
    side = sidecar_path(args.out)
    params = {"q_grid": args.q_grid, "maturity": args.maturity}
    manifest = build_manifest("price", params, [args.model], [args.out, side])
    digest = _finish_files(args.out, manifest)
    write_price_curve(args.out, curve, digest)
    write_text(side, dumps({"T": args.maturity, "r": model.r, "s0": model.s0, "manifest_sha256": digest}))
    return 0


def cmd_recover(args) -> int:
    curve_path = Path(args.curve)
    if not curve_path.is_file():
        raise InputError(f"no such file: {args.curve}")
    side = sidecar_path(curve_path)
    meta = _load_json_file(str(side)) if side.is_file() else {}
    T = args.maturity if args.maturity is not None else meta.get("T")
    if T is None:
        raise InputError("maturity unknown: pass --maturity or provide the curve's .meta.json sidecar")
    curve = read_price_curve(curve_path, float(T))
    d0 = compute_D0(curve, meta.get("r"), meta.get("s0"))
    if args.numeraire:
        rec = recover_numeraire(d0, args.b)
    else:
        if args.lambda_hat is None:
            raise InputError("--lambda-hat is required unless --numeraire is given")
        rec = recover_exponent(d0, args.lambda_hat, args.b)
    grid = node_aligned_grid(d0, rec.lambda_hat, 1)
    payload = {
        "recovered": rec.to_dict(),
        "samples": {"alpha": grid, "psi": rec(grid)},
        "verify_residual": verify_recovery(d0, rec),
        "sidecar": {"T": float(T), "r": d0.r, "s0": d0.s0, "lambda_hat": rec.lambda_hat, "b": rec.b},
    }
    inputs = [args.curve] + ([str(side)] if side.is_file() else [])
    if args.truth:
        inputs.append(args.truth)
        truth_model = _load_model(args.truth)
        if args.risk_neutral:
            truth = rescale(rn_exponent(truth_model), truth_model.sigma)
        else:
            truth = unit_volatility_exponent(truth_model)
        fit_grid = node_aligned_grid(d0, rec.lambda_hat, 2)
        pair = fit_gauge(truth, rec, fit_grid, fix_mu=0.0 if args.numeraire else None)
        payload["gauge"] = {"c": pair.c, "mu": pair.mu, "residual": pair.residual}
    params = {"lambda_hat": rec.lambda_hat, "b": args.b, "numeraire": bool(args.numeraire), "maturity": float(T),
              "risk_neutral": bool(args.risk_neutral)}
    _emit_json(args, payload, "recover", params, inputs)
    return 0


def cmd_calls(args) -> int:
    if args.invert:
        path = Path(args.invert)
        if not path.is_file():
            raise InputError(f"no such file: {args.invert}")
        side = sidecar_path(path)
        meta = _load_json_file(str(side)) if side.is_file() else {}
        T = args.maturity if args.maturity is not None else meta.get("T")
        r = args.rate if args.rate is not None else meta.get("r")
        if T is None or r is None:
            raise InputError("maturity and rate unknown: pass --maturity/--rate or keep the .meta.json sidecar")
        cols = read_csv(path, ("strike", "price"))
        curve = CallCurve(float(T), np.array([_number(v) for v in cols["strike"]]),
                          np.array([_number(v) for v in cols["price"]]))
        dist = distribution_from_calls(curve, float(r))
        atoms_out = Path(args.out).with_name(Path(args.out).name + ".atoms.json")
        inputs = [str(path)] + ([str(side)] if side.is_file() else [])
        outputs = [args.out, atoms_out]
        params = {"invert": True, "maturity": float(T), "rate": float(r)}
        if bool(args.power_out) != bool(args.q_grid):
            raise InputError("--power-out and --q-grid go together")
        if args.power_out:
            power_side = sidecar_path(args.power_out)
            outputs += [args.power_out, power_side]
            params["q_grid"] = args.q_grid
        manifest = build_manifest("calls", params, inputs, outputs)
        digest = _finish_files(args.out, manifest)
        write_csv(args.out, ("x", "cdf"), zip(dist.grid, dist.cdf), digest)
        write_text(atoms_out, dumps({"atoms": [{"location": a, "mass": m} for a, m in dist.atoms],
                                     "lower_tail": dist.lower_tail, "upper_tail": dist.upper_tail,
                                     "manifest_sha256": digest}))
        if args.power_out:
            power = power_prices_from_distribution(dist, parse_grid(args.q_grid), float(r), float(T))
            write_price_curve(args.power_out, power, digest)
            s0 = meta.get("s0")
            write_text(power_side, dumps({"T": float(T), "r": float(r), "s0": s0, "manifest_sha256": digest}))
        return 0
    if not args.model or not args.strikes:
        raise InputError("calls needs --model and --strikes (or --invert CALLS.csv)")
    model = _load_model(args.model)
    strikes = parse_grid(args.strikes)
    if args.geometric:
        if strikes[0] <= 0:
            raise ParameterError("geometric strike grids need a positive lower strike")
        strikes = np.geomspace(strikes[0], strikes[-1], strikes.size)
    curve = model_call_curve(model, args.maturity, strikes)
    side = sidecar_path(args.out)
    params = {"strikes": args.strikes, "geometric": bool(args.geometric), "maturity": args.maturity}
    manifest = build_manifest("calls", params, [args.model], [args.out, side])
    digest = _finish_files(args.out, manifest)
    write_csv(args.out, ("strike", "price"), zip(curve.strikes, curve.prices), digest)
    write_text(side, dumps({"T": args.maturity, "r": model.r, "s0": model.s0, "manifest_sha256": digest}))
    return 0


def cmd_replicate(args) -> int:
    model = _load_model(args.model)
    payoff, transform, gauss = parse_payoff(args.payoff)
    rep = replicate_payoff(model, transform, args.maturity)
    payload = {"price": rep.price, "imag": rep.imag, "q_max": rep.q_max, "tail_bound": rep.tail_bound,
               "payoff": args.payoff, "maturity": args.maturity}
    if gauss is not None and model.exponent.kind == "brownian" and model.dividend == 0.0:
        payload["closed_form"] = gaussian_payoff_price_gbm(gauss["a"], gauss["u"], model.r, model.sigma,
                                                         args.maturity, model.s0)
    _emit_json(args, payload, "replicate", {"payoff": args.payoff, "maturity": args.maturity},
               [args.model] + ([args.payoff.partition(":")[2]] if args.payoff.startswith("table:") else []))
    return 0


def cmd_simulate(args) -> int:
    seed = int(args.seed)
    n = int(_number(args.paths))
    T = args.horizon
    params: dict = {"paths": n, "horizon": T}
    inputs = []
    if args.model:
        model = _load_model(args.model)
        inputs.append(args.model)
        cfg = SimConfig(model.exponent, T, n, seed, args.steps)
        if args.gain:
            s, _, t = args.gain.partition(":")
            res = mc_deflated_gain_test(model, _number(s), _number(t), cfg, args.threads)
            est = res.residual
            payload = est.to_dict(seed)
            payload.update(bias_bound=res.bias_bound, passed=res.passed)
            params.update(gain=args.gain, steps=args.steps)
        elif args.payoff:
            payoff, _, _ = parse_payoff(args.payoff)
            est = mc_payoff_price(model, payoff.f, T, cfg, args.threads)
            payload = est.to_dict(seed)
            params["payoff"] = args.payoff
        else:
            q = 1.0 if args.q is None else args.q
            est = mc_power_price(model, q, T, cfg, args.threads)
            payload = est.to_dict(seed)
            params["q"] = q
    else:
        if not args.process:
            raise InputError("simulate needs --process or --model")
        proc = parse_process(args.process)
        alpha = 0.0 if args.alpha is None else args.alpha
        cfg = SimConfig(proc, T, n, seed)
        est = mc_exponent(cfg, alpha, args.threads)
        payload = est.to_dict(seed)
        lm, se = est.log_estimate()
        psi = proc(alpha)
        target = math.exp(psi * T)
        payload.update(alpha=alpha, psi=psi, target=target, log_mean_over_T=lm / T, log_se_over_T=se / T,
                       within_3se=bool(abs(lm / T - psi) <= 3.0 * se / T))
        params.update(process=args.process, alpha=alpha)
    _emit_json(args, payload, "simulate", params, inputs, seed)
    return 0


def cmd_gauge(args) -> int:
    a = _load_exponent(args.psi_a)
    b = _load_exponent(args.psi_b)
    grid = parse_grid(args.grid)
    pair = fit_gauge(a, b, grid, fix_mu=args.fix_mu)
    payload = {"c": pair.c, "mu": pair.mu, "residual": pair.residual}
    _emit_json(args, payload, "gauge", {"grid": args.grid, "fix_mu": args.fix_mu}, [args.psi_a, args.psi_b])
    return 0


# --------------------------------------------------------------------------- #
# Entry point
# --------------------------------------------------------------------------- #


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="levylab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"levylab {__version__}")
    p.add_argument("--threads", type=int, default=None, help="worker cap (default: $LEVYLAB_THREADS or 1)")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("price", help="power-payoff price curve")
    sp.add_argument("model")
    sp.add_argument("--q-grid", required=True, help="lo:hi:n, inclusive")
    sp.add_argument("--maturity", type=float, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_price)

    sp = sub.add_parser("recover", help="recover the exponent up to gauge from a price curve")
    sp.add_argument("curve")
    sp.add_argument("--lambda-hat", type=float)
    sp.add_argument("--b", type=float, default=0.0)
    sp.add_argument("--truth", help="model JSON to fit the gauge against")
    sp.add_argument("--numeraire", action="store_true", help="natural-numeraire data: lambda_hat = 1, mu = 0")
    sp.add_argument("--risk-neutral", action="store_true",
                    help="curve priced from option data: compare against the risk-neutral exponent")
    sp.add_argument("--maturity", type=float)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_recover)

    sp = sub.add_parser("calls", help="call prices from a model, or the distribution from call prices")
    sp.add_argument("--model")
    sp.add_argument("--strikes", help="lo:hi:n, inclusive")
    sp.add_argument("--geometric", action="store_true", help="log-uniform strikes between lo and hi")
    sp.add_argument("--maturity", type=float, default=1.0)
    sp.add_argument("--invert", metavar="CALLS_CSV")
    sp.add_argument("--rate", type=float)
    sp.add_argument("--q-grid", help="with --invert: power prices of the inverted law on lo:hi:n")
    sp.add_argument("--power-out", help="with --invert: price-curve CSV for --q-grid")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_calls)

    sp = sub.add_parser("replicate", help="price a log-price payoff by Fourier replication")
    sp.add_argument("--payoff", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--maturity", type=float, default=1.0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_replicate)

    sp = sub.add_parser("simulate", help="Monte Carlo estimates")
    sp.add_argument("--process", help="kind:k=v,... or exponent JSON")
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--model", help="model JSON: power price (--q), payoff (--payoff) or gain test (--gain s:t)")
    sp.add_argument("--q", type=float)
    sp.add_argument("--payoff")
    sp.add_argument("--gain")
    sp.add_argument("--steps", type=int, default=256)
    sp.add_argument("--horizon", type=float, default=1.0)
    sp.add_argument("--paths", default="1e6")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("gauge", help="fit (c, mu) between two exponent JSON files")
    sp.add_argument("psi_a")
    sp.add_argument("psi_b")
    sp.add_argument("--grid", required=True, help="lo:hi:n, inclusive")
    sp.add_argument("--fix-mu", type=float)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_gauge)
    return p


def _fail(exc: BaseException, code: int) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")
    return code


GRID_FLAGS = ("--q-grid", "--grid", "--strikes", "--gain")


def _glue_negative_values(argv: list[str]) -> list[str]:
    """``--q-grid -3:3:7`` -> ``--q-grid=-3:3:7`` so argparse does not read the value as a flag."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else ""
        if tok in GRID_FLAGS and len(nxt) > 1 and nxt[0] == "-" and (nxt[1].isdigit() or nxt[1] == "."):
            out.append(f"{tok}={nxt}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(_glue_negative_values(argv))
    try:
        return args.func(args)
    except (DomainError, DataError, ActivityError) as exc:
        return _fail(exc, EXIT_DOMAIN)
    except NumericalError as exc:
        return _fail(exc, EXIT_NUMERICAL)
    except (InputError, ParameterError, UnsupportedError, KeyError, TypeError, FileNotFoundError,
            IsADirectoryError) as exc:
        return _fail(exc, EXIT_INPUT)


if __name__ == "__main__":
    sys.exit(main())
