"""Experiment runner: reproducible configs in, CSV/JSON/SVG out.

Subcommands mirror the modules:

    osclab registry list [--filter S]
    osclab decay run        --config c.json [--seed N] [--out PREFIX] [--assert]
    osclab sublevel sample  --config c.json ...
    osclab sublevel witness18 --config c.json ...
    osclab web curvature    --config c.json ...
    osclab web degeneracy   --config c.json ...
    osclab microlocal decompose --config c.json ...
    osclab hsigma check     --config c.json ...

Exit codes: 0 success, 2 config error, 3 numerical failure (budget or
resolution refusals, singular data), 4 decay verdict Mismatch under
--assert.  A config is a JSON object {kind, seed, output_prefix,
parameters}; unknown keys anywhere are rejected.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction

import numpy as np

from . import decay as decay_mod
from . import microlocal as micro_mod
from . import report
from . import sublevel as sub_mod
from . import webgeom
from .errors import NumericalError, OsclabError
from .phases import PhaseDescriptor, registry_get, registry_names
from .quadrature import QuadConfig
from .witnesses import TestFunction1D

__all__ = ["main"]


class ConfigError(Exception):
    pass


def _check_keys(doc, allowed, where):
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _load_config(path, kind, seed_override, out_override):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(doc, {"kind", "seed", "output_prefix", "parameters"}, "config")
    if doc.get("kind") != kind:
        raise ConfigError(f"config kind {doc.get('kind')!r} does not match subcommand {kind!r}")
    seed = seed_override if seed_override is not None else int(doc.get("seed", 0))
    prefix = out_override if out_override is not None else doc.get("output_prefix")
    if not prefix:
        raise ConfigError("no output prefix (config output_prefix or --out)")
    params = doc.get("parameters", {})
    if not isinstance(params, dict):
        raise ConfigError("parameters must be an object")
    os.makedirs(os.path.dirname(prefix) or ".", exist_ok=True)
    return params, seed, prefix


def _phase_from(params, key="phase"):
    entry = params[key]
    if isinstance(entry, str):
        return registry_get(entry).descriptor
    if isinstance(entry, dict):
        return PhaseDescriptor.from_json(json.dumps(entry))
    raise ConfigError(f"{key} must be a registry name or a phase document")


def _quad_config(params):
    q = params.get("quad", {})
    _check_keys(q, {"gauss_order", "oversample", "max_nodes", "split_at_breakpoints"},
                "parameters.quad")
    return QuadConfig(**{k: q[k] for k in q})


# -- decay ----------------------------------------------------------------

_DECAY_KEYS = {"phase", "witness", "witness_params", "ladder", "tail",
               "reference_gamma", "tolerance", "box", "quad"}


def _run_decay(params, seed, prefix, assert_match):
    _check_keys(params, _DECAY_KEYS, "parameters")
    exp = decay_mod.DecayExperiment(
        phase_name=params["phase"],
        witness=params["witness"],
        witness_params=params.get("witness_params", {}),
        ladder=tuple(float(v) for v in params["ladder"]),
        box=tuple(map(tuple, params["box"])) if params.get("box") else None,
    )
    cfg = _quad_config(params)
    results = decay_mod.run_ladder(exp, cfg)
    pts = decay_mod.points_from_results(results)
    fit = decay_mod.fit_slope(pts, int(params.get("tail", 4)))

    verdict = None
    ref = params.get("reference_gamma")
    if ref is None:
        entry = registry_get(exp.phase_name)
        ref = entry.reference_exponent
    else:
        ref = Fraction(ref)
    if ref is not None:
        verdict = decay_mod.compare(fit, ref, float(params.get("tolerance", 0.1)))

    header, rows = report.decay_csv_rows(results)
    report.write_csv(prefix + ".csv", header, rows)
    doc = {"slope": fit.slope, "stderr": fit.stderr, "intercept": fit.intercept,
           "r2": fit.r_squared,
           "verdict": verdict.value if verdict else None,
           "reference_gamma": str(ref) if ref is not None else None,
           "phase": exp.phase_name, "witness": exp.witness, "seed": seed}
    report.write_json(prefix + ".json", doc)
    report.write_svg_loglog(prefix + ".svg", pts, fit,
                            float(-ref) if ref is not None else None,
                            title=f"{exp.phase_name} / {exp.witness}")
    print(f"slope = {fit.slope:.4f} +- {fit.stderr:.4f}  verdict = "
          f"{verdict.value if verdict else 'n/a'}")
    if assert_match and verdict is decay_mod.Verdict.MISMATCH:
        return 4
    return 0


# -- sublevel -------------------------------------------------------------

_SUB_KEYS = {"system", "phase", "psi", "box", "h", "eps_ladder", "n_samples",
             "steps_domain"}


def _staircase_from(doc, lo, hi, seed):
    _check_keys(doc, {"kind", "steps", "lo", "hi", "value"}, "parameters.h")
    kind = doc.get("kind", "random_staircase")
    if kind == "zero":
        return sub_mod.StepFunction.constant(0.0, lo, hi)
    if kind == "constant":
        return sub_mod.StepFunction.constant(float(doc.get("value", 0.0)), lo, hi)
    if kind == "random_staircase":
        return sub_mod.random_staircase(lo, hi, int(doc.get("steps", 64)),
                                        float(doc.get("lo", -2.0)),
                                        float(doc.get("hi", 2.0)), seed)
    raise ConfigError(f"unknown staircase kind {kind!r}")


def _run_sublevel_sample(params, seed, prefix):
    _check_keys(params, _SUB_KEYS, "parameters")
    system = params.get("system", "system_12")
    n_samples = int(params.get("n_samples", 200000))
    eps_ladder = [float(e) for e in params["eps_ladder"]]
    hdoc = params.get("h", {"kind": "zero"})

    phase = _phase_from(params)
    if params.get("box"):
        phase = phase.with_domain(params["box"])

    if system == "system_12":
        hs = [_staircase_from(hdoc, phase.domain[j][0], phase.domain[j][1], seed + j)
              for j in range(3)]
        build = lambda eps: sub_mod.system_12(phase, *hs, eps)
    elif system == "system_9_1":
        psi = _phase_from(params, "psi")
        from .phases import eval_poly_vec
        pts = np.stack([m.ravel() for m in np.meshgrid(
            *[np.linspace(lo, hi, 33) for lo, hi in phase.domain], indexing="ij")], axis=1)
        rng = eval_poly_vec(phase.monomials, 2, pts)
        h1 = _staircase_from(hdoc, phase.domain[0][0], phase.domain[0][1], seed)
        h2 = _staircase_from(hdoc, phase.domain[1][0], phase.domain[1][1], seed + 1)
        h3 = _staircase_from(hdoc, float(rng.min()), float(rng.max()) + 1e-9, seed + 2)
        build = lambda eps: sub_mod.system_9_1(phase, psi, h1, h2, h3, eps)
    else:
        raise ConfigError(f"unknown system {system!r}")

    records = []
    for eps in eps_ladder:
        est = sub_mod.estimate_measure(build(eps), n_samples, seed)
        records.append((eps, est, seed))
    header, rows = report.sublevel_csv_rows(records)
    report.write_csv(prefix + ".csv", header, rows)
    rho = sub_mod.measure_exponent(build, eps_ladder, n_samples, seed)
    doc = {"system": system, "eps_ladder": eps_ladder,
           "estimates": [est.estimate for _, est, _ in records],
           "fitted_exponent": None if math.isinf(rho) else rho, "seed": seed}
    report.write_json(prefix + ".json", doc)
    pts = [(math.log(e), math.log(est.estimate)) for e, est, _ in records
           if est.estimate > 0]
    if len(pts) >= 2:
        report.write_svg_loglog(prefix + ".svg", pts, title=f"sublevel {system}")
    tail = "exponent n/a" if math.isinf(rho) else f"exponent ~ {rho:.3f}"
    print(f"estimates: {[f'{est.estimate:.3e}' for _, est, _ in records]}  {tail}")
    return 0


_W18_KEYS = {"eps_ladder", "n_membership"}


def _run_witness18(params, seed, prefix):
    _check_keys(params, _W18_KEYS, "parameters")
    eps_ladder = [float(e) for e in params["eps_ladder"]]
    n_mem = int(params.get("n_membership", 100000))
    records = []
    doc_rows = []
    rng = np.random.Generator(np.random.Philox(key=seed))
    for eps in eps_ladder:
        w = sub_mod.build_multiprogression_witness(eps)
        lower, count = sub_mod.multiprogression_measure(w)
        est = sub_mod.MeasureEstimate(lower, 0.0, count, "ExactBlocks")
        records.append((eps, est, seed))
        ok = _membership_check(w, n_mem, rng)
        doc_rows.append({"eps": eps, "lower": lower, "blocks": count,
                         "membership_ok": bool(ok)})
    header, rows = report.sublevel_csv_rows(records)
    report.write_csv(prefix + ".csv", header, rows)
    xs = np.log([r["eps"] for r in doc_rows])
    ys = np.log([r["lower"] for r in doc_rows])
    slope = float(np.sum((xs - xs.mean()) * (ys - ys.mean()))
                  / np.sum((xs - xs.mean()) ** 2))
    report.write_json(prefix + ".json",
                      {"rungs": doc_rows, "fitted_exponent": slope, "seed": seed})
    report.write_svg_loglog(prefix + ".svg", list(zip(xs, ys)),
                            title="multiprogression lower bound")
    print(f"lower bounds {['%.4e' % r['lower'] for r in doc_rows]} exponent {slope:.3f}")
    return 0


def _membership_check(w, n_points, rng):
    """Sample points inside enumerated blocks; both residuals must hold."""
    blocks = []
    for n in range(1, w.n_blocks_per_axis):
        for k in range(1, w.n_blocks_per_axis):
            blk = sub_mod.witness_block(w, k + n, n)
            if 0.0 <= blk["x"][0] and blk["x"][1] <= 1.0 \
                    and 0.0 <= blk["y"][0] and blk["y"][1] <= 1.0:
                blocks.append(blk)
    if not blocks:
        return True
    per = max(1, n_points // len(blocks))
    sysw = sub_mod.witness_system(w)
    for blk in blocks:
        (ulo, uhi) = blk["u"]
        u = rng.uniform(ulo + 1e-12, uhi - 1e-12, per)
        xlo = np.maximum(blk["x"][0], u - blk["y"][1])
        xhi = np.minimum(blk["x"][1], u - blk["y"][0])
        x = xlo + (xhi - xlo) * rng.random(per)
        pts = np.stack([x, u - x], axis=1)
        r = sysw.residual(pts)
        if not (np.all(np.abs(r[:, 0]) <= 1e-9) and np.all(np.abs(r[:, 1]) < w.eps / 2)):
            return False
    return True


# -- web ------------------------------------------------------------------

_WEB_KEYS = {"phi3", "box", "grid", "tol"}
_DEG_KEYS = {"phase", "box", "basepoint", "halfwidth", "step"}


def _web_report(prefix, doc):
    base = {"curvature_min_abs": None, "curvature_max_abs": None,
            "linearizable": None, "ugly_residual_min": None,
            "ugly_variant": None, "degeneracy_score": None, "basepoint": None}
    base.update(doc)
    report.write_json(prefix + ".json", base)
    return base


def _run_web_curvature(params, seed, prefix):
    _check_keys(params, _WEB_KEYS, "parameters")
    phi3 = _phase_from(params, "phi3")
    box = params.get("box")
    web = webgeom.graph_web(phi3, box)
    n = int(params.get("grid", 65))
    tol = float(params.get("tol", 1e-9))
    _, K = webgeom.curvature_grid(web, n)
    doc = _web_report(prefix, {
        "curvature_min_abs": float(np.min(np.abs(K))),
        "curvature_max_abs": float(np.max(np.abs(K))),
        "linearizable": bool(np.max(np.abs(K)) <= tol),
    })
    print(f"min |K| = {doc['curvature_min_abs']:.3e}  linearizable = {doc['linearizable']}")
    return 0


def _run_web_degeneracy(params, seed, prefix):
    _check_keys(params, _DEG_KEYS, "parameters")
    phase = _phase_from(params)
    if params.get("box"):
        phase = phase.with_domain(params["box"])
    basepoint = tuple(float(v) for v in params["basepoint"])
    halfwidth = float(params.get("halfwidth", 0.25))
    step = float(params.get("step", 1.0 / 64.0))
    score = webgeom.rank1_degeneracy_score(phase, basepoint, halfwidth, step)
    ugly, variant = webgeom.ugly_residual(phase, basepoint)
    doc = _web_report(prefix, {
        "degeneracy_score": score, "ugly_residual_min": ugly,
        "ugly_variant": variant, "basepoint": list(basepoint),
    })
    print(f"score = {score:.3e}  ugly = {ugly:.3e} ({variant})")
    return 0


# -- microlocal -----------------------------------------------------------

_MICRO_KEYS = {"lambda", "sigma", "function", "max_freq", "dump_coefficients"}


def _sampled_function(doc, lam, seed):
    _check_keys(doc, {"kind", "a_scale", "modes", "value"}, "parameters.function")
    s_count = micro_mod.sample_count_for(lam)
    xs = np.arange(s_count) / s_count
    kind = doc.get("kind", "constant")
    if kind == "constant":
        return np.full(s_count, complex(doc.get("value", 1.0)))
    if kind == "chirp":
        a = float(doc.get("a_scale", 0.5)) * lam
        return np.exp(1j * a * xs * xs)
    if kind == "random_bandlimited":
        modes = int(doc.get("modes", 16))
        rng = np.random.Generator(np.random.Philox(key=seed))
        coeffs = rng.normal(size=2 * modes + 1) + 1j * rng.normal(size=2 * modes + 1)
        out = np.zeros(s_count, dtype=complex)
        for i, k in enumerate(range(-modes, modes + 1)):
            out += coeffs[i] * np.exp(2j * math.pi * k * xs)
        return out / max(np.max(np.abs(out)), 1e-300)
    raise ConfigError(f"unknown function kind {kind!r}")


def _run_microlocal(params, seed, prefix):
    _check_keys(params, _MICRO_KEYS, "parameters")
    lam = float(params["lambda"])
    sigma = float(params["sigma"])
    samples = _sampled_function(params.get("function", {"kind": "constant"}), lam, seed)
    dec = micro_mod.decompose(samples, lam, sigma, params.get("max_freq"))
    per = []
    for m in range(dec.m_count):
        ka = dec.kept[m][1]
        kb = dec.residual[m][1]
        per.append({"kept": len(ka),
                    "structured_energy": float(np.sum(np.abs(ka) ** 2)),
                    "pseudorandom_energy": float(np.sum(np.abs(kb) ** 2))})
    doc = {"lambda": lam, "sigma": sigma, "cap": dec.cap,
           "sup_norm": dec.sup_norm,
           "reconstruction_error": dec.reconstruction_error,
           "intervals": per, "seed": seed}
    if params.get("dump_coefficients"):
        doc["decomposition"] = json.loads(dec.to_json())
    report.write_json(prefix + ".json", doc)
    header = ["interval", "kept", "structured_energy", "pseudorandom_energy"]
    rows = [(m, p["kept"], p["structured_energy"], p["pseudorandom_energy"])
            for m, p in enumerate(per)]
    report.write_csv(prefix + ".csv", header, rows)
    print(f"kept per interval: {[p['kept'] for p in per]}  "
          f"recon err {dec.reconstruction_error:.2e}")
    return 0


# -- hsigma ---------------------------------------------------------------

_HSIGMA_KEYS = {"f", "sigma", "A_ladder", "dft_size"}


def _step_function_from(doc, seed):
    _check_keys(doc, {"kind", "steps", "segments", "lo", "hi"}, "parameters.f")
    kind = doc.get("kind", "identity")
    if kind == "identity":
        return sub_mod.StepFunction.identity(0.0, 1.0)
    if kind == "square_chords":
        n = int(doc.get("segments", 64))
        pieces = []
        for i in range(n):
            a, b = i / n, (i + 1) / n
            slope = a + b
            pieces.append((a, b, slope, a * a - slope * a))
        return sub_mod.StepFunction(tuple(pieces))
    if kind == "staircase":
        n = int(doc.get("steps", 16))
        return sub_mod.StepFunction(tuple(
            (i / n, (i + 1) / n, 0.0, ((i * 7) % n) / n) for i in range(n)))
    if kind == "random_staircase":
        return sub_mod.random_staircase(0.0, 1.0, int(doc.get("steps", 16)),
                                        float(doc.get("lo", 0.0)),
                                        float(doc.get("hi", 1.0)), seed)
    raise ConfigError(f"unknown f kind {kind!r}")


def _run_hsigma(params, seed, prefix):
    _check_keys(params, _HSIGMA_KEYS, "parameters")
    f = _step_function_from(params.get("f", {"kind": "identity"}), seed)
    sigma = float(params.get("sigma", -0.25))
    ladder = [float(a) for a in params.get("A_ladder", [4, 16, 64, 256])]
    m_size = int(params.get("dft_size", 16384))
    rows = []
    ratios = []
    for a_val in ladder:
        lhs, rhs = sub_mod.hsigma_chirp_energy(f, sigma, a_val, m_size)
        rows.append((a_val, lhs, rhs, lhs / rhs))
        ratios.append(lhs / rhs)
    report.write_csv(prefix + ".csv", ["A", "lhs", "rhs", "ratio"], rows)
    doc = {"sigma": sigma, "A_ladder": ladder, "ratios": ratios,
           "ratio_spread": max(ratios) / min(ratios), "seed": seed}
    report.write_json(prefix + ".json", doc)
    print(f"ratios {['%.4f' % r for r in ratios]}  spread "
          f"{doc['ratio_spread']:.2f}")
    return 0


# -- registry -------------------------------------------------------------

def _run_registry_list(filter_str):
    rows = registry_names()
    print(f"{'name':24} | {'gamma':8} | note")
    print("-" * 64)
    for e in rows:
        if filter_str and filter_str not in e.name:
            continue
        gamma = str(e.reference_exponent) if e.reference_exponent is not None else "-"
        print(f"{e.name:24} | {gamma:8} | {e.note}")
    return 0


# -- entry ----------------------------------------------------------------

def _add_config_flags(sp):
    sp.add_argument("--config", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--assert", dest="assert_", action="store_true")


def main(argv=None):
    parser = argparse.ArgumentParser(prog="osclab")
    sub = parser.add_subparsers(dest="group", required=True)

    reg = sub.add_parser("registry").add_subparsers(dest="action", required=True)
    p = reg.add_parser("list")
    p.add_argument("--filter", default="")

    for group, actions in (("decay", ["run"]), ("sublevel", ["sample", "witness18"]),
                           ("web", ["curvature", "degeneracy"]),
                           ("microlocal", ["decompose"]), ("hsigma", ["check"])):
        g = sub.add_parser(group).add_subparsers(dest="action", required=True)
        for action in actions:
            _add_config_flags(g.add_parser(action))

    args = parser.parse_args(argv)
    try:
        if args.group == "registry":
            return _run_registry_list(args.filter)
        kind = {"decay": "decay", "sublevel": "sublevel", "web": "web",
                "microlocal": "microlocal", "hsigma": "hsigma"}[args.group]
        if args.group == "sublevel" and args.action == "witness18":
            kind = "witness18"
        if args.group == "web":
            kind = "web" if args.action == "curvature" else "degeneracy"
        params, seed, prefix = _load_config(args.config, kind, args.seed, args.out)
        if args.group == "decay":
            return _run_decay(params, seed, prefix, args.assert_)
        if args.group == "sublevel" and args.action == "sample":
            return _run_sublevel_sample(params, seed, prefix)
        if args.group == "sublevel":
            return _run_witness18(params, seed, prefix)
        if args.group == "web" and args.action == "curvature":
            return _run_web_curvature(params, seed, prefix)
        if args.group == "web":
            return _run_web_degeneracy(params, seed, prefix)
        if args.group == "microlocal":
            return _run_microlocal(params, seed, prefix)
        if args.group == "hsigma":
            return _run_hsigma(params, seed, prefix)
        raise ConfigError("unreachable subcommand")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (KeyError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OsclabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
