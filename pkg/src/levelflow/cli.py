"""Batch front end: JSON configs, named experiment cases, CSV/PGM emission.

Subcommands: simulate, radial-limit, channel-analyze, check-condition, bounds.
Each case validates its config strictly (unknown keys are errors), runs the
scenario, writes its data files, and prints one PASS/FAIL line against the
case's built-in assertions.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import channel as ch
from . import fields as fl
from . import geometry as ge
from . import radial as ra
from . import solver as so


# ---------------------------------------------------------------------------
# Config schema and parsing
# ---------------------------------------------------------------------------

class ConfigError(ValueError):
    """Carries a list of (path, message, line) triples."""

    def __init__(self, errors):
        self.errors = errors
        lines = "; ".join(f"{p} (line {ln}): {m}" for p, m, ln in errors)
        super().__init__(f"invalid config: {lines}")


_SCHEMA = {
    "case": str, "name": str, "output_dir": str, "threads": int,
    "domain": {
        "type": str, "radius": float, "dim": int, "half_extents": list,
        "m": float, "k": float, "x_max": float,
    },
    "forcing": {
        "type": str, "value": float, "a": float, "b": float, "n": int,
        "collar": float, "collar_w": float, "dip": float, "gamma": float,
    },
    "initial": {
        "generator": str, "value": float, "hi": float, "lo": float,
        "r_lo": float, "r_hi": float, "amp": float, "center": list, "width": float,
        "alpha": float, "beta": float,
    },
    "solver": {
        "h": float, "epsilon": float, "cfl_safety": float, "t_final": float,
        "snapshot_every": float, "store_snapshots": bool,
    },
    "condition": {"delta": float, "samples": int, "expect_holds": bool},
    "radial": {
        "h": float, "t_final": float, "n": int, "R": float, "cfl_safety": float,
        "band_cells": int, "tol": float, "jump_at": float, "jump_min": float,
        "lip_growth_min": float,
    },
    "channel": {
        "c_frac": float, "l_frac": float, "cells_across": int,
        "metric_tol": float, "sandwich_margin_cells": int, "delta_T_product": float,
    },
    "bounds": {
        "sup_u0": float, "sup_du0": float, "sup_d2u0": float, "delta": float,
        "T": float,
    },
    "expect": {
        "radial_crosscheck": {"tol": float, "band_cells": int},
        "global_lipschitz": {
            "delta": float, "sup_du0": float, "sup_d2u0": float,
            "no_growth_factor": float, "time_lip_slack": float,
        },
        "constant_exact": {"steps": int, "dt": float, "rel_tol": float},
        "comparison_trials": {"trials": int, "seed": int, "tol": float},
        "max_w_nonincreasing": {"tol": float},
        "lyapunov": {"rel_tol": float, "abs_tol": float},
    },
}


def _type_name(t):
    return {str: "string", int: "integer", float: "number", bool: "boolean", list: "array"}[t]


def _find_line(text: str, key: str) -> int:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return 0


def _walk(obj, schema, path, text, errors):
    if not isinstance(obj, dict):
        errors.append((path or "<root>", "expected an object", _find_line(text, path.split(".")[-1])))
        return
    for key, val in obj.items():
        here = f"{path}.{key}" if path else key
        if key not in schema:
            errors.append((here, "unknown key", _find_line(text, key)))
            continue
        want = schema[key]
        if isinstance(want, dict):
            _walk(val, want, here, text, errors)
        elif want is float:
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                errors.append((here, "expected number", _find_line(text, key)))
        elif want is int:
            if isinstance(val, bool) or not isinstance(val, int):
                errors.append((here, "expected integer", _find_line(text, key)))
        elif not isinstance(val, want):
            errors.append((here, f"expected {_type_name(want)}", _find_line(text, key)))


_CASES = ("simulate", "radial-limit", "channel-analyze", "check-condition", "bounds",
          "comparison-sweep", "channel-convergence")


@dataclass
class RunConfig:
    case: str
    name: str
    raw: dict
    output_dir: str = "out"
    threads: int = 1

    def block(self, key, default=None):
        return self.raw.get(key, default if default is not None else {})

    def to_json(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True) + "\n"


def parse_config(text: str) -> RunConfig:
    """Validate config text; returns RunConfig or raises ConfigError."""
    errors = []
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError([("<root>", f"JSON syntax: {e.msg}", e.lineno)]) from e
    _walk(raw, _SCHEMA, "", text, errors)
    case = raw.get("case")
    if case is None:
        errors.append(("case", "missing required key", 0))
    elif case not in _CASES:
        errors.append(("case", f"unknown case {case!r}", _find_line(text, "case")))
    cond = raw.get("condition", {})
    if isinstance(cond, dict) and "delta" in cond and not (isinstance(cond["delta"], (int, float))
                                                           and not isinstance(cond["delta"], bool)
                                                           and cond["delta"] > 0):
        errors.append(("condition.delta", "delta must be a positive number",
                       _find_line(text, "delta")))
    if errors:
        raise ConfigError(errors)
    return RunConfig(case=case, name=raw.get("name", case), raw=raw,
                     output_dir=raw.get("output_dir", "out"),
                     threads=raw.get("threads", 1))


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def write_csv(path, header, rows) -> None:
    """Header row, %.17g floats, LF endings, no trailing separator."""
    with open(path, "w", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def write_pgm(path, values: np.ndarray, inside: np.ndarray | None = None) -> None:
    """ASCII P2, maxval 255, rows top-to-bottom (descending second axis).

    Values map linearly from [min, max] over the rendered cells; a constant
    field maps to 128. The header comment records min/max for inversion.
    """
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 2:
        raise ValueError("PGM writer handles 2D fields only")
    if inside is None:
        inside = np.ones(vals.shape, dtype=bool)
    sel = vals[inside]
    if not np.all(np.isfinite(sel)):
        raise ValueError("non-finite values in PGM field")
    vmin, vmax = float(sel.min()), float(sel.max())
    if vmax > vmin:
        scaled = np.clip((vals - vmin) / (vmax - vmin) * 255.0, 0.0, 255.0)
        img = np.rint(scaled).astype(int)
    else:
        img = np.full(vals.shape, 128, dtype=int)
    img = np.where(inside, img, 0)
    nx, ny = vals.shape
    with open(path, "w", newline="\n") as f:
        f.write("P2\n")
        f.write(f"# min={_fmt(vmin)} max={_fmt(vmax)}\n")
        f.write(f"{nx} {ny}\n255\n")
        for j in range(ny - 1, -1, -1):
            f.write(" ".join(str(img[i, j]) for i in range(nx)) + "\n")


# ---------------------------------------------------------------------------
# Builders shared by cases and tests
# ---------------------------------------------------------------------------

def build_domain(block: dict) -> ge.DomainSpec:
    kind = block.get("type")
    if kind == "disk":
        return ge.Disk(radius=block["radius"], dim=block.get("dim", 2))
    if kind == "rectangle":
        return ge.Rectangle(half_extents=tuple(block["half_extents"]))
    if kind == "channel":
        return ge.Channel(m=block["m"], k=block["k"], x_max=block["x_max"])
    raise ConfigError([("domain.type", f"unknown domain {kind!r}", 0)])


def build_forcing(block: dict) -> fl.Forcing:
    kind = block.get("type")
    if kind == "constant":
        return fl.ConstantForcing(block["value"])
    if kind == "toy_model":
        return fl.toy_model_c(block["a"], block["b"], block.get("n", 2))
    if kind == "blowup_profile":
        return fl.blowup_profile(block["a"], block["b"], block.get("n", 2),
                                 collar=block.get("collar", 0.05),
                                 collar_w=block.get("collar_w", 0.012),
                                 dip=block.get("dip", 0.8))
    if kind == "smooth_tangent":
        return fl.smooth_tangent_profile(block["a"], block.get("n", 2), block.get("gamma"))
    raise ConfigError([("forcing.type", f"unknown forcing {kind!r}", 0)])


def build_initial(block: dict, geom: ge.GridGeometry) -> fl.ScalarField:
    gen = block.get("generator")
    if gen == "constant":
        return fl.ScalarField.constant(geom, block["value"])
    if gen == "radial_smoothstep":
        prof = fl.radial_smoothstep(block["hi"], block["lo"], block["r_lo"], block["r_hi"])
        return fl.radial_field(geom, prof)
    if gen == "gaussian_bump":
        fn = fl.gaussian_bump(block["amp"], block.get("center", [0.0] * geom.dim),
                              block["width"])
        return fl.ScalarField.from_function(geom, fn)
    raise ConfigError([("initial.generator", f"unknown generator {gen!r}", 0)])


# ---------------------------------------------------------------------------
# Case runners
# ---------------------------------------------------------------------------

@dataclass
class CaseResult:
    name: str
    passed: bool
    checks: list = dc_field(default_factory=list)   # (label, ok, detail)
    files: list = dc_field(default_factory=list)
    data: dict = dc_field(default_factory=dict)

    def record(self, label: str, ok: bool, detail: str = "") -> None:
        self.checks.append((label, bool(ok), detail))
        if not ok:
            self.passed = False

    def summary_line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        parts = "; ".join(f"{lbl}={'ok' if ok else 'FAIL'}{(' ' + d) if d else ''}"
                          for lbl, ok, d in self.checks)
        return f"[{tag}] {self.name}: {parts}" if parts else f"[{tag}] {self.name}"


def _lyapunov_ok(diags: so.RunDiagnostics, rel=1e-8, abs_tol=1e-12) -> tuple[bool, float]:
    E = diags.lyapunov_E
    worst = float(np.max(E[1:] - (E[:-1] + rel * np.abs(E[:-1]) + abs_tol))) if len(E) > 1 else -1.0
    return worst <= 0.0, worst


def run_case(config: RunConfig, out_dir: str | None = None) -> CaseResult:
    out = Path(out_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    runner = {
        "simulate": _case_simulate,
        "comparison-sweep": _case_comparison,
        "channel-convergence": _case_channel_convergence,
        "radial-limit": _case_radial_limit,
        "channel-analyze": _case_channel_analyze,
        "check-condition": _case_check_condition,
        "bounds": _case_bounds,
    }[config.case]
    return runner(config, out)


def _emit_diags(res: CaseResult, out: Path, name: str, diags: so.RunDiagnostics):
    path = out / f"{name}_diagnostics.csv"
    write_csv(path, so.RunDiagnostics.HEADER, diags.rows())
    res.files.append(str(path))


def _case_simulate(config: RunConfig, out: Path) -> CaseResult:
    res = CaseResult(config.name, True)
    spec = build_domain(config.block("domain"))
    sb = config.block("solver")
    geom = ge.build_grid(spec, sb["h"])
    c = build_forcing(config.block("forcing"))
    u0 = build_initial(config.block("initial"), geom)

    expect = config.block("expect")
    pin_mask = None
    cfg = so.SolverConfig(
        t_final=sb["t_final"], epsilon=sb.get("epsilon"),
        cfl_safety=sb.get("cfl_safety", 0.25),
        snapshot_every=sb.get("snapshot_every"), pin_mask=pin_mask,
        store_snapshots=sb.get("store_snapshots", True),
    )
    eps = cfg.epsilon if cfg.epsilon is not None else geom.h

    if "constant_exact" in expect:
        e = expect["constant_exact"]
        dt = e.get("dt") or so.cfl_dt(cfg, geom, c)
        steps = e["steps"]
        u = u0
        for _ in range(steps):
            u = so.step(u, dt, c, eps)
        c0 = float(c.value(np.zeros((1, geom.dim)))[0])
        u0v = float(u0.inside_values()[0])
        expected = u0v + c0 * eps * steps * dt
        err = float(np.max(np.abs(u.inside_values() - expected)))
        tol = e.get("rel_tol", 1e-12) * abs(expected)
        res.record("constant_exact", err <= tol, f"err={err:.3g} tol={tol:.3g}")
        res.data["final"] = u
        return res

    final, diags, snaps = so.run(u0, cfg, c)
    _emit_diags(res, out, config.name, diags)
    pgm = out / f"{config.name}_final.pgm"
    if geom.dim == 2:
        write_pgm(pgm, final.values, geom.inside)
        res.files.append(str(pgm))
    res.data.update(final=final, diags=diags, snaps=snaps, geom=geom, eps=eps, c=c)

    ly = expect.get("lyapunov", {})
    ok, worst = _lyapunov_ok(diags, ly.get("rel_tol", 1e-8), ly.get("abs_tol", 1e-12))
    res.record("lyapunov_monotone", ok, f"worst_excess={worst:.3g}")

    if "max_w_nonincreasing" in expect:
        tol = expect["max_w_nonincreasing"].get("tol", 1e-8)
        inc = float(np.max(np.diff(diags.max_w))) if len(diags.max_w) > 1 else -1.0
        res.record("max_w_nonincreasing", inc <= tol, f"max_increase={inc:.3g}")

    if "global_lipschitz" in expect:
        e = expect["global_lipschitz"]
        metrics = ge.boundary_metrics(spec)
        cmax = c.max_abs(geom)
        bounds = so.predicted_bounds(
            (float(np.max(np.abs(u0.inside_values()))), e["sup_du0"], e["sup_d2u0"]),
            (cmax, 0.0), metrics, e["delta"], geom.dim, cfg.t_final)
        lip_ok = bool(np.all(diags.lip_x <= bounds.global_L))
        res.record("lipschitz_below_global_L", lip_ok,
                   f"max_lip={np.max(diags.lip_x):.4g} L={bounds.global_L:.4g}")
        early = diags.lip_x[diags.t <= 1.0 + 1e-12]
        factor = e.get("no_growth_factor", 1.2)
        res.record("lipschitz_no_growth",
                   float(np.max(diags.lip_x)) <= factor * float(np.max(early)),
                   f"max={np.max(diags.lip_x):.4g} early={np.max(early):.4g}")
        slack = e.get("time_lip_slack", 1.2)
        bound_ut = slack * bounds.M + cmax * eps
        res.record("time_lipschitz", float(np.max(diags.sup_ut)) <= bound_ut,
                   f"sup_ut={np.max(diags.sup_ut):.4g} bound={bound_ut:.4g}")
        res.data["bounds"] = bounds

    if "radial_crosscheck" in expect:
        e = expect["radial_crosscheck"]
        rb = config.block("radial")
        problem = ra.RadialProblem(n=geom.dim, R=spec.radius, c=c,
                                   u0=_radial_u0(config.block("initial")))
        sol = ra.solve_radial(problem, rb["h"], cfg.t_final,
                              cfl_safety=rb.get("cfl_safety", 0.9))
        band = e.get("band_cells", 6) * geom.h
        a_jump = config.block("forcing")["a"]
        pts = geom.inside_centers()
        rr = np.linalg.norm(pts, axis=-1)
        keep = np.abs(rr - a_jump) > band
        diff = np.abs(final.values[geom.inside][keep] - sol.interp(rr[keep]))
        sup = float(np.max(diff))
        res.record("radial_crosscheck", sup <= e["tol"], f"sup={sup:.4g} tol={e['tol']}")
        res.data["radial_solution"] = sol
        res.data["crosscheck_sup"] = sup
    return res


def _radial_u0(block: dict):
    if block.get("generator") != "radial_smoothstep":
        raise ConfigError([("initial.generator", "radial cross-check needs radial_smoothstep", 0)])
    return fl.radial_smoothstep(block["hi"], block["lo"], block["r_lo"], block["r_hi"])


def _case_comparison(config: RunConfig, out: Path) -> CaseResult:
    res = CaseResult(config.name, True)
    e = config.block("expect")["comparison_trials"]
    trials, seed, tol = e["trials"], e.get("seed", 0), e.get("tol", 1e-12)
    sb = config.block("solver")
    rng = np.random.default_rng(seed)
    c = build_forcing(config.block("forcing"))
    geom = ge.build_grid(build_domain(config.block("domain")), sb["h"])
    cfg = so.SolverConfig(t_final=sb["t_final"], epsilon=sb.get("epsilon"),
                          cfl_safety=sb.get("cfl_safety", 0.25),
                          snapshot_every=sb.get("snapshot_every"))
    failures = 0
    for _ in range(trials):
        lo, hi = fl.random_smooth_pair(geom, rng)
        if not so.comparison_check(lo, hi, cfg, c, tol=tol):
            failures += 1
    res.record("ordering_preserved", failures == 0, f"failures={failures}/{trials}")
    write_csv(out / f"{config.name}_summary.csv", ("trials", "failures"),
              [(trials, failures)])
    res.files.append(str(out / f"{config.name}_summary.csv"))
    return res


def _case_channel_convergence(config: RunConfig, out: Path) -> CaseResult:
    from . import scenarios as sc

    res = CaseResult(config.name, True)
    db = config.block("domain")
    cb = config.block("channel")
    sb = config.block("solver")
    ib = config.block("initial")
    setup = sc.setup_channel_convergence(
        m=db["m"], k=db["k"], c_frac=cb.get("c_frac", 0.9),
        l_frac=cb.get("l_frac", 0.3), cells_across=cb.get("cells_across", 11),
        alpha=ib.get("alpha", 0.0), beta=ib.get("beta", 1.0),
        delta_T_product=cb.get("delta_T_product", 5.02),
        epsilon=sb.get("epsilon", 1e-6), cfl_safety=sb.get("cfl_safety", 0.9),
    )
    result = sc.run_channel_convergence(
        setup, band_cells=6,
        sandwich_margin_cells=cb.get("sandwich_margin_cells", 2))

    _emit_diags(res, out, config.name, result.diags)
    mpath = out / f"{config.name}_metric.csv"
    write_csv(mpath, ("t", "metric"), list(zip(result.metric_t, result.metric)))
    res.files.append(str(mpath))
    fpath = out / f"{config.name}_final.pgm"
    write_pgm(fpath, result.final.values, setup.grid.inside)
    res.files.append(str(fpath))
    res.data["result"] = result

    tol = cb.get("metric_tol", 0.02) * (setup.beta - setup.alpha)
    res.record("metric_final", result.metric[-1] <= tol,
               f"metric={result.metric[-1]:.4g} tol={tol:.4g}")
    tail = result.metric[result.metric_t >= 0.1 * setup.t_final]
    res.record("metric_nonincreasing", bool(np.all(np.diff(tail) <= 0)),
               f"max_step={np.max(np.diff(tail)) if len(tail) > 1 else 0:.3g}")
    res.record("sandwich", result.sandwich_ok, result.sandwich_detail)
    ok, worst = _lyapunov_ok(result.diags)
    res.record("lyapunov_monotone", ok, f"worst_excess={worst:.3g}")
    return res


def _case_radial_limit(config: RunConfig, out: Path) -> CaseResult:
    res = CaseResult(config.name, True)
    rb = config.block("radial")
    fb = config.block("forcing")
    ib = config.block("initial")
    n, R = rb.get("n", 2), rb.get("R", 1.0)
    c = build_forcing(fb)
    u0 = _radial_u0(ib)
    problem = ra.RadialProblem(n=n, R=R, c=c, u0=u0)
    regions = ra.classify(problem)
    sol = ra.solve_radial(problem, rb["h"], rb["t_final"],
                          cfl_safety=rb.get("cfl_safety", 0.9))
    d_vals = np.array([ra.d_of(float(r), regions, R) for r in sol.r])
    phi_inf = np.array([ra.phi_infinity(float(r), problem, regions) for r in sol.r])

    path = out / f"{config.name}_profile.csv"
    write_csv(path, ("r", "phi_T", "phi_inf", "d_of_r"),
              list(zip(sol.r, sol.phi, phi_inf, d_vals)))
    res.files.append(str(path))
    res.data.update(sol=sol, problem=problem, regions=regions, phi_inf=phi_inf, d_vals=d_vals)

    band = rb.get("band_cells", 6) * (R / round(R / rb["h"]))
    a_jump = rb.get("jump_at", fb.get("a"))
    keep = np.abs(sol.r - a_jump) > band
    sup = float(np.max(np.abs(sol.phi[keep] - phi_inf[keep])))
    res.record("profile_match", sup <= rb.get("tol", 0.05),
               f"sup={sup:.4g} tol={rb.get('tol', 0.05)}")

    if "jump_min" in rb:
        u_left = float(sol.interp(a_jump - band))
        u_right = float(sol.interp(a_jump + band))
        res.record("jump", u_left - u_right >= rb["jump_min"],
                   f"jump={u_left - u_right:.4g} min={rb['jump_min']}")
    if "lip_growth_min" in rb:
        in_band = np.abs(sol.r - a_jump) <= band
        h_eff = float(sol.r[1] - sol.r[0])
        lip_now = float(np.max(np.abs(np.diff(sol.phi[in_band])))) / h_eff
        u0v = np.asarray(u0(sol.r), dtype=float)
        lip_init = float(np.max(np.abs(np.diff(u0v[in_band])))) / h_eff
        res.record("band_lipschitz_growth", lip_now >= rb["lip_growth_min"] * lip_init,
                   f"now={lip_now:.4g} init={lip_init:.4g}")
        res.data.update(band_lip_now=lip_now, band_lip_init=lip_init)
    return res


def _case_channel_analyze(config: RunConfig, out: Path) -> CaseResult:
    res = CaseResult(config.name, True)
    db = config.block("domain")
    cb = config.block("channel")
    params = ch.ChannelParams(m=db["m"], k=db["k"])
    astar = ch.a_star(params)
    rmin = ch.channel_r_min(params)
    c = cb.get("c_frac", 0.9) / rmin
    a1, a2 = ch.solve_radii(params, c)
    l_frac = cb.get("l_frac", 0.3)
    l1 = l2 = l_frac * (a2 - a1)
    d0 = ch.delta0(params, a1, l1, l2)

    aa = np.linspace(0.05 * astar, 3.0 * astar, 400)
    path = out / f"{config.name}_arcs.csv"
    write_csv(path, ("a", "r", "r_prime"),
              list(zip(aa, ch.r_of(params, aa), ch.r_prime(params, aa))))
    res.files.append(str(path))

    spath = out / f"{config.name}_summary.csv"
    write_csv(spath, ("a_star", "r_min", "c", "a1", "a2", "delta0"),
              [(astar, rmin, c, a1, a2, d0)])
    res.files.append(str(spath))
    res.data.update(params=params, a_star=astar, r_min=rmin, c=c, a1=a1, a2=a2,
                    delta0=d0, l1=l1, l2=l2)

    res.record("critical_point", abs(float(ch.r_prime(params, astar))) <= 1e-10,
               f"r'(a*)={float(ch.r_prime(params, astar)):.2e}")
    resid = max(abs(float(ch.r_of(params, a1)) - 1.0 / c),
                abs(float(ch.r_of(params, a2)) - 1.0 / c))
    res.record("radii_residual", resid <= 1e-10 / c, f"resid={resid:.2e}")
    worst_angle = max(ch.right_angle_residual(params, float(a))
                      for a in np.linspace(0.2 * astar, 3.0 * astar, 100))
    res.record("right_angle", worst_angle <= 1e-12, f"worst={worst_angle:.2e}")
    res.record("delta0_positive", d0 > 0, f"delta0={d0:.4g}")

    if db.get("x_max"):
        spec = ge.Channel(m=db["m"], k=db["k"], x_max=db["x_max"])
        h = (l1 + l2) / cb.get("cells_across", 10)
        grid = ge.build_grid(spec, h)
        for a_edge, tag in ((a1 - l1, "sub"), (a1 + l2, "super")):
            mask, _ = ch.build_U_mask(params, a_edge, grid)
            p = out / f"{config.name}_mask_{tag}.pgm"
            write_pgm(p, mask.values, grid.inside)
            res.files.append(str(p))
    return res


def _case_check_condition(config: RunConfig, out: Path) -> CaseResult:
    res = CaseResult(config.name, True)
    spec = build_domain(config.block("domain"))
    c = build_forcing(config.block("forcing"))
    cond = config.block("condition")
    report = ge.check_forcing_condition(spec, c, cond["delta"], cond.get("samples", 64))
    path = out / f"{config.name}_condition.csv"
    write_csv(path, ("holds", "worst_margin") + tuple(f"x{i}" for i in range(spec.dim)),
              [(report.holds, report.worst_margin) + report.worst_point])
    res.files.append(str(path))
    res.data["report"] = report
    if "expect_holds" in cond:
        res.record("condition", report.holds == cond["expect_holds"],
                   f"holds={report.holds} margin={report.worst_margin:.4g}")
    else:
        res.record("condition", True, f"holds={report.holds} margin={report.worst_margin:.4g}")
    return res


def _case_bounds(config: RunConfig, out: Path) -> CaseResult:
    res = CaseResult(config.name, True)
    spec = build_domain(config.block("domain"))
    c = build_forcing(config.block("forcing"))
    b = config.block("bounds")
    metrics = ge.boundary_metrics(spec)
    ext = spec.bounding_extents()
    axes = [np.linspace(-e, e, 128) for e in ext]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.dim)
    pts = pts[spec.contains(pts)]
    sup_c = float(np.max(np.abs(c.value(pts))))
    sup_dc = float(np.max(np.linalg.norm(c.gradient(pts), axis=-1)))
    pb = so.predicted_bounds((b["sup_u0"], b["sup_du0"], b["sup_d2u0"]),
                             (sup_c, sup_dc), metrics, b["delta"], spec.dim, b["T"])
    path = out / f"{config.name}_bounds.csv"
    write_csv(path, ("C0", "K0", "M", "global_L", "M_prime", "local_CT", "T", "branch"),
              [(metrics.C0, metrics.K0, pb.M, pb.global_L, pb.M_prime, pb.local_CT,
                pb.T, pb.branch)])
    res.files.append(str(path))
    res.data["bounds"] = pb
    res.record("bounds_finite", np.isfinite([pb.M, pb.global_L, pb.local_CT]).all(),
               f"M={pb.M:.4g} L={pb.global_L:.4g}")
    return res


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="levelflow",
                                     description="forced mean curvature flow lab")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "radial-limit", "channel-analyze", "check-condition", "bounds"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        config = parse_config(Path(args.config).read_text(encoding="utf-8"))
    except ConfigError as e:
        for pth, msg, line in e.errors:
            print(f"config error at {pth} (line {line}): {msg}", file=sys.stderr)
        return 2

    compatible = {"simulate": ("simulate", "comparison-sweep")}.get(args.command, (args.command,))
    if config.case not in compatible:
        print(f"config case {config.case!r} does not match subcommand {args.command!r}",
              file=sys.stderr)
        return 2
    if args.threads is not None:
        try:
            import numba
            numba.set_num_threads(max(1, args.threads))
        except ImportError:
            pass

    try:
        result = run_case(config, out_dir=args.out)
    except so.SolverAbort as e:
        print(f"[FAIL] {config.name}: solver abort: {e}")
        return 1
    print(result.summary_line())
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
