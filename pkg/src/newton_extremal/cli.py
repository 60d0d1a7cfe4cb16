"""Scenario runner: ``newton-extremal run <scenario> [--config PATH] [--out DIR] [--seed N] [--parallel]``.

Every scenario collects its tables, figures and checks in memory; a single
writer puts them on disk once the scenario has finished. Exit status is 0
when every check passes, 2 when a check fails (a ``witness_<scenario>.csv``
is written next to the reports) and 1 on configuration or operational errors.
"""
import argparse
import configparser
import csv
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dirichlet, kelvin, massmove, planar, star
from .errors import ConfigError, ExtremalError
from .kernel import KernelEval, dh_dtheta, eval_D, mixed_partial
from .measure import AxisymMeasure, sample_feasible
from .svg import polyline_svg, sign_heatmap_svg

ENV_OUT = "NEWTON_EXTREMAL_OUT"
SAMPLING = ("thm12", "ineq19")

# ---------------------------------------------------------------------------
# configuration

_NUM = re.compile(r"^[0-9.eE+\-*/() ]*(pi)?[0-9.eE+\-*/() ]*$")


def _number(text):
    """Float with optional ``pi`` (``3*pi/4``, ``pi/6``, ``0.25``)."""
    s = text.strip()
    if not s or not _NUM.match(s):
        raise ValueError(f"not a number: {text!r}")
    try:
        return float(eval(s.replace("pi", repr(math.pi)), {"__builtins__": {}}, {}))
    except Exception as exc:
        raise ValueError(f"not a number: {text!r}") from exc


def _numbers(text):
    return tuple(_number(t) for t in text.split(",") if t.strip())


def _ints(text):
    vals = _numbers(text)
    if any(v != int(v) for v in vals):
        raise ValueError(f"not integers: {text!r}")
    return tuple(int(v) for v in vals)


def _int(text):
    (v,) = _ints(text)
    return v


PARSERS = {"int": _int, "float": _number, "floats": _numbers, "ints": _ints}

# name -> (kind, default); keys ending in "tol" must be positive
SCHEMA = {
    "prop41": {"dims": ("ints", "3,4,5,6,7,8"), "points": ("int", 24), "exclusion": ("float", 0.05),
               "fd_step": ("float", 1e-4), "rel_tol": ("float", 1e-3)},
    "build-extremal": {"n": ("int", 4), "xi1": ("float", math.pi / 4), "xi2": ("float", 3 * math.pi / 4),
                       "degree": ("int", 20), "residual_tol": ("float", 1e-6), "bound_tol": ("float", 1e-6),
                       "samples": ("int", 181)},
    "thm12": {"n": ("int", 3), "xi1": ("float", math.pi / 2), "samples": ("int", 100),
              "radii": ("floats", "0.25,0.5,0.75,0.9,1.1,2"), "hinges": ("int", 8),
              "margin_tol": ("float", 1e-9)},
    "ineq19": {"n": ("int", 3), "xi1": ("float", math.pi / 2), "samples": ("int", 100),
               "radii": ("floats", "0.25,0.5,0.75,1"), "margin_tol": ("float", 1e-9)},
    "kelvin-limit": {"n": ("int", 4), "xi1": ("float", math.pi / 4), "xi2": ("float", 3 * math.pi / 4),
                     "kmin": ("int", 4), "kmax": ("int", 12), "rel_tol": ("float", 0.02)},
    "planar": {"xi1": ("float", 0.6), "xi1p": ("float", 1.0), "xi2": ("float", 2.2),
               "theta0": ("floats", "1.0,1.4,1.8,2.1"), "samples": ("int", 257), "value_tol": ("float", 1e-8)},
    "massmove": {"n": ("int", 3), "dims": ("ints", "3,4,5,6,7,8"), "theta0": ("float", math.pi / 3),
                 "tau1": ("float", 1.5), "tau3": ("float", 2.6), "B0": ("float", 10.0),
                 "eps0": ("float", 1e-3), "inversion_tol": ("float", 1e-12), "mean_tol": ("float", 1e-8)},
}
SCENARIOS = tuple(SCHEMA) + ("all",)


@dataclass
class ScenarioConfig:
    name: str
    params: dict
    seed: int = None
    parallel: bool = False


def load_config(path, names, seed=None, parallel=False):
    """Parse and validate every requested scenario before anything runs."""
    cp = configparser.ConfigParser(interpolation=None)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        unknown = set(cp.sections()) - set(SCHEMA)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    out = []
    for name in names:
        section = cp[name] if cp.has_section(name) else {}
        extra = set(section) - set(SCHEMA[name]) - {"seed"}
        if extra:
            raise ConfigError(f"[{name}] unknown keys: {sorted(extra)}")
        params = {}
        for key, (kind, default) in SCHEMA[name].items():
            raw = section.get(key, default)
            try:
                params[key] = PARSERS[kind](raw) if isinstance(raw, str) else raw
            except ValueError as exc:
                raise ConfigError(f"[{name}] {key}: {exc}") from exc
            if key.endswith("tol") and not params[key] > 0:
                raise ConfigError(f"[{name}] {key} must be positive")
        s = seed
        if s is None and "seed" in section:
            try:
                s = _int(section["seed"])
            except ValueError as exc:
                raise ConfigError(f"[{name}] seed: {exc}") from exc
        if name in SAMPLING and s is None:
            raise ConfigError(f"scenario {name} needs a seed (--seed or seed = in [{name}])")
        out.append(ScenarioConfig(name, params, s, parallel))
    return out


# ---------------------------------------------------------------------------
# results and writer


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    ok: bool
    witness: dict = field(default_factory=dict)


@dataclass
class Result:
    scenario: str
    tables: dict = field(default_factory=dict)   # file -> (header, rows)
    figures: dict = field(default_factory=dict)  # file -> svg text
    checks: list = field(default_factory=list)

    def check(self, name, value, tolerance, ok, **witness):
        self.checks.append(Check(name, float(value), float(tolerance), bool(ok), witness))

    @property
    def ok(self):
        return all(c.ok for c in self.checks)


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])


def write_result(res, out):
    out.mkdir(parents=True, exist_ok=True)
    for fname, (header, rows) in res.tables.items():
        _write_csv(out / fname, header, rows)
    for fname, text in res.figures.items():
        with open(out / fname, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    _write_csv(out / f"summary_{res.scenario}.csv", ["scenario", "check", "value", "tolerance", "status"],
               [(res.scenario, c.name, c.value, c.tolerance, "pass" if c.ok else "FAIL") for c in res.checks])
    failed = [c for c in res.checks if not c.ok]
    if failed:
        keys = sorted({k for c in failed for k in c.witness})
        _write_csv(out / f"witness_{res.scenario}.csv", ["check", "value", "tolerance"] + keys,
                   [[c.name, c.value, c.tolerance] + [c.witness.get(k, "") for k in keys] for c in failed])


def _map(func, items, parallel):
    if not parallel:
        return [func(x) for x in items]
    with ThreadPoolExecutor() as pool:
        return list(pool.map(func, items))


# ---------------------------------------------------------------------------
# scenarios


def run_prop41(cfg):
    p = cfg.params
    res = Result("prop41")
    g = np.linspace(0.05, np.pi - 0.05, p["points"])
    T, T1 = np.meshgrid(g, g, indexing="ij")
    keep = np.abs(T - T1) >= p["exclusion"]
    T, T1 = T[keep], T1[keep]
    h = p["fd_step"]

    def one(n):
        kc = KernelEval(n)
        D = eval_D(T, T1, n, kc)
        mixed = mixed_partial(T, T1, n, kc)
        fd = (dh_dtheta(T, T1 + h, kc) - dh_dtheta(T, T1 - h, kc)) / (2.0 * h)
        return n, D, mixed, fd

    rows = []
    for n, D, mixed, fd in _map(one, p["dims"], cfg.parallel):
        rel = np.abs(fd / mixed - 1.0)
        for row in zip([n] * T.size, T, T1, D, mixed, fd):
            rows.append(row)
        i, j, k = int(np.argmax(D)), int(np.argmax(mixed * fd)), int(np.argmax(rel))
        res.check(f"D<0 n={n}", D[i], 0.0, D[i] < 0, n=n, theta=T[i], theta1=T1[i])
        res.check(f"fd sign n={n}", -(mixed * fd)[j], 0.0, (mixed * fd)[j] > 0 and np.all(fd < 0),
                  n=n, theta=T[j], theta1=T1[j])
        res.check(f"fd value n={n}", rel[k], p["rel_tol"], rel[k] < p["rel_tol"], n=n, theta=T[k], theta1=T1[k])
        res.figures[f"prop41_sign_n{n}.svg"] = sign_heatmap_svg(T, T1, D, f"sign of D, n={n}")
    res.tables["prop41_grid.csv"] = (["n", "theta", "theta1", "D", "mixed", "fd"], rows)
    return res


def _profile_table(sol, samples, radii=(0.5, 1.0, 2.0)):
    th = np.linspace(0.0, np.pi, samples)
    cols = [sol.potential(np.full(th.size, r), th, on_singular="inf") for r in radii]
    header = ["theta"] + [f"P(r={r:g})" for r in radii]
    return th, cols, (header, list(zip(th, *cols)))


def run_build_extremal(cfg):
    p = cfg.params
    res = Result("build-extremal")
    disc = dirichlet.Discretization(degree=p["degree"])
    n, xi1, xi2 = p["n"], p["xi1"], p["xi2"]
    if xi2 >= np.pi:
        sol = dirichlet.build_single_cap(xi1, n, disc)
    else:
        sol = dirichlet.build_extremal(dirichlet.CapGeometry(n, xi1, xi2), disc)
    g = sol.geometry
    res.tables["extremal.csv"] = (["kind", "n", "xi1", "xi2", "d", "M", "gamma", "a", "residual"],
                                  [(sol.kind, n, g.xi1, g.xi2, sol.d, sol.M, sol.gamma, sol.a, sol.residual)])
    th, cols, table = _profile_table(sol, p["samples"])
    res.tables["extremal_profile.csv"] = table
    res.figures["extremal_profile.svg"] = polyline_svg(
        [(h, th, c) for h, c in zip(table[0][1:], cols)], f"extremal potential, n={n}")
    # boundary values on the caps
    t1 = np.linspace(0.0, xi1, 64)
    e1 = float(np.max(np.abs(sol.potential(np.ones_like(t1), t1) - sol.M)))
    res.check("|V-M| on E1", e1, p["residual_tol"], e1 < p["residual_tol"], n=n, xi1=xi1, xi2=xi2)
    if xi2 < np.pi:
        t2 = np.linspace(xi2, np.pi, 64)
        e2 = float(np.max(np.abs(sol.potential(np.ones_like(t2), t2) - sol.d)))
        res.check("|V-d| on E2", e2, p["residual_tol"], e2 < p["residual_tol"], n=n, xi1=xi1, xi2=xi2)
    v0 = float(sol.potential(np.array([0.0]), np.array([0.0]))[0])
    res.check("V(0)-1", abs(v0 - 1.0), 1e-8, abs(v0 - 1.0) < 1e-8, n=n, xi1=xi1, xi2=xi2)
    neg = sol.negative_variation
    res.check("negative part of sigma", neg, p["residual_tol"], neg < p["residual_tol"], n=n, xi1=xi1, xi2=xi2)
    mem = dirichlet.check_bounds(sol, p["bound_tol"])
    res.check("d <= V <= M", max(sol.d - mem.min_ball, mem.max_all - sol.M), p["bound_tol"], mem.ok,
              n=n, xi1=xi1, xi2=xi2, where=" ".join(map(str, mem.witness)))
    return res


def _sample_seeds(seed, count):
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def _pair(n, xi1):
    P = dirichlet.build_single_cap(xi1, n)
    L = dirichlet.build_L_extremal(P.d, n)
    return P, L


def run_thm12(cfg):
    p = cfg.params
    res = Result("thm12")
    n = p["n"]
    P, L = _pair(n, p["xi1"])
    levels = np.linspace(P.d, P.M, p["hinges"] + 2)[1:-1]
    phis = star.standard_phis(levels)
    pts = (p["xi1"], L.xi2_prime)
    ref = star.DominanceReference(L, n, p["radii"], phis, points=pts)
    seeds = _sample_seeds(cfg.seed, p["samples"])

    def one(s):
        mix = sample_feasible(P.d, P.M, n, s)
        return mix, star.dominance_check(mix, ref)

    rows, worst = [], None
    for k, (s, (mix, rep)) in enumerate(zip(seeds, _map(one, seeds, cfg.parallel))):
        for (r, tag), m in rep.mean_margin.items():
            rows.append((k, s, r, tag, m))
            if worst is None or m < worst[0]:
                worst = (m, k, s, r, tag)
    tol = p["margin_tol"]
    res.tables["thm12_margins.csv"] = (["sample", "seed", "r", "phi", "margin"], rows)
    m, k, s, r, tag = worst
    res.check("convex-mean margin", m, tol, m >= -tol * max(1.0, abs(ref.means[(r, tag)])),
              sample=k, seed=s, r=r, phi=tag, d=P.d, M=P.M, n=n)
    # cumulative comparison of the pair: int_0^tau (P' - P) <= 0
    taus = np.linspace(0.0, np.pi, 97)
    crow, cmax = [], None
    for r in p["radii"] + (1.0,):
        cum = star.cumulative_profile(P, r, n, taus, pts) - star.cumulative_profile(L, r, n, taus, pts)
        crow += [(r, t, c) for t, c in zip(taus, cum)]
        i = int(np.argmax(cum))
        if cmax is None or cum[i] > cmax[0]:
            cmax = (float(cum[i]), r, float(taus[i]))
    res.tables["thm12_cumulative.csv"] = (["r", "tau", "value"], crow)
    res.check("cumulative P - P'", cmax[0], tol, cmax[0] <= tol, r=cmax[1], tau=cmax[2], d=P.d, n=n)
    per = {r: [x[4] for x in rows if x[2] == r and x[3] == "identity"] for r in p["radii"]}
    res.figures["thm12_margins.svg"] = polyline_svg(
        [(f"r={r:g}", np.arange(len(v)), v) for r, v in per.items()], "identity-mean margin per sample")
    return res


def run_ineq19(cfg):
    p = cfg.params
    res = Result("ineq19")
    n = p["n"]
    P, L = _pair(n, p["xi1"])
    seeds = _sample_seeds(cfg.seed, p["samples"])
    radii = np.array(p["radii"])
    top = L.potential(radii, np.zeros_like(radii), on_singular="inf")
    bot = L.potential(radii, np.full_like(radii, np.pi), on_singular="inf")

    def one(s):
        mix = sample_feasible(L.d, np.inf, n, s)
        return [star.ball_extremes(mix, r) for r in radii]

    rows, hi_worst, lo_worst = [], None, None
    for k, (s, ext) in enumerate(zip(seeds, _map(one, seeds, cfg.parallel))):
        for r, (mx, mn), t, b in zip(radii, ext, top, bot):
            rows.append((k, s, r, mx, mn, t, b))
            if hi_worst is None or mx - t > hi_worst[0]:
                hi_worst = (mx - t, k, s, r)
            if lo_worst is None or b - mn > lo_worst[0]:
                lo_worst = (b - mn, k, s, r)
    tol = p["margin_tol"]
    res.tables["ineq19.csv"] = (["sample", "seed", "r", "max_p", "min_p", "P_top", "P_bottom"], rows)
    res.check("max p - P'(r,0)", hi_worst[0], tol, hi_worst[0] <= tol,
              sample=hi_worst[1], seed=hi_worst[2], r=hi_worst[3], d=L.d, n=n)
    res.check("P'(r,pi) - min p", lo_worst[0], tol, lo_worst[0] <= tol,
              sample=lo_worst[1], seed=lo_worst[2], r=lo_worst[3], d=L.d, n=n)
    return res


def run_kelvin(cfg):
    p = cfg.params
    res = Result("kelvin-limit")
    sol = dirichlet.build_extremal(dirichlet.CapGeometry(p["n"], p["xi1"], p["xi2"]))
    lim = kelvin.boundary_limit_check(sol, range(p["kmin"], p["kmax"] + 1))
    res.tables["kelvin_limit.csv"] = (["delta", "slope"], list(zip(lim.deltas, lim.slopes)))
    res.check("boundary slope rel error", lim.rel_error, p["rel_tol"], lim.rel_error < p["rel_tol"],
              n=p["n"], xi1=p["xi1"], xi2=p["xi2"], estimate=lim.estimate, target=lim.target)
    return res


def run_planar(cfg):
    p = cfg.params
    res = Result("planar")
    tol = p["value_tol"]
    g, g2 = planar.PlanarGeometry(p["xi1"], p["xi2"]), planar.PlanarGeometry(p["xi1p"], p["xi2"])
    wit = dict(xi1=g.xi1, xi1p=g2.xi1, xi2=g.xi2)
    for t0 in p["theta0"]:
        v = planar.tail_slope_gain(g, g2, t0)
        res.check(f"gap-slope integral theta0={t0:g}", v, 0.0, v > 0, theta0=t0, **wit)
    c = planar.cumulative_boundary_gap(g, g2, p["samples"])
    interior = (c.tau > 0) & (c.tau < np.pi)
    ends = np.abs(c.values[~interior])
    res.check("cumulative interior max", float(np.max(c.values[interior])), tol,
              np.max(c.values[interior]) <= tol, tau=float(c.tau[interior][np.argmax(c.values[interior])]), **wit)
    res.check("cumulative endpoints", float(np.max(ends)), tol, np.max(ends) < tol, **wit)
    for geo, tag in ((g, "xi1"), (g2, "xi1p")):
        d, M = planar.planar_dM(geo)
        err = abs((M - d) - planar.gap_drop(geo))
        res.check(f"M-d path consistency ({tag})", err, tol, err < tol, **wit)
    d1, _ = planar.planar_dM(g)
    d2, _ = planar.planar_dM(g2)
    err = abs((d2 - d1) - planar.d_shift_integral(g, g2))
    res.check("d' - d radial integral", err, 1e-10, err < 1e-10, **wit)
    res.tables["planar_cumulative.csv"] = (["tau", "value"], list(zip(c.tau, c.values)))
    th = np.linspace(0.0, np.pi, p["samples"])
    series = [(lab, th, planar.boundary_profile(th, geo)) for lab, geo in (("P", g), ("P'", g2))]
    res.tables["planar_profile.csv"] = (["theta", "P", "P_prime"], list(zip(th, series[0][2], series[1][2])))
    res.figures["planar_profile.svg"] = polyline_svg(series, "planar boundary profiles")
    return res


def run_massmove(cfg):
    p = cfg.params
    res = Result("massmove")
    n = p["n"]
    base = AxisymMeasure.uniform(n)
    plan = massmove.MassMovePlan.balanced(base, p["tau1"], p["tau3"], p["B0"])
    th = np.concatenate([plan.left_theta, plan.right_theta])
    worst = 0.0
    for eps in (-0.5 * p["eps0"], 0.5 * p["eps0"], p["eps0"]):
        worst = max(worst, float(np.max(np.abs(massmove.g_residual(th, eps, p["B0"], n)))))
    res.check("inversion residual", worst, p["inversion_tol"], worst < p["inversion_tol"], n=n, B=p["B0"])
    mv = abs(massmove.mean_value_defect(plan, 0.5 * p["eps0"]))
    res.check("mean-value identity", mv, p["mean_tol"], mv < p["mean_tol"], n=n, B=p["B0"])
    rep = massmove.derivative_positivity(base, n, p["theta0"], (p["tau1"], p["tau3"]), p["B0"], p["eps0"])
    res.tables["massmove_B.csv"] = (["B", "min_derivative"], rep.history)
    res.check("eps-derivative positivity", -rep.min_derivative, 0.0, rep.positive,
              n=n, B=rep.B, r=rep.witness[0], theta=rep.witness[1])
    rows = []
    for m in p["dims"]:
        ratio_rep = massmove.ratio_monotonicity(m)
        rows.append((m, ratio_rep.fraction_positive, ratio_rep.min_value))
        res.check(f"ratio monotonicity n={m}", ratio_rep.fraction_positive, 1.0, ratio_rep.fraction_positive == 1.0,
                  n=m, theta=ratio_rep.witness[0], theta1=ratio_rep.witness[1], min_value=ratio_rep.min_value)
    res.tables["massmove_ratio.csv"] = (["n", "fraction_positive", "min_value"], rows)
    return res


RUNNERS = {"prop41": run_prop41, "build-extremal": run_build_extremal, "thm12": run_thm12,
           "ineq19": run_ineq19, "kelvin-limit": run_kelvin, "planar": run_planar, "massmove": run_massmove}


# ---------------------------------------------------------------------------
# entry point


def output_dir(flag):
    env = os.environ.get(ENV_OUT)
    return Path(env or flag or "newton_extremal_out")


def build_parser():
    parser = argparse.ArgumentParser(prog="newton-extremal",
                                     description="Verification scenarios for extremal sphere potentials.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a named scenario")
    run.add_argument("scenario", choices=SCENARIOS)
    run.add_argument("--config", help="INI file with one section per scenario")
    run.add_argument("--out", help=f"output directory (overridden by ${ENV_OUT})")
    run.add_argument("--seed", type=int, help="seed for the sampling scenarios")
    run.add_argument("--parallel", action="store_true", help="parallel sweeps inside scenarios")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    names = list(SCHEMA) if args.scenario == "all" else [args.scenario]
    try:
        configs = load_config(args.config, names, args.seed, args.parallel)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    out = output_dir(args.out)
    status = 0
    for cfg in configs:
        try:
            res = RUNNERS[cfg.name](cfg)
            write_result(res, out)
        except (ExtremalError, OSError, ValueError) as exc:
            print(f"{cfg.name}: {type(exc).__module__}.{type(exc).__name__}: {exc}", file=sys.stderr)
            return 1
        for c in res.checks:
            print(f"{cfg.name:15s} {'pass' if c.ok else 'FAIL'}  {c.name}: {c.value:.3e} (tol {c.tolerance:.1e})")
        if not res.ok:
            status = 2
    return status


if __name__ == "__main__":
    sys.exit(main())
