"""Named, configuration-driven experiments with machine-readable results."""
from __future__ import annotations

import ast
import configparser
import math
import operator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels, dn, dynamics, microlocal, paradiff
from .fitting import loglog_slope
from .spectral import PROFILE_DESCRIPTION, PeriodicGrid, SpectralField, l2_norm, sobolev_norm


class ConfigError(ValueError):
    """Invalid or inadmissible configuration."""


# --- numbers and initial data -------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
           ast.Pow: operator.pow}
_NAMES = {"pi": math.pi, "e": math.e, "inf": math.inf}


def _eval_number(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_number(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_number(node.left), _eval_number(node.right))
    raise ConfigError(f"not a numeric expression: {ast.unparse(node)!r}")


def parse_number(text) -> float:
    if isinstance(text, (int, float)):
        return float(text)
    try:
        tree = ast.parse(str(text).strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse number {text!r}") from exc
    return _eval_number(tree.body)


def parse_list(text, cast=float):
    return [cast(parse_number(t)) for t in str(text).split(",") if t.strip()]


@dataclass(frozen=True)
class Term:
    kind: str
    args: tuple


def parse_initial(text: str, dim: int = 1) -> list:
    """Parse ``mode(k, amp, phase) + gaussian(center, width, amp) - ...``.

    In d = 2 a mode takes (kx, ky, amp, phase) and a gaussian (cx, cy, width, amp).
    ``0`` or an empty string means the zero field.
    """
    text = (text or "").strip()
    if text in ("", "0", "0.0", "rest"):
        return []
    try:
        tree = ast.parse(text, mode="eval").body
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse initial data {text!r}") from exc
    arity = {"mode": 3 if dim == 1 else 4, "gaussian": 3 if dim == 1 else 4}
    terms = []

    def walk(node, sign):
        if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Sub)):
            walk(node.left, sign)
            walk(node.right, sign if isinstance(node.op, ast.Add) else -sign)
            return
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            walk(node.operand, -sign)
            return
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in arity:
            name = node.func.id
            args = [_eval_number(a) for a in node.args]
            if len(args) == arity[name] - 1 and name == "mode":
                args.append(0.0)
            if len(args) != arity[name]:
                raise ConfigError(f"{name} takes {arity[name]} arguments in d = {dim}, got {len(args)}")
            # the amplitude is the last argument of gaussian and the second-to-last of mode
            amp_index = -2 if name == "mode" else -1
            args[amp_index] *= sign
            terms.append(Term(name, tuple(args)))
            return
        raise ConfigError(f"unsupported term {ast.unparse(node)!r}; use mode(...) and gaussian(...)")

    walk(tree, 1.0)
    return terms


def build_field(grid: PeriodicGrid, text: str) -> SpectralField:
    vals = np.zeros(grid.shape)
    L = grid.period
    for term in parse_initial(text, grid.dim):
        if term.kind == "mode":
            *ks, amp, phase = term.args
            arg = sum(2 * math.pi * k / L * x for k, x in zip(ks, grid.xvec))
            vals = vals + amp * np.cos(arg + phase)
        else:
            *center, width, amp = term.args
            if width <= 0:
                raise ConfigError("gaussian width must be positive")
            r2 = 0.0
            for c, x in zip(center, grid.xvec):
                d = (x - c + L / 2) % L - L / 2
                r2 = r2 + d * d
            vals = vals + amp * np.exp(-r2 / width**2)
    f = SpectralField.from_values(grid, vals)
    if np.any(np.abs(f.coeffs[~grid.dealias_mask]) > 1e-8 * max(1e-300, float(np.max(np.abs(f.coeffs))))):
        raise ConfigError(f"initial data {text!r} is not resolved inside the dealiased band on N = {grid.n}")
    return f


def dominant_mode(text: str, dim: int = 1) -> float:
    modes = [t for t in parse_initial(text, dim) if t.kind == "mode"]
    if not modes:
        return 1.0
    best = max(modes, key=lambda t: abs(t.args[-2]))
    return float(np.linalg.norm(best.args[:-2]))


# --- configuration ------------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int
    workers: int
    dim: int
    n: int
    period: float
    g: float
    depth: dynamics.DepthConfig
    h: float | None
    delta: float | None
    eta: str
    psi: str
    cfl: float
    periods: float
    dt: float | None
    params: dict
    raw_text: str = ""
    sections: dict = field(default_factory=dict)

    def grid(self, n: int | None = None, dim: int | None = None) -> PeriodicGrid:
        return PeriodicGrid(dim or self.dim, n or self.n, self.period)

    def param(self, key, default=None, cast=float):
        if key not in self.params:
            return default
        return cast(parse_number(self.params[key])) if cast in (float, int) else cast(self.params[key])

    def param_list(self, key, default, cast=float):
        if key not in self.params:
            return list(default)
        return parse_list(self.params[key], cast)

    def settings(self, levels=None, lower_levels=32) -> dynamics.SolverSettings:
        return dynamics.SolverSettings(h=self.h, levels=levels, lower_levels=lower_levels, delta=self.delta)


def _get(cp, section, key, default=None):
    if cp.has_option(section, key):
        return cp.get(section, key)
    return default


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    text = path.read_text()
    return parse_config(text)


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    name = _get(cp, "experiment", "name")
    if not name:
        raise ConfigError("missing [experiment] name")
    name = name.strip()
    if name not in EXPERIMENTS:
        raise ConfigError(unknown_message(name))
    try:
        seed = int(parse_number(_get(cp, "experiment", "seed", "0")))
        workers = int(parse_number(_get(cp, "experiment", "workers", "1")))
        dim = int(parse_number(_get(cp, "grid", "dim", "1")))
        n = int(parse_number(_get(cp, "grid", "n", "64")))
        period = parse_number(_get(cp, "grid", "period", "2*pi"))
        g = parse_number(_get(cp, "physics", "g", "1.0"))
        depth = dynamics.DepthConfig.parse(_get(cp, "physics", "depth", "deep"))
        h = _get(cp, "physics", "h")
        delta = _get(cp, "physics", "delta")
        cfl = parse_number(_get(cp, "integrator", "cfl", "0.5"))
        periods = parse_number(_get(cp, "integrator", "periods", "1"))
        dt = _get(cp, "integrator", "dt")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    cfg = ExperimentConfig(
        experiment=name, seed=seed, workers=workers, dim=dim, n=n, period=period, g=g, depth=depth,
        h=None if h is None else parse_number(h), delta=None if delta is None else parse_number(delta),
        eta=_get(cp, "initial", "eta", ""), psi=_get(cp, "initial", "psi", ""),
        cfl=cfl, periods=periods, dt=None if dt is None else parse_number(dt),
        params=dict(cp.items("params")) if cp.has_section("params") else {},
        raw_text=text, sections={s: dict(cp.items(s)) for s in cp.sections()},
    )
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    problems = []
    if cfg.dim not in (1, 2):
        problems.append("grid.dim must be 1 or 2")
    if cfg.n < 16 or cfg.n > 4096 or cfg.n & (cfg.n - 1):
        problems.append("grid.n must be a power of two in [16, 4096]")
    if not cfg.period > 0:
        problems.append("grid.period must be positive")
    if not cfg.g > 0:
        problems.append("physics.g must be positive")
    if cfg.h is not None and not cfg.h > 0:
        problems.append("physics.h must be positive")
    if cfg.delta is not None and not cfg.delta > 0:
        problems.append("physics.delta must be positive")
    if not 0 < cfg.cfl <= 1:
        problems.append("integrator.cfl must lie in (0, 1]")
    if not cfg.periods > 0:
        problems.append("integrator.periods must be positive")
    if cfg.dt is not None and not cfg.dt > 0:
        problems.append("integrator.dt must be positive")
    if cfg.seed < 0:
        problems.append("experiment.seed must be non-negative")
    if cfg.workers < 1:
        problems.append("experiment.workers must be at least 1")
    for key, text in (("eta", cfg.eta), ("psi", cfg.psi)):
        try:
            parse_initial(text, cfg.dim)
        except ConfigError as exc:
            problems.append(f"initial.{key}: {exc}")
    if problems:
        raise ConfigError("; ".join(problems))


def unknown_message(name: str) -> str:
    import difflib

    near = difflib.get_close_matches(name, list(EXPERIMENTS), n=3, cutoff=0.3)
    hint = f"; nearest matches: {', '.join(near)}" if near else ""
    return f"unknown experiment {name!r}{hint}"


# --- results ---------------------------------------------------------------------------------


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    relation: str

    @property
    def passed(self) -> bool:
        v = self.value
        if v is None or (isinstance(v, float) and math.isnan(v)):
            return False
        if self.relation == "<=":
            return v <= self.threshold
        if self.relation == ">=":
            return v >= self.threshold
        raise ValueError(self.relation)

    def as_dict(self):
        return {"name": self.name, "value": self.value, "threshold": self.threshold, "relation": self.relation,
                "passed": self.passed}


@dataclass
class ExperimentResult:
    name: str
    measured: dict
    checks: list
    rows: list
    trajectory: list | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _pmap(fn, items, workers):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _row(parameter, measured, slope=None, residual=None, **extra):
    r = {"parameter": parameter, "measured": measured, "fitted_slope": "" if slope is None else slope,
         "residual": "" if residual is None else residual}
    r.update(extra)
    return r


def _state(cfg: ExperimentConfig, grid=None, settings=None) -> dynamics.SurfaceState:
    grid = grid or cfg.grid()
    return dynamics.SurfaceState(0.0, build_field(grid, cfg.eta), build_field(grid, cfg.psi), cfg.g, cfg.depth,
                                 settings or cfg.settings())


def _omega(cfg, k):
    if cfg.depth.kind == "deep":
        return math.sqrt(cfg.g * k)
    return math.sqrt(cfg.g * k * math.tanh(cfg.depth.H * k))


# --- the experiments ---------------------------------------------------------------------------


def run_dn_convergence(cfg: ExperimentConfig) -> ExperimentResult:
    ns = cfg.param_list("ns", [32, 64, 128], int)
    samples = cfg.param("samples", 10, int)
    band = cfg.param("band", 0.5)
    tol_deep = cfg.param("tolerance_deep", 1e-8)
    tol_flat = cfg.param("tolerance_flat", 1e-6)
    flat_surface = not parse_initial(cfg.eta, cfg.dim)
    bottom = cfg.depth.kind
    depth = cfg.depth.H
    h = cfg.h if cfg.h is not None else (1.0 if bottom == "deep" else 0.5 * depth)
    finest = {}

    def one(n):
        grid = cfg.grid(n)
        eta = build_field(grid, cfg.eta)
        fmap = dn.build_flattening(eta, h, cfg.delta, bottom=bottom, depth=depth)
        op = dn.StripOperator(fmap)
        kcut = band * grid.dealias_fraction * grid.n / 2
        errs, outs = [], []
        local = np.random.default_rng([cfg.seed, n])
        for _ in range(samples):
            c = np.zeros(grid.shape, dtype=complex)
            mask = (np.max(np.abs(np.stack(grid.mode_index)), axis=0) <= kcut)
            c[mask] = local.normal(size=mask.sum()) + 1j * local.normal(size=mask.sum())
            f = SpectralField.from_values(grid, np.real(np.fft.ifftn(c)))
            G = dn.dn_exact(fmap, f, operator=op)
            outs.append((f, G))
            if flat_surface:
                ref = SpectralField(grid, f.coeffs * dn.dn_flat_multiplier(grid, bottom, depth))
                errs.append(l2_norm(G - ref) / sobolev_norm(f, 1.0))
        return errs, outs

    results = _pmap(one, ns, cfg.workers)
    rows, worst = [], []
    if flat_surface:
        for n, (errs, _) in zip(ns, results):
            worst.append(max(errs))
            rows.append(_row(n, max(errs), residual=float(np.mean(errs)), samples=samples))
        limit = tol_deep if bottom == "deep" else tol_flat
        checks = [Check("max relative error vs closed form", max(worst), limit, "<=")]
        measured = {"errors": dict(zip(map(str, ns), worst)), "closed_form": "|D|" if bottom == "deep" else "|D|tanh(H|D|)"}
    else:
        # self-convergence against the finest grid on the shared modes of the first sample
        grids = [cfg.grid(n) for n in ns]
        fine_grid = grids[-1]
        diffs = []
        for grid, (_, outs) in zip(grids[:-1], results[:-1]):
            f_coarse, G = outs[0]
            # recompute the fine answer for this coarse f (same function, finer grid)
            c = np.zeros(fine_grid.shape, dtype=complex)
            idx = tuple(np.asarray(m, int) % fine_grid.n for m in grid.mode_index)
            c[idx] = f_coarse.coeffs
            f_fine = SpectralField(fine_grid, c)
            eta_f = build_field(fine_grid, cfg.eta)
            fmap_f = dn.build_flattening(eta_f, h, cfg.delta, bottom=bottom, depth=depth)
            Gf = dn.dn_exact(fmap_f, f_fine)
            diffs.append(float(np.sqrt(np.sum(np.abs(Gf.coeffs[idx] - G.coeffs) ** 2)) / l2_norm(Gf)))
        for n, d in zip(ns[:-1], diffs):
            rows.append(_row(n, d))
        worst = diffs
        checks = [Check("self-convergence error decreases", float(np.all(np.diff(diffs) < 0)) if len(diffs) > 1 else 1.0,
                        1.0, ">=")]
        measured = {"self_convergence": dict(zip(map(str, ns[:-1]), diffs))}
    if len(worst) >= 2 and all(w > 0 for w in worst):
        s = loglog_slope(ns[: len(worst)], worst)
        for r in rows:
            r["fitted_slope"] = s
    return ExperimentResult("dn_convergence", measured, checks, rows)


def run_paralinearization_order(cfg: ExperimentConfig) -> ExperimentResult:
    n = cfg.param("n", 512, int)
    ks = cfg.param_list("ks", [8, 16, 32, 64, 128], int)
    gap = cfg.param("min_gap", 0.4)
    grid = cfg.grid(n, 1)
    eta = build_field(grid, cfg.eta or "mode(1, 0.1, 0)")
    sw = dn.paralinearization_sweep(eta, ks, h=cfg.h or 1.0)
    rows = [_row(k, r, sw["slope_remainder"], residual=gn, G_norm=gn) for k, r, gn in
            zip(ks, sw["remainder_norms"], sw["G_norms"])]
    checks = [Check("slope gap G vs remainder", sw["slope_G"] - sw["slope_remainder"], gap, ">=")]
    return ExperimentResult("paralinearization_order", {k: sw[k] for k in ("slope_G", "slope_remainder")}, checks, rows)


def run_energy_conservation(cfg: ExperimentConfig) -> ExperimentResult:
    state = _state(cfg)
    k = cfg.param("k", dominant_mode(cfg.eta, cfg.dim))
    t_end = cfg.periods * 2 * math.pi / _omega(cfg, k)
    taylor_every = cfg.param("taylor_every", 0, int)
    traj = dynamics.simulate(state, t_end, cfg.dt, cfg.cfl, record_every=cfg.param("record_every", 1, int),
                             taylor_every=taylor_every)
    drifts = [abs(r["drift"]) for r in traj.rows]
    limit = cfg.param("drift_tolerance", 1e-6)
    rows = [_row(r["t"], r["energy"], residual=r["drift"]) for r in traj.rows]
    checks = [Check("max relative energy drift", max(drifts), limit, "<=")]
    measured = {"max_drift": max(drifts), "t_end": t_end, "records": len(traj.rows)}
    return ExperimentResult("energy_conservation", measured, checks, rows, traj.rows)


def run_dispersion_relation(cfg: ExperimentConfig) -> ExperimentResult:
    ks = cfg.param_list("ks", [1, 2, 4], int)
    eps = cfg.param("amplitude", 1e-4)
    periods = cfg.periods
    limit = cfg.param("tolerance", 1e-3)
    grid = cfg.grid()

    def one(k):
        eta = SpectralField.from_values(grid, eps * np.cos(k * 2 * math.pi / grid.period * grid.xvec[0]))
        st = dynamics.SurfaceState(0.0, eta, SpectralField.zeros(grid), cfg.g, cfg.depth, cfg.settings())
        w, _ = dynamics.measure_frequency(st, k, periods, cfl=cfg.cfl)
        return w, _omega(cfg, k * 2 * math.pi / grid.period)

    res = _pmap(one, ks, cfg.workers)
    rel = [abs(w - th) / th for w, th in res]
    rows = [_row(k, w, residual=r, theory=th) for k, (w, th), r in zip(ks, res, rel)]
    checks = [Check("max relative frequency error", max(rel), limit, "<=")]
    return ExperimentResult("dispersion_relation", {"relative_errors": dict(zip(map(str, ks), rel))}, checks, rows)


def run_taylor_monitor(cfg: ExperimentConfig) -> ExperimentResult:
    eps_list = cfg.param_list("eps", [1e-3, 3e-3, 1e-2, 3e-2, 1e-1])
    k = cfg.param("k", 3, int)
    grid = cfg.grid()
    rest = dynamics.SurfaceState.rest(grid, g=cfg.g, depth=cfg.depth, settings=cfg.settings())
    rest_dev = float(np.max(np.abs(np.asarray(dynamics.taylor_coefficient(rest).values) - cfg.g)))
    devs = []
    mins = []
    for eps in eps_list:
        eta = SpectralField.from_values(grid, eps * np.cos(k * grid.xvec[0]))
        st = dynamics.SurfaceState(0.0, eta, SpectralField.zeros(grid), cfg.g, cfg.depth, cfg.settings())
        a = np.asarray(dynamics.taylor_coefficient(st).values)
        devs.append(float(np.max(np.abs(a - cfg.g))))
        mins.append(float(np.min(a)))
    slope = loglog_slope(eps_list, devs)
    rows = [_row(e, d, slope, residual=m, min_a=m) for e, d, m in zip(eps_list, devs, mins)]
    checks = [
        Check("rest-state |a - g|", rest_dev, cfg.param("rest_tolerance", 1e-10), "<="),
        Check("epsilon-sweep slope deviation from 1", abs(slope - 1.0), 0.1, "<="),
        Check("min a over sweep", min(mins), 0.5 * cfg.g, ">="),
    ]
    return ExperimentResult("taylor_monitor", {"rest_deviation": rest_dev, "slope": slope}, checks, rows)


def run_gb_identity(cfg: ExperimentConfig) -> ExperimentResult:
    ns = cfg.param_list("ns", [64, 128, 256], int)
    div = cfg.param("level_divisor", 8, int)
    eta_text = cfg.eta or "mode(1, 0.2, 0) + mode(2, 0.1, -pi/2)"
    psi_text = cfg.psi or "mode(1, 0.1, -pi/2)"
    res = []
    for n in ns:
        grid = cfg.grid(n)
        st = dynamics.SurfaceState(0.0, build_field(grid, eta_text), build_field(grid, psi_text), cfg.g,
                                   dynamics.DepthConfig(), dynamics.SolverSettings(h=cfg.h, levels=max(8, n // div),
                                                                                 lower_levels=max(8, n // div)))
        res.append(dynamics.gb_identity_residual(st))
    order = -loglog_slope(ns, res)
    rows = [_row(n, r, -order) for n, r in zip(ns, res)]
    checks = [
        Check("refinement order", order, cfg.param("min_order", 1.5), ">="),
        Check("residual at finest grid", res[-1], cfg.param("tolerance", 1e-4), "<="),
        Check("monotone decrease", float(all(b < a for a, b in zip(res, res[1:]))), 1.0, ">="),
    ]
    return ExperimentResult("gb_identity", {"residuals": dict(zip(map(str, ns), res)), "order": order}, checks, rows)


def run_symbolic_calculus_orders(cfg: ExperimentConfig) -> ExperimentResult:
    n = cfg.param("n", 512, int)
    rho = cfg.param("rho", 0.5)
    ks = cfg.param_list("ks", [8, 16, 32, 64, 128], int)
    tol = cfg.param("slope_tolerance", 0.15)
    reg = paradiff.order_regressions(n, tuple(ks), rho)
    rows = []
    for tag in "abc":
        for k, v in zip(ks, reg[f"{tag}_values"]):
            rows.append(_row(k, v, reg[f"slope_{tag}"], regression=tag))
    checks = [
        Check("(a) |slope - 1|", abs(reg["slope_a"] - 1.0), tol, "<="),
        Check("(b) slope - (2 - rho)", reg["slope_b"] - reg["bound_b"], tol, "<="),
        Check("(c) |slope| (constant stable in k)", abs(reg["slope_c"]), tol, "<="),
    ]
    return ExperimentResult("symbolic_calculus_orders", {k: reg[k] for k in ("slope_a", "slope_b", "slope_c", "bound_b")},
                            checks, rows)


def eikonal_suite(seed: int = 0, n_seeds: int = 256, horizon: float = 0.5):
    """q conservation, constant-coefficient phase, gradient identity and M0, as a dict of measurements."""
    out = {}
    p0 = microlocal.RaySymbol.radial(1, 0.5)
    seeds, lay = microlocal.seed_grid(2 * math.pi, 64, [0.5, 1.0, 2.0, -1.0])
    b0 = microlocal.integrate_bicharacteristics(p0, seeds, 1.0, layout=lay)
    tab0 = microlocal.eikonal_phase(b0, quadrature=False)
    xi = b0.xi.reshape(lay + (1,))[:, 0, 0]
    exact = xi[:, None] * tab0.z[None, :] - np.abs(xi[:, None]) ** 0.5
    out["constant_phase_error"] = float(np.max(np.abs(tab0.phi[1] - exact)))
    grid = PeriodicGrid(1, 32)
    x = grid.xvec[0]
    rng = np.random.default_rng(seed)
    c1, c2 = rng.uniform(0.1, 0.2), rng.uniform(0.05, 0.1)
    a = SpectralField.from_values(grid, 1 + c1 * np.cos(x) + c2 * np.sin(2 * x))
    pv = microlocal.RaySymbol.radial(1, 0.5, a, lower=0.3)
    seeds, lay = microlocal.seed_grid(2 * math.pi, n_seeds, [0.75, 1.5])
    bv = microlocal.integrate_bicharacteristics(pv, seeds, horizon, layout=lay)
    tab = microlocal.eikonal_phase(bv)
    out["q_conservation"] = max(b0.q_defect(), bv.q_defect())
    out["gradient_identity"] = tab.gradient_identity_defect()
    out["route_agreement"] = float(np.max(np.abs(tab.phi[1] - tab.phi_quadrature)))
    out["eikonal_residual"] = tab.eikonal_residual()
    m0 = microlocal.phase_hessian_check(p0, [0.25, 0.5, 1.0])
    out["M0"] = float(np.min(m0))
    out["M0_closed_form"] = 2**-1.5 / 4
    return out


def run_eikonal_suite(cfg: ExperimentConfig) -> ExperimentResult:
    m = eikonal_suite(cfg.seed, cfg.param("n_seeds", 256, int), cfg.param("horizon", 0.5))
    rows = [_row(k, v) for k, v in m.items()]
    rel_m0 = abs(m["M0"] - m["M0_closed_form"]) / m["M0_closed_form"]
    checks = [
        Check("q conservation", m["q_conservation"], 1e-8, "<="),
        Check("constant-coefficient phase", m["constant_phase_error"], 1e-8, "<="),
        Check("gradient identity cross-check", m["gradient_identity"], 1e-6, "<="),
        Check("M0 relative deviation", rel_m0, 0.05, "<="),
    ]
    return ExperimentResult("eikonal_suite", m, checks, rows)


def run_decay_exponents(cfg: ExperimentConfig) -> ExperimentResult:
    d = cfg.param("d", cfg.dim, int)
    fit = microlocal.dispersive_decay_experiment(d, oversample=cfg.param("oversample", 8, int))
    rows = [dict(r, sweep="h") for r in fit.h_rows] + [dict(r, sweep="t") for r in fit.t_rows]
    checks = [
        Check("|h-slope - expected|", abs(fit.slope_h - fit.expected[0]), 0.1, "<="),
        Check("|t-slope - expected|", abs(fit.slope_t - fit.expected[1]), 0.1, "<="),
    ]
    return ExperimentResult("decay_exponents", {"d": d, "slope_h": fit.slope_h, "slope_t": fit.slope_t,
                                                "expected": list(fit.expected)}, checks, rows)


def run_strichartz_ratio(cfg: ExperimentConfig) -> ExperimentResult:
    ratios = microlocal.strichartz_ratio_family(cfg.param("n", 128, int), cfg.param("band_h", 1 / 16),
                                                cfg.param("p", 4.0), cfg.param("samples", 10, int), seed=cfg.seed)
    spread = float(ratios.max() / ratios.min())
    rows = [_row(i, r) for i, r in enumerate(ratios)]
    checks = [Check("max/min ratio over the family", spread, 2.0, "<=")]
    return ExperimentResult("strichartz_ratio", {"ratios": ratios.tolist(), "spread": spread}, checks, rows)


def run_scaling_invariance(cfg: ExperimentConfig) -> ExperimentResult:
    lam = cfg.param("lambda", 2, int)
    t_end = cfg.param("t_end", 1.0)
    if cfg.depth.kind != "deep":
        raise ConfigError("scaling invariance needs physics.depth = deep")
    st = dynamics.SurfaceState(0.0, build_field(cfg.grid(), cfg.eta or "mode(2, 1e-4, 0) + mode(3, 5e-5, -pi/2)"),
                               build_field(cfg.grid(), cfg.psi or "mode(2, 1e-4, -pi/2)"), cfg.g, cfg.depth,
                               cfg.settings())
    defect = dynamics.scaling_check(st, lam, t_end, cfg.cfl)
    rows = [_row(lam, defect)]
    checks = [Check("scaling defect", defect, cfg.param("tolerance", 1e-3), "<=")]
    return ExperimentResult("scaling_invariance", {"lambda": lam, "defect": defect}, checks, rows)


EXPERIMENTS = {
    "dn_convergence": (run_dn_convergence, "G(eta) against the flat closed forms |D| and |D|tanh(H|D|), or self-convergence"),
    "paralinearization_order": (run_paralinearization_order, "slope gap between G(eta) f_k and (G(eta) - T_lambda) f_k"),
    "energy_conservation": (run_energy_conservation, "relative drift of 1/2<psi,G psi> + g/2|eta|^2 under RK4"),
    "dispersion_relation": (run_dispersion_relation, "small-mode frequency against sqrt(g k) or sqrt(g k tanh(H k))"),
    "taylor_monitor": (run_taylor_monitor, "Taylor coefficient at rest and its linear deviation in epsilon"),
    "gb_identity": (run_gb_identity, "residual of G(eta)B + div V under grid refinement (no bottom)"),
    "symbolic_calculus_orders": (run_symbolic_calculus_orders, "operator-order regressions for T_lambda, T_aT_A - T_aA, T_b"),
    "eikonal_suite": (run_eikonal_suite, "ray invariants, eikonal phase cross-check and the Hessian constant M0"),
    "decay_exponents": (run_decay_exponents, "h and t exponents of the frequency-localized half-wave kernel"),
    "strichartz_ratio": (run_strichartz_ratio, "mixed space-time norm over H^{3/(2p)} on random band data"),
    "scaling_invariance": (run_scaling_invariance, "defect of the (lambda^-1, lambda^-3/2) rescaling symmetry"),
}


def catalog() -> str:
    width = max(map(len, EXPERIMENTS))
    return "\n".join(f"{name:<{width}}  {desc}" for name, (_, desc) in EXPERIMENTS.items())


def config_echo(cfg: ExperimentConfig) -> dict:
    return {
        "config_text": cfg.raw_text,
        "sections": cfg.sections,
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "lp_profile": PROFILE_DESCRIPTION,
        "cutoff": paradiff.DEFAULT_CUTOFF.describe(),
        "backend": _kernels.backend(),
    }


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    fn, _ = EXPERIMENTS[cfg.experiment]
    return fn(cfg)
