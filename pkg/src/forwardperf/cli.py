"""Scenario-driven command line front end.

A scenario is an INI file with flat keyed sections:

    [model]       name = merton | schwartz | stochvol, plus its parameters
    [transform]   kind = homothetic | dual-inversion (defaulted per model)
    [atoms]       schwartz: "theta weight" rows under minus / plus;
                  stochvol: scalar branch weights minus / plus
    [grid]        t/y/z/x ranges and counts for the evaluation lattice
    [simulation]  paths, horizon, seed, scheme, workers, sample_times, ...
    [checks]      which verifications run, and the residual tolerance
    [debug]       c2_offset: additive fault injected into the quadratic
                  profile coefficient, bypassing construction-time gates
                  so that verification catches it downstream

Exit codes: 0 when every requested check passes, 1 when a check fails,
2 on parse or validation errors (the message names the file, section,
and violated condition).  All CSV and JSON artifacts are deterministic
for a fixed scenario and seed, independent of the worker count.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from .closed_form import (
    QuadExpCoeffs,
    SchwartzParams,
    StochVolParams,
    merton_value_surface,
    schwartz_coeffs,
    schwartz_dual_coeffs,
    schwartz_theta_operator,
    schwartz_value_surface,
    stochvol_coeffs,
    stochvol_operator,
    stochvol_value_surface,
    stochvol_wellposed,
)
from .control import export_portfolio_csv, hamiltonian_argmax_check, optimal_portfolio, optimal_rule
from .duality import (
    DualInversionSurface,
    DualSurface,
    HomotheticParams,
    export_surface_csv,
    homothetic_value,
    invert_dual_marginal,
)
from .elliptic import laplacian_1d, ode_residual, solve_positive_solution
from .errors import ForwardPerfError
from .factor_model import bs_model, scaled_rule, schwartz_model, stochvol_model
from .monte_carlo import (
    SimConfig,
    export_ensemble_csv,
    export_reports_csv,
    martingale_test,
    simulate_paths,
    supermartingale_test,
)
from .pde_verify import (
    GridSpec,
    appendix_bounds_check,
    export_residual_csv,
    hjb_residual,
    report_json,
)
from .widder import HarmonicFunction, SpectralAtom, atoms_to_csv

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_SCENARIO = 2

MODELS = ("merton", "schwartz", "stochvol")
TRANSFORMS = ("homothetic", "dual-inversion")
SOLVE_RESIDUAL_TOL = 1e-6

_BUNDLED_DIR = os.path.join(os.path.dirname(__file__), "scenarios")
_MISSING = object()

# Strict layout: unknown sections or keys are validation errors, so typos
# fail loudly instead of silently falling back to defaults.
_SECTION_KEYS = {
    "model": {"name", "a", "b", "sigma", "eta", "rho", "kappa", "mu", "gamma", "lam"},
    "transform": {"kind"},
    "atoms": {"minus", "plus"},
    "grid": {
        "t_lo", "t_hi", "t_count", "y_lo", "y_hi", "y_count",
        "z_lo", "z_hi", "z_count", "x_lo", "x_hi", "x_count",
    },
    "simulation": {
        "paths", "horizon", "seed", "steps_per_unit", "scheme",
        "antithetic", "workers", "sample_times", "y0", "x0",
    },
    "checks": {
        "residuals", "bounds", "round_trip", "hamiltonian", "simulation",
        "residual_tolerance",
    },
    "debug": {"c2_offset"},
}
_MODEL_KEYS = {
    "merton": {"name", "lam", "sigma", "gamma"},
    "schwartz": {"name", "a", "b", "sigma", "eta"},
    "stochvol": {"name", "a", "b", "sigma", "rho", "kappa", "mu", "gamma"},
}


class ScenarioError(Exception):
    """Scenario cannot be parsed or validated; the CLI exits with code 2."""


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in raw.split())


class _Section:
    """Typed accessor for one INI section with anchored error messages."""

    def __init__(self, cp: configparser.ConfigParser, path: str, name: str):
        self.cp, self.path, self.name = cp, path, name

    def fail(self, key: str, msg: str):
        raise ScenarioError(f"{self.path}: [{self.name}] {key}: {msg}")

    def get(self, key: str, cast=str, default=_MISSING):
        if not (self.cp.has_section(self.name) and self.cp.has_option(self.name, key)):
            if default is _MISSING:
                self.fail(key, "required key is missing")
            return default
        raw = self.cp.get(self.name, key)
        try:
            if cast is bool:
                return self.cp.getboolean(self.name, key)
            return cast(raw)
        except ValueError:
            self.fail(key, f"cannot interpret {raw!r} as {cast.__name__}")


@dataclass
class Scenario:
    """A fully constructed run request: model, surface, lattice, checks."""

    path: str
    label: str
    model_name: str
    transform: str
    model: object
    surface: object
    params: object
    atoms: tuple
    grid: GridSpec
    sim: SimConfig | None
    y0: np.ndarray
    x0: float
    eta: float | None
    tolerance: float
    checks: dict
    c2_offset: float


def _resolve(path: str) -> str:
    if os.path.exists(path):
        return path
    base = os.path.basename(path)
    for cand in (base, base + ".scenario"):
        full = os.path.join(_BUNDLED_DIR, cand)
        if os.path.exists(full):
            return full
    bundled = ", ".join(sorted(
        f[: -len(".scenario")] for f in os.listdir(_BUNDLED_DIR) if f.endswith(".scenario")
    )) if os.path.isdir(_BUNDLED_DIR) else ""
    raise ScenarioError(f"{path}: no such scenario file (bundled: {bundled})")


def _check_layout(cp: configparser.ConfigParser, path: str) -> None:
    for section in cp.sections():
        if section not in _SECTION_KEYS:
            raise ScenarioError(
                f"{path}: [{section}] is not a recognized section "
                f"(expected one of {sorted(_SECTION_KEYS)})"
            )
        for key in cp.options(section):
            if key not in _SECTION_KEYS[section]:
                raise ScenarioError(f"{path}: [{section}] {key}: unknown key")
    if not cp.has_section("model"):
        raise ScenarioError(f"{path}: missing required section [model]")


def _parse_measure(sec: _Section, key: str) -> tuple[tuple[float, float], ...]:
    raw = sec.get(key, default=None)
    if raw is None:
        return ()
    rows = []
    for line in raw.splitlines():
        if not line.strip():
            continue
        toks = line.split()
        if len(toks) != 2:
            sec.fail(key, f"expected 'theta weight' rows, got {line.strip()!r}")
        try:
            rows.append((float(toks[0]), float(toks[1])))
        except ValueError:
            sec.fail(key, f"non-numeric entry in row {line.strip()!r}")
    return tuple(rows)


def _corrupt_schwartz(params: SchwartzParams, offset: float) -> DualInversionSurface:
    # Rebuild the atoms with C2 shifted, skipping the residual gate that
    # would otherwise refuse them; verification must flag the result.
    atoms = []
    for branch, measure in (("minus", params.nu_minus), ("plus", params.nu_plus)):
        for theta, w in measure:
            if w == 0.0:
                continue
            good = schwartz_coeffs(params, theta, branch)
            bad = QuadExpCoeffs(good.c1, good.c2 + offset, good.lam, branch)
            atoms.append(SpectralAtom(
                lam=bad.lam, weight=w, psi=bad.minimal_solution(), theta=float(theta)
            ))
    u = HarmonicFunction(atoms, "degenerate", coeffs=schwartz_dual_coeffs(params))
    return DualInversionSurface(DualSurface(u), factor_coord=0)


def _corrupt_stochvol(params: StochVolParams, offset: float):
    atoms = []
    for branch, w in (("minus", params.nu_minus), ("plus", params.nu_plus)):
        if w == 0.0:
            continue
        good = stochvol_coeffs(params, branch)
        bad = QuadExpCoeffs(good.c1, good.c2 + offset, good.lam, branch)
        atoms.append(SpectralAtom(lam=bad.lam, weight=w, psi=bad.minimal_solution()))
    u = HarmonicFunction(atoms, "standard")
    return homothetic_value(
        u, HomotheticParams(params.gamma, params.rho),
        operator=stochvol_operator(params), factor_coord=1,
    )


def _build_model(cp, path, c2_offset):
    sec = _Section(cp, path, "model")
    name = sec.get("name")
    if name not in MODELS:
        sec.fail("name", f"must be one of {MODELS}, got {name!r}")
    for key in cp.options("model"):
        if key not in _MODEL_KEYS[name]:
            sec.fail(key, f"not a parameter of the {name} model")
    atoms_sec = _Section(cp, path, "atoms")

    try:
        if name == "merton":
            if c2_offset:
                raise ScenarioError(
                    f"{path}: [debug] c2_offset: the merton surface has no "
                    "quadratic profile coefficient to perturb"
                )
            if cp.has_section("atoms"):
                raise ScenarioError(f"{path}: [atoms] does not apply to the merton model")
            lam = sec.get("lam", float)
            sigma = sec.get("sigma", float)
            gamma = sec.get("gamma", float)
            params = {"lam": lam, "sigma": sigma, "gamma": gamma}
            model = bs_model(lam, sigma)
            surface = merton_value_surface(gamma, lam)
            eta = None
        elif name == "schwartz":
            params = SchwartzParams(
                a=sec.get("a", float),
                b=sec.get("b", float),
                sigma=sec.get("sigma", float),
                eta=sec.get("eta", float),
                nu_minus=_parse_measure(atoms_sec, "minus"),
                nu_plus=_parse_measure(atoms_sec, "plus"),
            )
            if not params.nu_minus and not params.nu_plus:
                raise ScenarioError(
                    f"{path}: [atoms] the schwartz model needs at least one "
                    "(theta, weight) row under minus or plus"
                )
            model = schwartz_model(params.a, params.b, params.sigma)
            surface = (_corrupt_schwartz(params, c2_offset) if c2_offset
                       else schwartz_value_surface(params))
            eta = params.eta
        else:
            params = StochVolParams(
                a=sec.get("a", float),
                b=sec.get("b", float),
                sigma=sec.get("sigma", float),
                rho=sec.get("rho", float),
                kappa=sec.get("kappa", float),
                mu=sec.get("mu", float),
                gamma=sec.get("gamma", float),
                nu_minus=atoms_sec.get("minus", float, 1.0),
                nu_plus=atoms_sec.get("plus", float, 0.0),
            )
            if not stochvol_wellposed(params):
                raise ScenarioError(
                    f"{path}: [model] stochvol parameters are not well posed: "
                    f"discriminant B^2 - 2 sigma^2 P mu^2 = "
                    f"{params.discriminant():.6g} is negative, so no real "
                    "quadratic-exponential profile exists"
                )
            model = stochvol_model(
                params.a, params.b, params.sigma, params.rho, params.kappa, params.mu
            )
            surface = (_corrupt_stochvol(params, c2_offset) if c2_offset
                       else stochvol_value_surface(params))
            eta = None
    except ScenarioError:
        raise
    except (ForwardPerfError, ValueError) as exc:
        raise ScenarioError(f"{path}: [model] {exc}") from exc
    return name, model, surface, params, eta


def _build_grid(cp, path, transform) -> GridSpec:
    sec = _Section(cp, path, "grid")
    base = GridSpec(z_range=(-2.0, 2.0) if transform == "dual-inversion" else None,
                    x_range=(0.01, 100.0))
    kwargs = {}
    for axis in ("t", "y", "z", "x"):
        lo = sec.get(f"{axis}_lo", float, None)
        hi = sec.get(f"{axis}_hi", float, None)
        cnt = sec.get(f"{axis}_count", int, None)
        if (lo is None) != (hi is None):
            sec.fail(f"{axis}_lo", f"{axis}_lo and {axis}_hi must be given together")
        if lo is not None:
            kwargs[f"{axis}_range"] = (lo, hi)
        if cnt is not None:
            kwargs[f"{axis}_count"] = cnt
    try:
        return replace(base, **kwargs)
    except ValueError as exc:
        raise ScenarioError(f"{path}: [grid] {exc}") from exc


def _build_sim(cp, path, model) -> tuple[SimConfig | None, np.ndarray, float]:
    y0 = np.zeros(model.n)
    x0 = 1.0
    if not cp.has_section("simulation"):
        return None, y0, x0
    sec = _Section(cp, path, "simulation")
    kwargs = {
        "paths": sec.get("paths", int),
        "horizon": sec.get("horizon", float),
        "seed": sec.get("seed", int),
    }
    for key, cast in (("steps_per_unit", int), ("scheme", str),
                      ("antithetic", bool), ("workers", int)):
        val = sec.get(key, cast, None)
        if val is not None:
            kwargs[key] = val
    times = sec.get("sample_times", _floats, None)
    if times is not None:
        kwargs["sample_times"] = times
    try:
        sim = SimConfig(**kwargs)
    except ValueError as exc:
        raise ScenarioError(f"{path}: [simulation] {exc}") from exc
    y0_raw = sec.get("y0", _floats, None)
    if y0_raw is not None:
        if len(y0_raw) != model.n:
            sec.fail("y0", f"expected {model.n} components, got {len(y0_raw)}")
        y0 = np.asarray(y0_raw, dtype=float)
    x0 = sec.get("x0", float, 1.0)
    if not x0 > 0:
        sec.fail("x0", "initial wealth must be positive")
    return sim, y0, x0


def load_scenario(
    path: str,
    *,
    seed: int | None = None,
    paths: int | None = None,
    workers: int | None = None,
    tolerance: float | None = None,
) -> Scenario:
    """Parse, validate, and construct everything a subcommand needs.

    Every parse or validation failure raises ScenarioError with a
    message anchored to the file (and section/key when known).
    """
    resolved = _resolve(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(resolved, encoding="utf-8") as fh:
            cp.read_file(fh, source=resolved)
    except OSError as exc:
        raise ScenarioError(f"{resolved}: {exc.strerror or exc}") from exc
    except configparser.Error as exc:
        raise ScenarioError(str(exc)) from exc
    _check_layout(cp, resolved)

    c2_offset = _Section(cp, resolved, "debug").get("c2_offset", float, 0.0)
    name, model, surface, params, eta = _build_model(cp, resolved, c2_offset)

    default_kind = "dual-inversion" if name == "schwartz" else "homothetic"
    kind = _Section(cp, resolved, "transform").get("kind", str, default_kind)
    if kind not in TRANSFORMS:
        raise ScenarioError(
            f"{resolved}: [transform] kind: must be one of {TRANSFORMS}, got {kind!r}"
        )
    if kind != default_kind:
        raise ScenarioError(
            f"{resolved}: [transform] kind: the {name} model ships with the "
            f"{default_kind} construction only"
        )

    grid = _build_grid(cp, resolved, kind)
    sim, y0, x0 = _build_sim(cp, resolved, model)

    checks_sec = _Section(cp, resolved, "checks")
    is_dual = kind == "dual-inversion"
    checks = {
        "residuals": checks_sec.get("residuals", bool, True),
        "bounds": checks_sec.get("bounds", bool, is_dual),
        "round_trip": checks_sec.get("round_trip", bool, is_dual),
        "hamiltonian": checks_sec.get("hamiltonian", bool, True),
        "simulation": checks_sec.get("simulation", bool, sim is not None),
    }
    if (checks["bounds"] or checks["round_trip"]) and not is_dual:
        raise ScenarioError(
            f"{resolved}: [checks] bounds and round_trip need a dual surface, "
            f"but the transform is {kind}"
        )
    if checks["simulation"] and sim is None:
        raise ScenarioError(
            f"{resolved}: [checks] simulation: no [simulation] section to run"
        )
    tol = checks_sec.get("residual_tolerance", float, 1e-8)
    if tolerance is not None:
        tol = tolerance
    if not tol > 0:
        raise ScenarioError(f"{resolved}: [checks] residual_tolerance: must be positive")

    if sim is not None and (seed is not None or paths is not None or workers is not None):
        overrides = {}
        if seed is not None:
            overrides["seed"] = seed
        if paths is not None:
            overrides["paths"] = paths
        if workers is not None:
            overrides["workers"] = workers
        try:
            sim = replace(sim, **overrides)
        except ValueError as exc:
            raise ScenarioError(f"{resolved}: [simulation] override: {exc}") from exc

    atoms = surface.dual.atoms if is_dual else surface.harmonic.atoms
    label = os.path.splitext(os.path.basename(resolved))[0]
    return Scenario(
        path=resolved, label=label, model_name=name, transform=kind,
        model=model, surface=surface, params=params, atoms=tuple(atoms),
        grid=grid, sim=sim, y0=y0, x0=x0, eta=eta, tolerance=tol,
        checks=checks, c2_offset=c2_offset,
    )


# ---------------------------------------------------------------------------
# Subcommands


def _out_dir(out: str) -> str:
    os.makedirs(out, exist_ok=True)
    return out


def _say(line: str) -> None:
    print(line)
    sys.stdout.flush()


def cmd_solve_elliptic(sc: Scenario, out: str, lam: float | None, theta: float | None,
                       slope: float | None, span: float | None) -> int:
    """Solve the scenario's profile equation and dump psi on its grid.

    Defaults to the matched minus-branch eigenvalue with the matched
    log-slope C1 at the origin, so the integrated profile cross-checks
    the closed form; explicit --lam starts from slope 0 unless --slope
    says otherwise.  Outward shooting loses a recessive profile once
    the complementary solution dominates, so --span can shrink the
    integration window below the scenario grid.
    """
    if sc.model_name == "schwartz":
        if theta is None:
            theta = sc.params.nu_minus[0][0] if sc.params.nu_minus else sc.params.nu_plus[0][0]
        op = schwartz_theta_operator(sc.params, theta)
        matched = schwartz_coeffs(sc.params, theta, "minus")
    elif sc.model_name == "stochvol":
        op = stochvol_operator(sc.params)
        matched = stochvol_coeffs(sc.params, "minus")
    else:
        op = laplacian_1d()
        g, l = sc.params["gamma"], sc.params["lam"]
        matched = QuadExpCoeffs(0.0, 0.0, g * l * l / (2.0 * (1.0 - g)), "minus")
    if lam is None:
        lam = matched.lam
        if slope is None:
            slope = matched.c1
    elif slope is None:
        slope = 0.0
    y_span = sc.grid.y_range if span is None else (-abs(span), abs(span))

    out = _out_dir(out)
    try:
        sol = solve_positive_solution(op, lam, y_span=y_span, slope0=slope)
    except ForwardPerfError as exc:
        _say(f"solve-elliptic: FAIL ({exc})")
        return EXIT_CHECK_FAILED
    resid = ode_residual(op, lam, sol)
    dest = os.path.join(out, "psi.csv")
    with open(dest, "w", newline="") as fh:
        fh.write("y,psi,dpsi,d2psi\n")
        for i in range(sol.grid.size):
            fh.write(f"{sol.grid[i]:.17g},{sol.psi[i]:.17g},"
                     f"{sol.dpsi[i]:.17g},{sol.d2psi[i]:.17g}\n")
    ok = resid <= SOLVE_RESIDUAL_TOL
    _say(f"solve-elliptic: lam={lam:.12g} residual={resid:.3e} "
         f"{'ok' if ok else 'FAIL'} -> {dest}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_build(sc: Scenario, out: str) -> list[str]:
    """Export the value surface, optimal fractions, and spectral atoms."""
    out = _out_dir(out)
    written = []
    dest = os.path.join(out, "surface.csv")
    export_surface_csv(sc.surface, sc.grid.t_axis, sc.grid.y_axis, sc.grid.x_axis, dest)
    written.append(dest)
    dest = os.path.join(out, "portfolio.csv")
    export_portfolio_csv(sc.surface, sc.model, sc.grid.t_axis, sc.grid.y_axis,
                         sc.grid.x_axis, dest)
    written.append(dest)
    dest = os.path.join(out, "atoms.csv")
    atoms_to_csv(sc.atoms, dest)
    written.append(dest)
    for w in written:
        _say(f"build-surface: wrote {w}")
    return written


def _json_ready(report) -> dict:
    return json.loads(report_json(report))


def cmd_verify(sc: Scenario, out: str) -> tuple[bool, list[dict]]:
    """Run the scenario's static checks and write residual artifacts."""
    out = _out_dir(out)
    grid, tol = sc.grid, sc.tolerance
    payloads: list[dict] = []
    residual_reports = []

    if sc.checks["residuals"]:
        if sc.transform == "dual-inversion":
            residual_reports.append(hjb_residual(sc.surface, sc.model, grid,
                                                 "dual-linearized", tol))
            residual_reports.append(hjb_residual(sc.surface, sc.model, grid,
                                                 "complete", tol))
        else:
            residual_reports.append(hjb_residual(sc.surface, sc.model, grid,
                                                 "homothetic-linearized", tol))
            if sc.model.n == 1:
                residual_reports.append(hjb_residual(sc.surface, sc.model, grid,
                                                     "complete", tol))
    for rep in residual_reports:
        payloads.append(_json_ready(rep))
        slug = rep.equation.lower().replace(" ", "-")
        export_residual_csv(rep, os.path.join(out, f"residual-{slug}.csv"))

    if sc.checks["bounds"]:
        payloads.append(_json_ready(appendix_bounds_check(sc.surface.dual, sc.eta, grid)))
        payloads.append(_json_ready(appendix_bounds_check(sc.surface, sc.eta, grid)))

    if sc.checks["round_trip"]:
        ts = grid.t_axis[:, None, None]
        ys = grid.y_axis[None, :, None]
        xs = grid.x_axis[None, None, :]
        zs = np.log(invert_dual_marginal(sc.surface.dual, ts, ys, xs))
        err = float(np.max(np.abs(sc.surface.dual.value(ts, ys, zs) - xs) / xs))
        payloads.append({
            "check": "dual-round-trip",
            "max_rel_error": err,
            "tolerance": 1e-12,
            "passed": err <= 1e-12,
        })

    if sc.checks["hamiltonian"]:
        t_mid = float(grid.t_axis[grid.t_count // 2])
        star = float(np.asarray(
            optimal_portfolio(sc.surface, sc.model, t_mid, sc.y0, sc.x0)
        ).reshape(-1)[0])
        rep = hamiltonian_argmax_check(
            sc.surface, sc.model, t_mid, sc.y0, sc.x0,
            np.linspace(star - 0.5, star + 0.5, 101),
        )
        payloads.append({
            "check": "hamiltonian-argmax",
            "analytic": [float(v) for v in rep.analytic],
            "grid_argmax": [float(v) for v in rep.grid_argmax],
            "gap": float(rep.gap),
            "spacing": float(rep.spacing),
            "passed": bool(rep.within_spacing),
        })

    dest = os.path.join(out, "residuals.json")
    with open(dest, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(payloads, sort_keys=True, indent=2))
        fh.write("\n")
    passed = all(p["passed"] for p in payloads) if payloads else True
    for p in payloads:
        tag = p.get("equation") or p.get("check") or p.get("form", "check")
        _say(f"verify: {tag}: {'ok' if p['passed'] else 'FAIL'}")
    _say(f"verify: wrote {dest}")
    return passed, payloads


def cmd_simulate(sc: Scenario, out: str) -> tuple[bool, list]:
    """Monte Carlo checks: martingale at the optimum, supermartingale off it."""
    if sc.sim is None:
        raise ScenarioError(f"{sc.path}: [simulation] section is required to simulate")
    out = _out_dir(out)
    rule = optimal_rule(sc.surface, sc.model)
    reports = []
    ens = simulate_paths(sc.model, rule, sc.y0, sc.x0, sc.sim)
    for t in sc.sim.resolved_sample_times:
        reports.append(martingale_test(sc.surface, ens, t))
    for fac in (0.0, 0.5, 2.0):
        perturbed = simulate_paths(sc.model, scaled_rule(rule, fac), sc.y0, sc.x0, sc.sim)
        for t in sc.sim.resolved_sample_times:
            reports.append(supermartingale_test(sc.surface, perturbed, t))
    dest = os.path.join(out, "mc_reports.csv")
    export_reports_csv(reports, dest)
    export_ensemble_csv(ens, os.path.join(out, "ensemble.csv"))
    passed = all(r.verdict != "violation" for r in reports)
    for r in reports:
        _say(f"simulate: {r.kind} t={r.t:g} z={r.z_score:+.2f}: {r.verdict}")
    _say(f"simulate: wrote {dest}")
    return passed, reports


def cmd_run(sc: Scenario, out: str) -> int:
    """Full pipeline: build artifacts, verify, simulate, summarize."""
    out = _out_dir(out)
    files = cmd_build(sc, out)
    verify_ok, payloads = (True, [])
    if any(sc.checks[k] for k in ("residuals", "bounds", "round_trip", "hamiltonian")):
        verify_ok, payloads = cmd_verify(sc, out)
    sim_ok = True
    if sc.checks["simulation"]:
        sim_ok, _ = cmd_simulate(sc, out)
    code = EXIT_OK if (verify_ok and sim_ok) else EXIT_CHECK_FAILED
    summary = {
        "scenario": sc.label,
        "model": sc.model_name,
        "transform": sc.transform,
        "artifacts": [os.path.basename(f) for f in files],
        "verify_passed": verify_ok,
        "simulation_passed": sim_ok,
        "checks_run": {k: bool(v) for k, v in sc.checks.items()},
        "exit_code": code,
    }
    dest = os.path.join(out, "summary.json")
    with open(dest, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(summary, sort_keys=True, indent=2))
        fh.write("\n")
    _say(f"run: {'all checks passed' if code == EXIT_OK else 'CHECKS FAILED'} -> {dest}")
    return code


# ---------------------------------------------------------------------------
# Argument parsing


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forwardperf",
        description="Forward performance surfaces: build, verify, simulate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_sim=False, with_tol=False):
        p.add_argument("--scenario", required=True,
                       help="scenario file, or the name of a bundled one")
        p.add_argument("--out", required=True, help="output directory")
        if with_sim:
            p.add_argument("--seed", type=int, default=None, help="override [simulation] seed")
            p.add_argument("--paths", type=int, default=None, help="override path count")
            p.add_argument("--workers", type=int, default=None, help="override worker threads")
        if with_tol:
            p.add_argument("--tolerance", type=float, default=None,
                           help="override the residual tolerance")

    p = sub.add_parser("solve-elliptic", help="solve the profile equation on the grid")
    common(p)
    p.add_argument("--lam", type=float, default=None,
                   help="eigenvalue (default: the matched branch value)")
    p.add_argument("--theta", type=float, default=None,
                   help="dual exponent (schwartz only; default: first atom)")
    p.add_argument("--slope", type=float, default=None,
                   help="psi'(0) (default: the matched C1 when --lam is omitted, else 0)")
    p.add_argument("--span", type=float, default=None,
                   help="integrate over [-span, span] instead of the scenario y range")

    p = sub.add_parser("build-surface", help="export surface, portfolio, and atom CSVs")
    common(p)

    p = sub.add_parser("verify", help="residual, bounds, round-trip, argmax checks")
    common(p, with_tol=True)

    p = sub.add_parser("simulate", help="martingale and supermartingale checks")
    common(p, with_sim=True)

    p = sub.add_parser("run", help="full pipeline with summary.json")
    common(p, with_sim=True, with_tol=True)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        sc = load_scenario(
            args.scenario,
            seed=getattr(args, "seed", None),
            paths=getattr(args, "paths", None),
            workers=getattr(args, "workers", None),
            tolerance=getattr(args, "tolerance", None),
        )
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_BAD_SCENARIO

    try:
        if args.command == "solve-elliptic":
            return cmd_solve_elliptic(sc, args.out, args.lam, args.theta,
                                      args.slope, args.span)
        if args.command == "build-surface":
            cmd_build(sc, args.out)
            return EXIT_OK
        if args.command == "verify":
            ok, _ = cmd_verify(sc, args.out)
            return EXIT_OK if ok else EXIT_CHECK_FAILED
        if args.command == "simulate":
            ok, _ = cmd_simulate(sc, args.out)
            return EXIT_OK if ok else EXIT_CHECK_FAILED
        ok = cmd_run(sc, args.out)
        return ok
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_BAD_SCENARIO
    except ForwardPerfError as exc:
        print(f"check failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
