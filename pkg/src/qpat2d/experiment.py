"""Experiment configuration parsing and orchestration for the CLI.

Configs are flat key/value files with sections (configparser syntax). A run
is a pure function of (config, seed): artifacts are written with fixed
formatting and no timestamps, so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .fields_io import save_field_csv, save_field_pgm, save_table_csv, write_manifest
from .forward import add_noise, forward
from .geometry import (
    AngularQuadrature,
    Grid2D,
    OpticalPair,
    PhaseMatrix,
    build_grid,
    build_phase_hg,
    build_quadrature,
)
from .gradients import CoefficientDirection, fd_check
from .levelset import LevelSetConfig, initial_state, reconstruct_levelset
from .multisource import eval_multi_misfit, kaczmarz_sweep
from .norms import l2_cells
from .phantoms import Inclusion, PhantomSpec, make_phantom
from .tikhonov import TikhonovConfig, choose_alpha, convergence_study, reconstruct
from .transport import BoundarySource, boundary_source_patch, solve_rte

SCHEMES = ("h1", "levelset", "kaczmarz", "beer_lambert")


class ConfigError(Exception):
    """Configuration problem; carries the offending section.key name."""

    def __init__(self, field_name: str, message: str):
        self.field_name = field_name
        super().__init__(f"{message} (field {field_name})")


_REQUIRED = object()


def _get(cp: configparser.ConfigParser, section: str, key: str, cast=str, default=_REQUIRED):
    if not cp.has_option(section, key):
        if default is _REQUIRED:
            raise ConfigError(f"{section}.{key}", "missing required field")
        return default
    raw = cp.get(section, key)
    try:
        if cast is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r}") from exc


def _floats(raw: str) -> list[float]:
    return [float(tok) for tok in raw.replace(",", " ").split()]


@dataclass
class ExperimentConfig:
    """Materialized experiment: discretization, phantom, sources, scheme settings."""

    grid: Grid2D
    quad: AngularQuadrature
    phase: PhaseMatrix
    mu_lo: float
    mu_hi: float
    phantom: PhantomSpec
    sources: list[BoundarySource]
    scheme: str
    delta_rel: float
    seed: int
    out_dir: Path
    options: dict = field(default_factory=dict)
    config_text: str = ""


def parse_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"config file not found: {path}")
    text = path.read_text()
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", f"parse error: {exc}") from exc

    for section in ("grid", "quadrature", "phase", "bounds", "phantom", "scheme", "output"):
        if not cp.has_section(section):
            raise ConfigError(section, "missing required section")

    grid = build_grid(
        _get(cp, "grid", "nx", int),
        _get(cp, "grid", "ny", int),
        _get(cp, "grid", "lx", float),
        _get(cp, "grid", "ly", float),
    )
    quad = build_quadrature(_get(cp, "quadrature", "ns", int))
    phase = build_phase_hg(_get(cp, "phase", "g", float), quad)
    mu_lo = _get(cp, "bounds", "mu_lo", float)
    mu_hi = _get(cp, "bounds", "mu_hi", float)

    inclusions = []
    for key in cp.options("phantom"):
        if not key.startswith("inclusion"):
            continue
        tokens = cp.get("phantom", key).split()
        if len(tokens) < 4:
            raise ConfigError(f"phantom.{key}", f"malformed inclusion {tokens!r}")
        shape, *rest = tokens
        values = [float(v) for v in rest]
        inclusions.append(Inclusion(shape, tuple(values[:-2]), values[-2], values[-1]))
    phantom = PhantomSpec(
        background_mu_a=_get(cp, "phantom", "mu_a", float),
        background_mu_s=_get(cp, "phantom", "mu_s", float),
        inclusions=inclusions,
        smooth=_get(cp, "phantom", "smooth", bool, default=False),
        smooth_width=_get(cp, "phantom", "smooth_width", float, default=0.1),
    )

    sources = []
    if cp.has_section("sources"):
        for key in cp.options("sources"):
            if not key.startswith("source"):
                continue
            tokens = cp.get("sources", key).split()
            if len(tokens) != 4:
                raise ConfigError(
                    f"sources.{key}", "expected: side center_frac width_frac intensity"
                )
            side, center, width, intensity = (
                tokens[0],
                float(tokens[1]),
                float(tokens[2]),
                float(tokens[3]),
            )
            sources.append(
                boundary_source_patch(grid, quad, side, center, width, intensity)
            )

    scheme = _get(cp, "scheme", "kind")
    if scheme not in SCHEMES:
        raise ConfigError("scheme.kind", f"unknown scheme {scheme!r}, expected one of {SCHEMES}")
    if scheme != "beer_lambert" and not sources:
        raise ConfigError("sources", "at least one source is required")
    if scheme in ("h1", "levelset") and len(sources) != 1:
        raise ConfigError("sources", f"scheme {scheme!r} uses exactly one source")

    options: dict = {}
    if scheme in ("h1", "kaczmarz"):
        options["alpha"] = _get(cp, "scheme", "alpha", float, default=None)
        options["alpha_c"] = _get(cp, "scheme", "alpha_c", float, default=1.0)
        options["alpha_r"] = _get(cp, "scheme", "alpha_r", float, default=1.0)
        options["max_outer"] = _get(cp, "scheme", "max_outer", int, default=200)
        options["grad_tol"] = _get(cp, "scheme", "grad_tol", float, default=1e-9)
        options["solver_tol"] = _get(cp, "scheme", "solver_tol", float, default=1e-10)
        options["p"] = _get(cp, "scheme", "p", float, default=2.0)
        if scheme == "kaczmarz":
            options["sweeps"] = _get(cp, "scheme", "sweeps", int, default=5)
    if scheme == "levelset":
        options["alpha"] = _get(cp, "scheme", "alpha", float)
        options["a1"] = _get(cp, "scheme", "a1", float)
        options["a2"] = _get(cp, "scheme", "a2", float)
        options["c1"] = _get(cp, "scheme", "c1", float)
        options["c2"] = _get(cp, "scheme", "c2", float)
        options["epsilon_cells"] = _get(cp, "scheme", "epsilon_cells", float, default=2.0)
        options["init_radius_frac"] = _get(cp, "scheme", "init_radius_frac", float, default=0.15)
        options["max_outer"] = _get(cp, "scheme", "max_outer", int, default=500)
        options["grad_tol"] = _get(cp, "scheme", "grad_tol", float, default=1e-10)
        options["solver_tol"] = _get(cp, "scheme", "solver_tol", float, default=1e-10)
        options["beta_tv"] = _get(cp, "scheme", "beta_tv", float, default=1e-8)
    if scheme == "beer_lambert":
        options["resolutions"] = [
            int(v) for v in _floats(_get(cp, "scheme", "resolutions", str, default="64 128"))
        ]
        options["mu_a"] = _get(cp, "scheme", "mu_a", float, default=1.0)
        options["patch_margin"] = _get(cp, "scheme", "patch_margin", float, default=0.2)
    if cp.has_section("convergence"):
        options["deltas_rel"] = _floats(_get(cp, "convergence", "deltas_rel"))
    if cp.has_section("gradcheck"):
        options["steps"] = _floats(_get(cp, "gradcheck", "steps", str, default="1e-2 1e-3 1e-4 1e-5"))

    return ExperimentConfig(
        grid=grid,
        quad=quad,
        phase=phase,
        mu_lo=mu_lo,
        mu_hi=mu_hi,
        phantom=phantom,
        sources=sources,
        scheme=scheme,
        delta_rel=_get(cp, "noise", "delta_rel", float, default=0.0)
        if cp.has_section("noise")
        else 0.0,
        seed=_get(cp, "noise", "seed", int, default=0) if cp.has_section("noise") else 0,
        out_dir=Path(_get(cp, "output", "dir")),
        options=options,
        config_text=text,
    )


def _tikhonov_config(cfg: ExperimentConfig, alpha: float) -> TikhonovConfig:
    prior_a = np.full(cfg.grid.shape, cfg.phantom.background_mu_a)
    prior_s = np.full(cfg.grid.shape, cfg.phantom.background_mu_s)
    return TikhonovConfig(
        alpha=alpha,
        prior_a=prior_a,
        prior_s=prior_s,
        mu_lo=cfg.mu_lo,
        mu_hi=cfg.mu_hi,
        p=cfg.options.get("p", 2.0),
        max_outer=cfg.options["max_outer"],
        grad_tol=cfg.options["grad_tol"],
        solver_tol=cfg.options["solver_tol"],
    )


def _save_field(out: Path, name: str, data: np.ndarray, grid: Grid2D) -> None:
    save_field_csv(out / f"{name}.csv", data, grid)
    save_field_pgm(out / f"{name}.pgm", data)


def _write_iteration_log(out: Path, fvals, grad_norms, steps) -> None:
    lines = ["iteration,J,grad_norm,step"]
    for i, f in enumerate(fvals):
        gn = grad_norms[i] if i < len(grad_norms) else float("nan")
        st = steps[i - 1] if 0 < i <= len(steps) else 0.0
        lines.append(f"{i},{f:.17g},{gn:.17g},{st:.17g}")
    (out / "iterations.log").write_text("\n".join(lines) + "\n")


def _simulate_data(cfg: ExperimentConfig, truth: OpticalPair) -> list[np.ndarray]:
    tol = cfg.options.get("solver_tol", 1e-10)
    maps = []
    for m, src in enumerate(cfg.sources):
        E = forward(cfg.grid, cfg.quad, cfg.phase, truth, u0=src, tol=tol)
        if cfg.delta_rel > 0.0:
            delta = cfg.delta_rel * l2_cells(E, cfg.grid)
            E = add_noise(E, delta, cfg.grid, cfg.seed + m)
        maps.append(E)
    return maps


def _collimated_error(nx: int, ns: int, mu_a_value: float, margin: float) -> float:
    """Max relative sweep error against the line-integral attenuation reference.

    Pure absorber, single ordinate closest to +x, uniform patch on the left
    side; cells whose backward ray enters the patch at least `margin` inside
    its edges are compared (the penumbra smoothed by cross-stream numerical
    diffusion is excluded).
    """
    grid = build_grid(nx, nx, 1.0, 1.0)
    quad = build_quadrature(ns)
    phase = build_phase_hg(0.0, quad)
    pair = OpticalPair(
        np.full(grid.shape, mu_a_value), np.zeros(grid.shape), 0.0, max(10.0, mu_a_value)
    )
    patch_lo, patch_hi = 0.1, 0.9
    u0 = boundary_source_patch(
        grid, quad, "left", center=0.5, width=patch_hi - patch_lo, intensity=1.0,
        ordinates=[0],
    )
    u = solve_rte(grid, quad, phase, pair, u0=u0, tol=1e-12).u[:, :, 0]

    cx, cy = quad.directions[0]
    X, Y = grid.meshgrid()
    entry_y = Y - X * (cy / cx)  # backward ray hits the left face at this height
    beam = (entry_y >= patch_lo + margin) & (entry_y <= patch_hi - margin)
    exact = np.exp(-mu_a_value * X / cx)
    return float(np.max(np.abs(u[beam] - exact[beam]) / exact[beam]))


def run_experiment(
    config_path: str | Path,
    out_dir: str | Path | None = None,
    seed: int | None = None,
    data_only: bool = False,
) -> Path:
    """Run the experiment described by the config; returns the artifact directory."""
    cfg = parse_config(config_path)
    if seed is not None:
        cfg.seed = seed
    out = Path(out_dir) if out_dir is not None else cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)

    manifest = {
        "config_sha256": hashlib.sha256(cfg.config_text.encode()).hexdigest(),
        "scheme": cfg.scheme,
        "seed": cfg.seed,
        "grid": f"{cfg.grid.nx}x{cfg.grid.ny}",
        "ordinates": cfg.quad.ns,
        "qpat2d_version": __version__,
        "numpy_version": np.__version__,
    }
    write_manifest(out / "manifest.txt", manifest)

    if cfg.scheme == "beer_lambert":
        rows = [
            (nx, _collimated_error(nx, cfg.quad.ns, cfg.options["mu_a"], cfg.options["patch_margin"]))
            for nx in cfg.options["resolutions"]
        ]
        save_table_csv(out / "beer_lambert_errors.csv", ["nx", "linf_rel_error"], rows)
        return out

    truth = make_phantom(cfg.phantom, cfg.grid, cfg.mu_lo, cfg.mu_hi)
    _save_field(out, "truth_mu_a", truth.mu_a, cfg.grid)
    _save_field(out, "truth_mu_s", truth.mu_s, cfg.grid)
    data = _simulate_data(cfg, truth)
    for m, E in enumerate(data, start=1):
        _save_field(out, f"data_energy_{m}", E, cfg.grid)
    if data_only:
        return out

    if cfg.scheme == "h1" and "deltas_rel" in cfg.options:
        # a [convergence] section turns the run into a noise-level study
        _convergence_table(cfg, truth, out)
        return out

    if cfg.scheme == "h1":
        alpha = cfg.options["alpha"]
        if alpha is None:
            E_norm = l2_cells(data[0], cfg.grid)
            alpha = choose_alpha(
                max(cfg.delta_rel * E_norm, 1e-12),
                cfg.options.get("p", 2.0),
                cfg.options["alpha_c"],
                cfg.options["alpha_r"],
            )
        tcfg = _tikhonov_config(cfg, alpha)
        report = reconstruct(
            cfg.grid, cfg.quad, cfg.phase, data[0], tcfg, u0=cfg.sources[0]
        )
        _save_field(out, "recon_mu_a", report.pair.mu_a, cfg.grid)
        _save_field(out, "recon_mu_s", report.pair.mu_s, cfg.grid)
        _write_iteration_log(
            out, report.functional_values, report.grad_norms, report.step_lengths
        )
    elif cfg.scheme == "levelset":
        o = cfg.options
        lcfg = LevelSetConfig(
            alpha=o["alpha"],
            mu_lo=cfg.mu_lo,
            mu_hi=cfg.mu_hi,
            beta_tv=o["beta_tv"],
            max_outer=o["max_outer"],
            grad_tol=o["grad_tol"],
            solver_tol=o["solver_tol"],
        )
        eps = o["epsilon_cells"] * cfg.grid.hx
        state0 = initial_state(
            cfg.grid, (o["a1"], o["a2"], o["c1"], o["c2"]), eps, o["init_radius_frac"]
        )
        state, pair, report = reconstruct_levelset(
            cfg.grid, cfg.quad, cfg.phase, data[0], state0, lcfg, u0=cfg.sources[0]
        )
        _save_field(out, "recon_mu_a", pair.mu_a, cfg.grid)
        _save_field(out, "recon_mu_s", pair.mu_s, cfg.grid)
        _save_field(out, "recon_phi_a", state.phi_a, cfg.grid)
        _save_field(out, "recon_phi_s", state.phi_s, cfg.grid)
        _write_iteration_log(out, report.fvals, report.grad_norms, report.step_lengths)
    elif cfg.scheme == "kaczmarz":
        alpha = cfg.options["alpha"] if cfg.options["alpha"] is not None else 1e-8
        tcfg = _tikhonov_config(cfg, alpha)
        pair = OpticalPair(
            tcfg.prior_a.copy(), tcfg.prior_s.copy(), cfg.mu_lo, cfg.mu_hi
        )
        lines = ["sweep,summed_misfit"]
        misfit0 = eval_multi_misfit(
            cfg.grid, cfg.quad, cfg.phase, pair, data, cfg.sources, tol=tcfg.solver_tol
        )
        lines.append(f"0,{misfit0:.17g}")
        for sweep in range(1, cfg.options["sweeps"] + 1):
            pair, _ = kaczmarz_sweep(
                cfg.grid, cfg.quad, cfg.phase, pair, data, cfg.sources, tcfg
            )
            misfit = eval_multi_misfit(
                cfg.grid, cfg.quad, cfg.phase, pair, data, cfg.sources, tol=tcfg.solver_tol
            )
            lines.append(f"{sweep},{misfit:.17g}")
        (out / "iterations.log").write_text("\n".join(lines) + "\n")
        _save_field(out, "recon_mu_a", pair.mu_a, cfg.grid)
        _save_field(out, "recon_mu_s", pair.mu_s, cfg.grid)
    return out


def _convergence_table(cfg: ExperimentConfig, truth: OpticalPair, out: Path) -> None:
    E = forward(
        cfg.grid, cfg.quad, cfg.phase, truth, u0=cfg.sources[0],
        tol=cfg.options["solver_tol"],
    )
    E_norm = l2_cells(E, cfg.grid)
    deltas = [d * E_norm for d in cfg.options["deltas_rel"]]
    tcfg = _tikhonov_config(cfg, alpha=1.0)  # per-row alpha set by the rule
    rows = convergence_study(
        cfg.grid,
        cfg.quad,
        cfg.phase,
        truth,
        deltas,
        tcfg,
        u0=cfg.sources[0],
        seed=cfg.seed,
        alpha_c=cfg.options["alpha_c"],
        alpha_r=cfg.options["alpha_r"],
    )
    save_table_csv(
        out / "convergence.csv",
        ["delta", "alpha", "error", "error_mu_a", "error_mu_s"],
        [(r.delta, r.alpha, r.error, r.error_a, r.error_s) for r in rows],
    )


def run_convergence(config_path: str | Path, out_dir: str | Path | None = None, seed: int | None = None) -> Path:
    """Noise-level study: reconstruct for each delta with the power-law alpha rule."""
    cfg = parse_config(config_path)
    if seed is not None:
        cfg.seed = seed
    if "deltas_rel" not in cfg.options:
        raise ConfigError("convergence.deltas_rel", "missing required field")
    out = Path(out_dir) if out_dir is not None else cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    truth = make_phantom(cfg.phantom, cfg.grid, cfg.mu_lo, cfg.mu_hi)
    _convergence_table(cfg, truth, out)
    return out


def run_gradcheck(config_path: str | Path, out_dir: str | Path | None = None, seed: int | None = None) -> Path:
    """Finite-difference validation of the adjoint gradient; emits a CSV table."""
    cfg = parse_config(config_path)
    if seed is not None:
        cfg.seed = seed
    out = Path(out_dir) if out_dir is not None else cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)

    truth = make_phantom(cfg.phantom, cfg.grid, cfg.mu_lo, cfg.mu_hi)
    E_data = forward(cfg.grid, cfg.quad, cfg.phase, truth, u0=cfg.sources[0], tol=1e-12)
    base = OpticalPair(
        np.full(cfg.grid.shape, cfg.phantom.background_mu_a),
        np.full(cfg.grid.shape, cfg.phantom.background_mu_s),
        cfg.mu_lo,
        cfg.mu_hi,
    )
    rng = np.random.default_rng(cfg.seed)
    scale_a = 0.2 * cfg.phantom.background_mu_a
    scale_s = 0.2 * cfg.phantom.background_mu_s
    direction = CoefficientDirection(
        scale_a * rng.standard_normal(cfg.grid.shape),
        scale_s * rng.standard_normal(cfg.grid.shape),
    )
    steps = cfg.options.get("steps", [1e-2, 1e-3, 1e-4, 1e-5])
    result = fd_check(
        cfg.grid, cfg.quad, cfg.phase, base, direction, E_data, steps, u0=cfg.sources[0]
    )
    save_table_csv(out / "gradcheck.csv", ["step", "rel_error"], result.rows)
    return out
