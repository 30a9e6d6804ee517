"""Batch front door: INI-style configs, named experiments, report emission.

Exit codes: 0 success, 1 check-suite violation, 2 invalid configuration,
3 numerical failure.  Reports are byte-deterministic for a fixed
(config, seed); wall-clock metadata lives only in meta.json.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import configparser
import datetime
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

import numpy as np

from . import __version__, diagnostics, fbm, fraccalc, qnoise, sse
from .errors import ConfigurationError, FracsseError, NumericalError
from .fraccalc import SampledFunction
from .magschrod import WaveField
from .nonlinear import NonlinearitySpec

EXPERIMENTS = ("single-solve", "gauge-equivalence", "mollification",
               "fraccalc-validation")
CHECK_SUITES = ("fraccalc", "fbm", "isometry", "charge")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


@dataclass
class SolverConfig:
    """Validated experiment parameters; see `example_config` for the format."""

    experiment: str = "single-solve"
    dimension: int = 1
    grid_points: int = 256
    box: float = 8.0 * math.pi
    hurst: float = 0.75
    n_modes: int = 32
    decay: float | None = None
    sobolev_order: int = 0
    kind: str = "power"
    sigma: float = 1.0
    mu: float = 1.0
    coupling: float = 1.0
    scheme: str = "crank_nicolson_mag"
    dt_list: list = dataclass_field(default_factory=lambda: [2.0 ** -8])
    t_end: float = 1.0
    seed: int = 42
    alpha: float | None = None
    workers: int = 1
    out_dir: str = "runs"
    eps_list: list = dataclass_field(default_factory=list)

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(
                f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if not 0.5 < self.hurst < 1.0:
            raise ConfigurationError(
                f"Hurst index {self.hurst} violates the constraint H in (1/2, 1)")
        if self.dimension not in (1, 2, 3):
            raise ConfigurationError("dimension must be 1, 2 or 3")
        n = self.grid_points
        if n < 2 or n & (n - 1):
            raise ConfigurationError(f"grid_points must be a power of two, got {n}")
        alpha = self.resolve_alpha()
        lo, hi = 1.0 - self.hurst, 0.5
        if not lo < alpha < hi:
            raise ConfigurationError(
                f"alpha {alpha} violates the constraint alpha in ({lo:g}, {hi:g})")
        if not self.dt_list:
            raise ConfigurationError("at least one dt is required")
        if any(dt <= 0 for dt in self.dt_list):
            raise ConfigurationError("time steps must be positive")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        self.nonlinearity().validate(self.dimension, self.sobolev_order)

    def resolve_alpha(self) -> float:
        return self.alpha if self.alpha is not None else \
            fraccalc.default_alpha(self.hurst)

    def nonlinearity(self) -> NonlinearitySpec:
        if self.kind == "none":
            return NonlinearitySpec.none()
        if self.kind == "power":
            return NonlinearitySpec.power(self.sigma, self.mu)
        if self.kind == "hartree":
            return NonlinearitySpec.hartree(self.coupling)
        raise ConfigurationError(f"unknown nonlinearity kind {self.kind!r}")

    def config_hash(self) -> str:
        payload = repr(sorted(self.__dict__.items())).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def _parse_number(text: str) -> float:
    text = text.strip()
    if "^" in text:  # dyadic sugar: 2^-8
        base, exponent = text.split("^")
        return float(base) ** float(exponent)
    return float(text)


def load_config(path) -> SolverConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"cannot read config file {path}")
    cfg = SolverConfig()
    section_map = {
        "experiment": {"name": ("experiment", str), "seed": ("seed", int),
                       "out": ("out_dir", str), "workers": ("workers", int)},
        "grid": {"n": ("dimension", int), "points": ("grid_points", int),
                 "box": ("box", _parse_number), "t_end": ("t_end", _parse_number)},
        "noise": {"hurst": ("hurst", _parse_number), "modes": ("n_modes", int),
                  "decay": ("decay", _parse_number),
                  "sobolev_order": ("sobolev_order", int)},
        "nonlinearity": {"kind": ("kind", str), "sigma": ("sigma", _parse_number),
                         "mu": ("mu", _parse_number),
                         "coupling": ("coupling", _parse_number)},
        "solver": {"scheme": ("scheme", str), "alpha": ("alpha", _parse_number)},
    }
    list_keys = {("solver", "dt"), ("solver", "eps")}
    for section, keys in section_map.items():
        if not parser.has_section(section):
            continue
        for key, raw in parser.items(section):
            if (section, key) in list_keys:
                continue  # comma lists, parsed below
            if key not in keys:
                raise ConfigurationError(
                    f"unknown key {key!r} in section [{section}]")
            attr, cast = keys[key]
            setattr(cfg, attr, cast(raw))
    if parser.has_option("solver", "dt"):
        cfg.dt_list = [_parse_number(v)
                       for v in parser.get("solver", "dt").split(",")]
    if parser.has_option("solver", "eps"):
        cfg.eps_list = [_parse_number(v)
                        for v in parser.get("solver", "eps").split(",")]
    return cfg


def example_config() -> str:
    return (
        "[experiment]\n"
        "name = gauge-equivalence\n"
        "seed = 42\n"
        "out = runs/gauge\n\n"
        "[grid]\n"
        "points = 256\n"
        "box = 25.132741228718345\n"
        "t_end = 1.0\n\n"
        "[noise]\n"
        "hurst = 0.75\n"
        "modes = 32\n\n"
        "[nonlinearity]\n"
        "kind = power\n"
        "sigma = 1.0\n"
        "mu = 1.0\n\n"
        "[solver]\n"
        "scheme = crank_nicolson_mag\n"
        "dt = 2^-8, 2^-9, 2^-10, 2^-11, 2^-12\n"
    )


# ---------------------------------------------------------------------------
# experiment runners
# ---------------------------------------------------------------------------

def _initial_packet(config: SolverConfig) -> WaveField:
    from .torus import get_grid

    grid = get_grid(config.dimension, config.grid_points, config.box)
    x0 = 0.5 * config.box
    width = config.box / 16.0
    values = np.ones(grid.shape, dtype=complex)
    for axis in range(config.dimension):
        coord = grid.coordinates(axis)
        values = values * np.exp(-(coord - x0) ** 2 / (2.0 * width ** 2))
    values = values * np.exp(1j * grid.coordinates(0) * (2.0 * np.pi / config.box))
    psi = WaveField(values, config.box)
    return WaveField(psi.values / psi.l2_norm(), config.box)


def _build_field(config: SolverConfig, dt_min: float) -> qnoise.NoiseField:
    spectrum = qnoise.build_spectrum(config.dimension, config.box,
                                     config.n_modes, config.decay,
                                     config.sobolev_order)
    times = sse.stage_times(config.t_end, dt_min)
    return qnoise.sample_field(spectrum, config.hurst, times, config.seed,
                               config.grid_points)


def run_single_solve(config: SolverConfig, report: diagnostics.RunReport) -> None:
    field = _build_field(config, min(config.dt_list))
    psi0 = _initial_packet(config)
    traj = sse.solve_direct(psi0, field, config.nonlinearity(),
                            min(config.dt_list), config.t_end)
    norms, drift = diagnostics.charge_series(traj)
    h1 = traj.sobolev_norms(1.0)
    for t, l2, s1 in zip(traj.times, norms, h1):
        report.add_row(t=float(t), l2_norm=float(l2), h1_norm=float(s1))
    report.add_table("summary", [{"max_charge_drift": drift}])


def run_gauge_equivalence(config: SolverConfig,
                          report: diagnostics.RunReport) -> None:
    dts = sorted(config.dt_list, reverse=True)
    if len(dts) < 3:
        raise ConfigurationError("gauge-equivalence needs >= 3 dt values")
    field = _build_field(config, min(dts))
    psi0 = _initial_packet(config)
    spec = config.nonlinearity()

    def one(dt: float) -> dict:
        rows = diagnostics.gauge_gap_sweep(psi0, field, spec, [dt],
                                           config.t_end, config.scheme)
        return rows[0]

    if config.workers > 1:
        with concurrent.futures.ThreadPoolExecutor(config.workers) as pool:
            rows = list(pool.map(one, dts))
    else:
        rows = [one(dt) for dt in dts]
    order, monotone = diagnostics.convergence_order(
        [r["dt"] for r in rows], [r["terminal_gap"] for r in rows])
    report.add_table("gauge_gap", rows)
    report.add_table("summary", [{"estimated_order": order,
                                  "monotone": monotone}])


def run_mollification(config: SolverConfig,
                      report: diagnostics.RunReport) -> None:
    dt = min(config.dt_list)
    field = _build_field(config, dt)
    psi0 = _initial_packet(config)
    eps_list = config.eps_list or [config.t_end / 2 ** j for j in range(2, 7)]
    rows = diagnostics.mollification_study(psi0, field, config.nonlinearity(),
                                           dt, config.t_end, eps_list)
    report.add_table("mollification", rows)


def run_fraccalc_validation(config: SolverConfig,
                            report: diagnostics.RunReport) -> None:
    results = check_fraccalc()
    report.add_table("fraccalc_checks", [
        {"name": n, "passed": p, "detail": d} for n, p, d in results])
    if not all(p for _, p, _ in results):
        raise NumericalError("fraccalc validation suite failed")


RUNNERS = {
    "single-solve": run_single_solve,
    "gauge-equivalence": run_gauge_equivalence,
    "mollification": run_mollification,
    "fraccalc-validation": run_fraccalc_validation,
}


def run(config: SolverConfig, out_dir=None) -> Path:
    """Execute one experiment and write report.csv/report.json/meta.json."""
    config.validate()
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = diagnostics.RunReport(config_hash=config.config_hash())
    RUNNERS[config.experiment](config, report)
    report.to_csv(out / "report.csv")
    report.to_json(out / "report.json")
    (out / "config.ini").write_text(_echo_config(config))
    meta = {"timestamp": datetime.datetime.now().isoformat(),
            "package_version": __version__,
            "numpy_version": np.__version__}
    (out / "meta.json").write_text(json.dumps(meta, indent=1) + "\n")
    return out


def _echo_config(config: SolverConfig) -> str:
    lines = ["[echo]"]
    for key in sorted(config.__dict__):
        lines.append(f"{key} = {config.__dict__[key]}")
    return "\n".join(lines) + "\n"


def emit_plots(out: Path, report_json: Path) -> None:
    """Optional SVG rendering of the report tables (requires matplotlib)."""
    import matplotlib
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "fracsse"
    import matplotlib.pyplot as plt

    payload = json.loads(report_json.read_text())
    for name, rows in payload.get("tables", {}).items():
        if len(rows) < 2 or len(rows[0]) < 2:
            continue
        keys = sorted(rows[0])
        xkey = keys[0]
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for ykey in keys[1:]:
            ys = [r[ykey] for r in rows]
            if not all(isinstance(y, float) for y in ys):
                continue
            ax.plot([r[xkey] for r in rows], ys, "o-", label=ykey)
        ax.set_xlabel(xkey)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out / f"{name}.svg", metadata={"Date": None})
        plt.close(fig)


# ---------------------------------------------------------------------------
# built-in check suites
# ---------------------------------------------------------------------------

def check_fraccalc() -> list[tuple]:
    """Closed-form and oracle checks of the fractional-calculus layer."""
    out = []
    t = np.linspace(0.0, 1.0, 2049)
    f_lin = SampledFunction(t, t.copy())
    f_one = SampledFunction(t, np.ones_like(t))
    g_sq = SampledFunction(t, t ** 2)

    val = fraccalc.weyl_left(f_lin, 0.5, 1.0)
    expect = 1.0 / math.gamma(1.5)
    out.append(("weyl_left monomial", abs(val - expect) < 1e-6,
                f"{val:.8f} vs {expect:.8f}"))

    val = fraccalc.stieltjes_integral(f_lin, g_sq, 0.4)
    out.append(("stieltjes t d(t^2) = 2/3", abs(val - 2.0 / 3.0) < 1e-4,
                f"{val:.8f}"))

    val = fraccalc.stieltjes_integral(f_one, g_sq, 0.4)
    out.append(("stieltjes 1 dg = g(T)-g(0)", abs(val - 1.0) < 1e-4,
                f"{val:.8f}"))

    path = fbm.sample_fbm(0.75, t, 42, method="circulant")
    g_fbm = SampledFunction(t, path.values)
    smooth = SampledFunction(t, 1.0 + np.cos(2.0 * np.pi * t))
    vals = [fraccalc.stieltjes_integral(smooth, g_fbm, a, refine=2)
            for a in (0.30, 0.40, 0.45)]
    spread = (max(vals) - min(vals)) / max(abs(v) for v in vals)
    out.append(("alpha-independence on fBm", spread < 1e-3, f"spread {spread:.2e}"))

    young = fraccalc.young_riemann(smooth, g_fbm)
    rel = abs(vals[1] - young) / abs(young)
    out.append(("stieltjes vs Young oracle", rel < 1e-3, f"rel {rel:.2e}"))

    bound_ok = True
    t_short = np.linspace(0.0, 1.0, 513)
    for trial in range(10):
        rng = fbm.make_generator(500 + trial)
        coeffs = rng.standard_normal(4)
        fv = sum(c * np.cos((k + 1) * np.pi * t_short)
                 for k, c in enumerate(coeffs))
        f_rand = SampledFunction(t_short, fv)
        g_rand = SampledFunction(t_short, fbm.sample_fbm(
            0.75, t_short, 600 + trial).values)
        lhs = abs(fraccalc.stieltjes_integral(f_rand, g_rand, 0.4))
        rhs = fraccalc.w_alpha1_norm(f_rand, 0.4) * fraccalc.lambda_alpha(g_rand, 0.4)
        bound_ok &= lhs <= rhs
    out.append(("two-sided estimate |int f dg| <= |f|_{a,1} Lam_a(g)",
                bound_ok, "10 randomized pairs"))
    return out


def check_fbm() -> list[tuple]:
    out = []
    t = np.linspace(0.0, 1.0, 129)
    ens = fbm.sample_fbm_ensemble(0.75, t, 11, 2000)
    worst = 0.0
    for (i, j) in [(32, 32), (64, 100), (128, 16)]:
        emp = float(np.mean(ens[:, i] * ens[:, j]))
        ref = fbm.fbm_covariance(t[i], t[j], 0.75)
        worst = max(worst, abs(emp - ref) / ref)
    out.append(("empirical covariance (2000 paths)", worst < 0.10,
                f"worst rel {worst:.2%}"))
    p1 = fbm.sample_fbm(0.75, t, 5)
    p2 = fbm.sample_fbm(0.75, t, 5)
    out.append(("determinism", bool(np.array_equal(p1.values, p2.values)), ""))
    return out


def _check_problem():
    box = 8.0 * np.pi
    spectrum = qnoise.build_spectrum(1, box, 16)
    times = sse.stage_times(0.25, 2.0 ** -9)
    field = qnoise.sample_field(spectrum, 0.75, times, 99, 128)
    grid = field.grid
    x = grid.axis_coordinates()
    values = np.exp(-(x - box / 2) ** 2 / (2 * (box / 16) ** 2)) * np.exp(1j * x)
    psi0 = WaveField(values, box)
    psi0 = WaveField(psi0.values / psi0.l2_norm(), box)
    return field, psi0


def check_isometry() -> list[tuple]:
    out = []
    field, psi0 = _check_problem()
    for scheme, tol in (("strang_gauge", 1e-10), ("crank_nicolson_mag", 1e-6)):
        traj = sse.solve_gauge(psi0, field, NonlinearitySpec.none(),
                               2.0 ** -9, 0.25, scheme=scheme)
        _, drift = diagnostics.charge_series(traj)
        out.append((f"L2 isometry {scheme}", drift < tol, f"drift {drift:.2e}"))
    return out


def check_charge() -> list[tuple]:
    out = []
    field, psi0 = _check_problem()
    traj = sse.solve_direct(psi0, field, NonlinearitySpec.power(1.0, 1.0),
                            2.0 ** -9, 0.25)
    _, drift = diagnostics.charge_series(traj)
    out.append(("charge conservation, power g", drift < 1e-10,
                f"drift {drift:.2e}"))
    return out


CHECKS = {"fraccalc": check_fraccalc, "fbm": check_fbm,
          "isometry": check_isometry, "charge": check_charge}


def run_checks(suite: str) -> int:
    names = CHECK_SUITES if suite == "all" else (suite,)
    failed = 0
    for name in names:
        if name not in CHECKS:
            raise ConfigurationError(
                f"unknown check suite {name!r}; choose from {CHECK_SUITES}")
        for label, passed, detail in CHECKS[name]():
            status = "PASS" if passed else "FAIL"
            print(f"[{status}] {name}: {label}" + (f" ({detail})" if detail else ""))
            failed += 0 if passed else 1
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracsse",
        description="Pathwise fractional-noise Schrodinger experiments")
    parser.add_argument("--config", type=Path, help="INI experiment file")
    parser.add_argument("--experiment", choices=EXPERIMENTS,
                        help="override the experiment name")
    parser.add_argument("--check", metavar="SUITE",
                        help=f"run a verification suite: {CHECK_SUITES + ('all',)}")
    parser.add_argument("--seed", type=int, help="override the seed")
    parser.add_argument("--out", type=Path, help="override the output directory")
    parser.add_argument("--workers", type=int, help="parallel worker bound")
    parser.add_argument("--plots", action="store_true",
                        help="emit SVG plots next to the reports")
    parser.add_argument("--print-config", action="store_true",
                        help="print a template config and exit")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.print_config:
        print(example_config(), end="")
        return EXIT_OK
    try:
        if args.check:
            return run_checks(args.check)
        if args.config is None:
            raise ConfigurationError("either --config or --check is required")
        config = load_config(args.config)
        if args.experiment:
            config.experiment = args.experiment
        if args.seed is not None:
            config.seed = args.seed
        if args.workers is not None:
            config.workers = args.workers
        out = run(config, args.out)
        if args.plots:
            emit_plots(out, out / "report.json")
        print(f"wrote {out}")
        return EXIT_OK
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FracsseError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
