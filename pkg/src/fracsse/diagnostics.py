"""Invariant monitors and study harnesses: charge, energy, Holder, sweeps."""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import fraccalc, sse
from .errors import ConfigurationError, DomainError
from .fraccalc import SampledFunction
from .nonlinear import NonlinearitySpec
from .qnoise import NoiseField, mollify_field
from .sse import Trajectory


def charge_series(traj: Trajectory) -> tuple[np.ndarray, float]:
    """Per-snapshot L2 norms and the maximal relative drift from t=0."""
    if len(traj) == 0:
        raise DomainError("empty trajectory")
    norms = traj.l2_norms()
    drift = float(np.max(np.abs(norms - norms[0])) / norms[0])
    return norms, drift


def energy_identity_residual(traj: Trajectory, field: NoiseField,
                             alpha: float | None = None,
                             t_index: int | None = None) -> float:
    """Residual of the kinetic-energy identity for forcing-free runs,

    | |grad psi(t)|^2/2 - |grad psi_0|^2/2
      + Im sum_p lam_p int (int conj(psi) grad psi . grad e_p dx) d beta_p |.

    Swapping the space integral inside the pathwise integral is legitimate
    for finite mode sums (see fraccalc.fubini_residual).
    """
    if traj.provenance.get("kind", "none") != "none":
        raise ConfigurationError(
            "the energy identity is monitored for g = 0 runs only")
    if alpha is None:
        alpha = fraccalc.default_alpha(field.hurst)
    grid = traj.grid
    if t_index is None:
        t_index = len(traj) - 1
    times = traj.times[:t_index + 1]
    psi = traj.values[:t_index + 1]

    kinetic_end = 0.5 * grid.h1_seminorm(psi[-1]) ** 2
    kinetic_start = 0.5 * grid.h1_seminorm(psi[0]) ** 2

    stride = traj.field_stride
    idx = np.arange(0, t_index * stride + 1, stride)
    window = times - times[0]
    lams = field.spectrum.amplitudes
    total = 0.0 + 0.0j
    grads = [np.stack(grid.gradient(p)) for p in psi]
    for p_mode in range(lams.size):
        ge = field.mode_gradients[p_mode]
        series = np.array([
            grid.cell_volume * np.sum(np.conj(psi[j]) *
                                      np.sum(grads[j] * ge, axis=0))
            for j in range(len(times))])
        total += lams[p_mode] * fraccalc.stieltjes_integral(
            SampledFunction(window, series),
            SampledFunction(window, field.paths[p_mode, idx]), alpha)
    return float(abs(kinetic_end - kinetic_start + np.imag(total)))


def convergence_order(dts, errors) -> tuple[float, bool]:
    """Least-squares slope of log(error) vs log(dt) plus a monotonicity flag."""
    dts = np.asarray(dts, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if dts.size < 3:
        raise DomainError("need at least 3 rows to estimate an order")
    if np.any(errors <= 0):
        raise DomainError("errors must be positive")
    order = np.argsort(-dts)
    dts, errors = dts[order], errors[order]
    slope = float(np.polyfit(np.log(dts), np.log(errors), 1)[0])
    monotone = bool(np.all(np.diff(errors) < 0))
    return slope, monotone


def mollification_study(psi0, field: NoiseField, spec: NonlinearitySpec,
                        dt: float, t_end: float, eps_sequence) -> list[dict]:
    """Noise gap and terminal solution gap for a sweep of mollifier widths.

    Each row reports sup_t |B_eps(t) - B(t)|_{H^(q+4)} on the sampled grid
    and |psi_eps(T) - psi(T)|_{L2}, both solved with the direct route.
    """
    reference = sse.solve_direct(psi0, field, spec, dt, t_end)
    grid = reference.grid
    v_order = field.spectrum.sobolev_order + 4
    weights = np.array([m.sobolev_factor(field.grid.box, v_order)
                        for m in field.spectrum.modes])
    lams = field.spectrum.amplitudes
    rows = []
    for eps in eps_sequence:
        smooth = mollify_field(field, float(eps))
        coeff_gap = (lams * weights)[:, None] * (smooth.paths - field.paths)
        noise_gap = float(np.max(np.linalg.norm(coeff_gap, axis=0)))
        run = sse.solve_direct(psi0, smooth, spec, dt, t_end)
        sol_gap = grid.l2_norm(run.values[-1] - reference.values[-1])
        rows.append({"epsilon": float(eps), "noise_gap": noise_gap,
                     "solution_gap": sol_gap})
    return rows


def gauge_gap_sweep(psi0, field: NoiseField, spec: NonlinearitySpec,
                    dts, t_end: float,
                    scheme: str = "crank_nicolson_mag") -> list[dict]:
    """Terminal L2 gap between the direct and gauge routes per time step."""
    grid = psi0.grid
    rows = []
    for dt in dts:
        direct = sse.solve_direct(psi0, field, spec, float(dt), t_end)
        gauge = sse.solve_gauge(psi0, field, spec, float(dt), t_end,
                                scheme=scheme)
        gap = grid.l2_norm(direct.values[-1] - gauge.values[-1])
        rows.append({"dt": float(dt), "terminal_gap": gap})
    return rows


def trajectory_holder_exponent(traj: Trajectory, sobolev_order: float,
                               lag_exponents=None) -> float:
    """Structure-function exponent of t -> psi(t) in the H^order norm."""
    grid = traj.grid
    m = len(traj)
    if m < 9:
        raise DomainError("trajectory too short for a lag regression")
    if lag_exponents is None:
        lag_exponents = range(0, max(3, int(np.log2(m - 1)) - 2))
    lags = [2 ** j for j in lag_exponents]
    if max(lags) >= m:
        raise DomainError("lag exceeds trajectory length")
    dt = traj.times[1] - traj.times[0]
    msq = []
    for lag in lags:
        diffs = [grid.sobolev_norm(traj.values[j + lag] - traj.values[j],
                                   sobolev_order) ** 2
                 for j in range(0, m - lag)]
        msq.append(np.mean(diffs))
    slope = np.polyfit(np.log(np.array(lags) * dt), np.log(msq), 1)[0]
    return float(0.5 * slope)


@dataclass
class RunReport:
    """Deterministic record of one experiment: time rows plus study tables."""

    config_hash: str
    rows: list = dataclass_field(default_factory=list)
    tables: dict = dataclass_field(default_factory=dict)

    @staticmethod
    def _clean(cells: dict) -> dict:
        out = {}
        for key, value in cells.items():
            if isinstance(value, np.generic):
                value = value.item()
            if isinstance(value, float) and not np.isfinite(value):
                raise DomainError("report cells must be finite")
            out[key] = value
        return out

    def add_row(self, **cells) -> None:
        self.rows.append(self._clean(cells))

    def add_table(self, name: str, rows: list) -> None:
        self.tables[name] = [self._clean(row) for row in rows]

    def to_json(self, path) -> None:
        payload = {"config_hash": self.config_hash, "rows": self.rows,
                   "tables": self.tables}
        with open(path, "w") as handle:
            json.dump(payload, handle, indent=1, sort_keys=True)
            handle.write("\n")

    def to_csv(self, path) -> None:
        with open(path, "w") as handle:
            if self.rows:
                keys = sorted(self.rows[0])
                handle.write(",".join(keys) + "\n")
                for row in self.rows:
                    handle.write(",".join(repr(row[k]) for k in keys) + "\n")
            for name, rows in sorted(self.tables.items()):
                if not rows:
                    continue
                keys = sorted(rows[0])
                handle.write(f"# table: {name}\n")
                handle.write(",".join(keys) + "\n")
                for row in rows:
                    handle.write(",".join(repr(row[k]) for k in keys) + "\n")
