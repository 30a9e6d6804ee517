"""Trace-class fractional noise fields B(t,x) on the periodic box.

The field is a truncated spectral sum B(t,x) = sum_p lam_p e_p(x) beta_p(t)
with orthonormal real Fourier modes e_p, amplitudes lam_p = (1+|k_p|^2)^(-s/2)
and one independent fBm per mode.  Spatial derivatives of the cached field are
the analytic derivatives of the (band-limited) modes, hence identical to
spectral derivatives at machine precision.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from . import fbm as _fbm
from .errors import ConfigurationError, DomainError
from .torus import TorusGrid, get_grid, save_csv, save_flat

logger = logging.getLogger(__name__)

_PARITIES = ("const", "cos", "sin")


@dataclass(frozen=True)
class SpectralMode:
    """One real Fourier mode: integer wavevector, parity and amplitude."""

    mvec: tuple
    parity: str
    amplitude: float

    def __post_init__(self):
        if self.parity not in _PARITIES:
            raise DomainError(f"unknown parity {self.parity!r}")
        if self.amplitude < 0:
            raise DomainError("mode amplitude must be nonnegative")

    def wavevector(self, box: float) -> np.ndarray:
        return 2.0 * np.pi * np.asarray(self.mvec, dtype=float) / box

    def k_squared(self, box: float) -> float:
        return float(np.sum(self.wavevector(box) ** 2))

    def sobolev_factor(self, box: float, order: float) -> float:
        """H^order norm of the unit mode, (1 + |k|^2)^(order/2)."""
        return float((1.0 + self.k_squared(box)) ** (0.5 * order))


def _mode_representatives(dimension: int, count: int) -> list[tuple]:
    """Canonical nonzero wavevectors, one per {m, -m} pair, sorted by |m|."""
    reps: list[tuple] = []
    radius = 1
    while True:
        reps = []
        ranges = [range(-radius, radius + 1)] * dimension
        for m in itertools.product(*ranges):
            if all(c == 0 for c in m):
                continue
            first = next(c for c in m if c != 0)
            if first < 0:
                continue  # keep one representative of {m, -m}
            reps.append(m)
        reps.sort(key=lambda m: (sum(c * c for c in m), m))
        # the cube [-radius, radius]^n contains every m with |m| <= radius
        complete = [m for m in reps if sum(c * c for c in m) <= radius ** 2]
        if len(complete) >= count:
            return complete[:count]
        radius += 1


class NoiseSpectrum:
    """Mode list plus the attached trace-class summability diagnostics."""

    def __init__(self, dimension: int, box: float, modes: list[SpectralMode],
                 decay: float, sobolev_order: int):
        self.dimension = int(dimension)
        self.box = float(box)
        self.modes = list(modes)
        self.decay = float(decay)
        self.sobolev_order = int(sobolev_order)  # the q of V = H^(q+4)
        weights = np.array([
            m.amplitude * m.sobolev_factor(self.box, self.sobolev_order + 4)
            for m in self.modes])
        #: partial sums of lam_p * |e_p|_{H^(q+4)}, attached for tail checks
        self.summability_partial_sums = np.cumsum(weights)
        self.summability_sum = float(self.summability_partial_sums[-1])

    def __len__(self) -> int:
        return len(self.modes)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([m.amplitude for m in self.modes])

    def truncate(self, count: int) -> "NoiseSpectrum":
        if not 1 <= count <= len(self.modes):
            raise DomainError(f"cannot truncate {len(self.modes)} modes to {count}")
        return NoiseSpectrum(self.dimension, self.box, self.modes[:count],
                             self.decay, self.sobolev_order)

    def max_mode_index(self) -> int:
        return max((max(abs(c) for c in m.mvec) for m in self.modes), default=0)


def build_spectrum(dimension: int, box: float, n_modes: int,
                   decay: float | None = None, sobolev_order: int = 0) -> NoiseSpectrum:
    """Orthonormal Fourier modes with amplitudes lam_p = (1+|k_p|^2)^(-decay/2).

    The default decay q + 7 keeps the attached H^(q+4) summability sum
    visibly convergent for n <= 3; smaller decays are rejected.
    """
    if dimension not in (1, 2, 3):
        raise DomainError(f"dimension must be 1, 2 or 3, got {dimension}")
    if n_modes < 1:
        raise DomainError("need at least one mode")
    if sobolev_order < 0:
        raise DomainError("sobolev_order must be a nonnegative integer")
    if decay is None:
        decay = sobolev_order + 7.0
    bound = sobolev_order + 4 + dimension / 2.0 + 1.0
    if decay <= bound:
        raise ConfigurationError(
            f"decay rate {decay} too small for a convergent mode sum: "
            f"require decay > q + 4 + n/2 + 1 = {bound}")

    def amplitude(mvec) -> float:
        ksq = np.sum((2.0 * np.pi * np.asarray(mvec, dtype=float) / box) ** 2)
        return float((1.0 + ksq) ** (-0.5 * decay))

    zero = (0,) * dimension
    modes = [SpectralMode(mvec=zero, parity="const", amplitude=amplitude(zero))]
    if n_modes > 1:
        # each representative contributes a cos and a sin mode
        reps = _mode_representatives(dimension, max(1, n_modes // 2))
        pairs = []
        for m in reps:
            pairs.append((m, "cos"))
            pairs.append((m, "sin"))
        for m, parity in pairs[:n_modes - 1]:
            modes.append(SpectralMode(mvec=m, parity=parity, amplitude=amplitude(m)))
    return NoiseSpectrum(dimension, box, modes, decay, sobolev_order)


def _mode_phase(mode: SpectralMode, grid: TorusGrid) -> np.ndarray:
    k = mode.wavevector(grid.box)
    phase = np.zeros(grid.shape)
    for axis in range(grid.dimension):
        if k[axis] != 0.0:
            phase = phase + k[axis] * grid.coordinates(axis)
    return phase


def mode_values(mode: SpectralMode, grid: TorusGrid) -> np.ndarray:
    """Grid evaluation of the unit-L2-norm eigenfunction e_p."""
    norm = grid.box ** (-0.5 * grid.dimension)
    if mode.parity == "const":
        return np.full(grid.shape, norm)
    phase = _mode_phase(mode, grid)
    if mode.parity == "cos":
        return np.sqrt(2.0) * norm * np.cos(phase)
    return np.sqrt(2.0) * norm * np.sin(phase)


def mode_gradient(mode: SpectralMode, grid: TorusGrid) -> np.ndarray:
    """(n, *grid) array of the analytic gradient of e_p."""
    out = np.zeros((grid.dimension,) + grid.shape)
    if mode.parity == "const":
        return out
    k = mode.wavevector(grid.box)
    norm = np.sqrt(2.0) * grid.box ** (-0.5 * grid.dimension)
    phase = _mode_phase(mode, grid)
    if mode.parity == "cos":
        radial = -norm * np.sin(phase)
    else:
        radial = norm * np.cos(phase)
    for axis in range(grid.dimension):
        out[axis] = k[axis] * radial
    return out


def sobolev_norm(values: np.ndarray, order: float, box: float) -> float:
    """Spectral H^order norm of a grid function on a box of side `box`."""
    grid = get_grid(np.asarray(values).ndim, np.asarray(values).shape[0], box)
    return grid.sobolev_norm(np.asarray(values), order)


class NoiseField:
    """Sampled realisation of the spectral noise with cached grid snapshots."""

    _CACHE_LIMIT = 256

    def __init__(self, spectrum: NoiseSpectrum, hurst: float, times: np.ndarray,
                 paths: np.ndarray, grid: TorusGrid, seed: int,
                 mollified: float | None = None):
        self.spectrum = spectrum
        self.hurst = float(hurst)
        self.times = np.asarray(times, dtype=float)
        self.paths = np.asarray(paths, dtype=float)  # (P, M) per-mode fBm
        self.grid = grid
        self.seed = int(seed)
        self.mollified = mollified
        if self.paths.shape != (len(spectrum), self.times.size):
            raise DomainError("per-mode path array has the wrong shape")
        self._cache: dict = {}
        self._mode_grids = None
        self._mode_grads = None

    # -- mode geometry, built lazily ----------------------------------------
    @property
    def mode_grids(self) -> np.ndarray:
        if self._mode_grids is None:
            self._mode_grids = np.stack(
                [mode_values(m, self.grid) for m in self.spectrum.modes])
        return self._mode_grids

    @property
    def mode_gradients(self) -> np.ndarray:
        if self._mode_grads is None:
            self._mode_grads = np.stack(
                [mode_gradient(m, self.grid) for m in self.spectrum.modes])
        return self._mode_grads

    @property
    def mode_k_squared(self) -> np.ndarray:
        return np.array([m.k_squared(self.grid.box) for m in self.spectrum.modes])

    # -- time bookkeeping -----------------------------------------------------
    def time_index(self, t: float) -> int:
        idx = int(np.argmin(np.abs(self.times - t)))
        if not np.isclose(self.times[idx], t, rtol=1e-12, atol=1e-12):
            raise DomainError(
                f"t={t} is not a sampling time of this noise field "
                "(noise is never interpolated in time)")
        return idx

    def _cached(self, key, build):
        if key not in self._cache:
            if len(self._cache) >= self._CACHE_LIMIT:
                self._cache.pop(next(iter(self._cache)))
            self._cache[key] = build()
        return self._cache[key]

    def _coefficients(self, index: int) -> np.ndarray:
        return self.spectrum.amplitudes * self.paths[:, index]

    # -- field snapshots -------------------------------------------------------
    def b(self, index: int) -> np.ndarray:
        """B(t_index, .) on the grid."""
        return self._cached(("b", index), lambda: np.tensordot(
            self._coefficients(index), self.mode_grids, axes=1))

    def grad_b(self, index: int) -> np.ndarray:
        """(n, *grid) gradient of B at a sampling time."""
        return self._cached(("grad", index), lambda: np.tensordot(
            self._coefficients(index), self.mode_gradients, axes=1))

    def lap_b(self, index: int) -> np.ndarray:
        coeff = -self.mode_k_squared * self._coefficients(index)
        return self._cached(("lap", index),
                            lambda: np.tensordot(coeff, self.mode_grids, axes=1))

    def increment(self, i: int, j: int) -> np.ndarray:
        """B(t_j, .) - B(t_i, .) assembled from exact per-mode increments."""
        coeff = self.spectrum.amplitudes * (self.paths[:, j] - self.paths[:, i])
        return np.tensordot(coeff, self.mode_grids, axes=1)

    def b_sobolev_norm(self, index: int, order: float) -> float:
        """H^order norm of B(t_index) from the orthonormal mode expansion."""
        coeff = self._coefficients(index)
        weights = np.array([m.sobolev_factor(self.grid.box, order)
                            for m in self.spectrum.modes])
        return float(np.linalg.norm(coeff * weights))

    def holder_trace_diagnostic(self, gamma: float) -> float:
        """sum_p lam_p |e_p|_{H^(q+4)} |beta_p|_{C^0,gamma}, the sampled
        analog of the constant that controls the mode sum path by path."""
        from .fraccalc import holder_seminorm

        v_order = self.spectrum.sobolev_order + 4
        total = 0.0
        for p, mode in enumerate(self.spectrum.modes):
            total += (mode.amplitude
                      * mode.sobolev_factor(self.grid.box, v_order)
                      * holder_seminorm(self.times, self.paths[p], gamma))
        return total

    def export_snapshot(self, index: int, path, fmt: str = "bin") -> None:
        """Write B(t_index) row-major; 'bin' is little-endian float64."""
        if fmt == "bin":
            save_flat(self.b(index), path)
        elif fmt == "csv":
            save_csv(np.atleast_2d(self.b(index)), path)
        else:
            raise DomainError(f"unknown export format {fmt!r}")

    # -- mollification ---------------------------------------------------------
    def mollify(self, epsilon: float) -> "NoiseField":
        """C1-on-the-grid smoothing of every mode path.

        Piecewise-linear resampling through knots spaced `epsilon`, then one
        [1/4, 1/2, 1/4] averaging pass with pinned endpoints.  Both stages
        are non-expansive for every discrete Holder seminorm with concave
        modulus, so |beta_eps|_{C^0,gamma} <= |beta|_{C^0,gamma}.
        """
        if epsilon <= 0:
            raise DomainError("mollification width must be positive")
        spacing = self.times[1] - self.times[0] if self.times.size > 1 else 0.0
        if spacing == 0.0 or epsilon < spacing:
            logger.warning(
                "mollification width %.3e below grid spacing %.3e: "
                "returning the field unchanged", epsilon, spacing)
            return self
        d = np.diff(self.times)
        if not np.allclose(d, d[0], rtol=1e-9, atol=0.0):
            raise DomainError("mollification requires a uniform time grid")
        step = max(1, int(round(epsilon / spacing)))
        knots = np.arange(0, self.times.size, step)
        if knots[-1] != self.times.size - 1:
            knots = np.append(knots, self.times.size - 1)
        smooth = np.empty_like(self.paths)
        for p in range(self.paths.shape[0]):
            smooth[p] = np.interp(self.times, self.times[knots],
                                  self.paths[p, knots])
        if self.times.size > 2:
            rounded = smooth.copy()
            rounded[:, 1:-1] = (smooth[:, :-2] + 2.0 * smooth[:, 1:-1]
                                + smooth[:, 2:]) / 4.0
            smooth = rounded
        return NoiseField(self.spectrum, self.hurst, self.times, smooth,
                          self.grid, self.seed, mollified=float(epsilon))


def sample_field(spectrum: NoiseSpectrum, hurst: float, times, seed: int,
                 grid_points: int, method: str = "auto") -> NoiseField:
    """Draw an independent fBm per mode and bind the field to an N^n grid.

    Streams are derived from (seed, mode index), so truncating or extending
    the mode list never changes the paths of the retained modes.
    """
    times = np.asarray(times, dtype=float)
    grid = get_grid(spectrum.dimension, grid_points, spectrum.box)
    if spectrum.max_mode_index() > grid_points // 2 - 1:
        raise ConfigurationError(
            f"spectrum contains modes beyond the Nyquist index of an "
            f"N={grid_points} grid")
    if method == "auto":
        method = _fbm.auto_method(times.size, _fbm.is_uniform_grid(times))
    paths = np.empty((len(spectrum), times.size))
    for p in range(len(spectrum)):
        paths[p] = _fbm.sample_fbm(hurst, times, seed, method=method,
                                   stream=p).values
    return NoiseField(spectrum, hurst, times, paths, grid, seed)


def mollify_field(field: NoiseField, epsilon: float) -> NoiseField:
    """Module-level alias for NoiseField.mollify."""
    return field.mollify(epsilon)


def zero_field(spectrum: NoiseSpectrum, hurst: float, times, grid_points: int,
               seed: int = 0) -> NoiseField:
    """Noise field with B identically zero; baseline for deterministic runs."""
    times = np.asarray(times, dtype=float)
    grid = get_grid(spectrum.dimension, grid_points, spectrum.box)
    paths = np.zeros((len(spectrum), times.size))
    return NoiseField(spectrum, hurst, times, paths, grid, seed)
