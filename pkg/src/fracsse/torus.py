"""Uniform periodic grids and spectral operations on the torus [0, L)^n, n <= 3.

Fields are complex arrays of shape (N,)*n.  Quadrature is the rectangle rule
of the periodic grid (exact for band-limited integrands); derivatives are
Fourier multipliers.  For even N the Nyquist mode is zeroed in first-derivative
multipliers, see http://math.mit.edu/~stevenj/fft-deriv.pdf.
"""

from __future__ import annotations

import functools

import numpy as np

from .errors import DomainError


class TorusGrid:
    """Geometry and cached Fourier multipliers for an N^n periodic box."""

    def __init__(self, dimension: int, points: int, box: float):
        if dimension not in (1, 2, 3):
            raise DomainError(f"dimension must be 1, 2 or 3, got {dimension}")
        if points < 2:
            raise DomainError(f"need at least 2 grid points per axis, got {points}")
        if not box > 0:
            raise DomainError(f"box length must be positive, got {box}")
        self.dimension = int(dimension)
        self.points = int(points)
        self.box = float(box)
        self.shape = (self.points,) * self.dimension
        self.spacing = self.box / self.points
        self.cell_volume = self.spacing ** self.dimension

        # integer modes, physical wavenumbers k = 2*pi*m/L per axis
        modes = np.fft.fftfreq(self.points, d=1.0 / self.points)
        k1 = 2.0 * np.pi * modes / self.box
        kd1 = k1.copy()
        if self.points % 2 == 0:
            kd1[self.points // 2] = 0.0  # Nyquist zeroed for odd derivatives

        self._k_axes = []
        self._kd_axes = []
        for axis in range(self.dimension):
            newshape = [1] * self.dimension
            newshape[axis] = self.points
            self._k_axes.append(k1.reshape(newshape))
            self._kd_axes.append(kd1.reshape(newshape))
        self.k_squared = sum(k ** 2 for k in self._k_axes)
        self.kd_squared = sum(k ** 2 for k in self._kd_axes)

        cutoff = self.points // 3
        keep1 = np.abs(modes) <= cutoff
        mask = np.ones(self.shape, dtype=bool)
        for axis in range(self.dimension):
            newshape = [1] * self.dimension
            newshape[axis] = self.points
            mask &= keep1.reshape(newshape)
        self.dealias_mask = mask

    def axis_coordinates(self) -> np.ndarray:
        return np.arange(self.points) * self.spacing

    def coordinates(self, axis: int) -> np.ndarray:
        """Coordinate mesh of one axis, broadcastable to the full grid shape."""
        x = self.axis_coordinates()
        newshape = [1] * self.dimension
        newshape[axis] = self.points
        return x.reshape(newshape)

    # -- transforms ---------------------------------------------------------
    def fft(self, u: np.ndarray) -> np.ndarray:
        return np.fft.fftn(u)

    def ifft(self, u_hat: np.ndarray) -> np.ndarray:
        return np.fft.ifftn(u_hat)

    def dealias(self, u: np.ndarray) -> np.ndarray:
        """2/3-rule truncation: zero every mode with |m| > N/3 on any axis."""
        return self.ifft(self.fft(u) * self.dealias_mask)

    # -- calculus -----------------------------------------------------------
    def gradient(self, u: np.ndarray) -> list[np.ndarray]:
        u_hat = self.fft(u)
        return [self.ifft(1j * k * u_hat) for k in self._kd_axes]

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        return self.ifft(-self.k_squared * self.fft(u))

    def kinetic_factor(self, dt: float) -> np.ndarray:
        """Fourier multiplier advancing d(psi)/dt = i*Lap(psi) by dt exactly."""
        return np.exp(-1j * self.k_squared * dt)

    # -- quadrature and norms ------------------------------------------------
    def integrate(self, u: np.ndarray) -> complex:
        return self.cell_volume * u.sum()

    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        """L2 pairing (u, v) = integral of conj(u) * v."""
        return self.cell_volume * np.vdot(u, v)

    def l2_norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(self.cell_volume) * np.linalg.norm(u))

    def sobolev_norm(self, u: np.ndarray, order: float) -> float:
        """Spectral H^order norm, (sum_k (1+|k|^2)^order |u_hat_k|^2)^(1/2).

        Coefficients are normalised so that order 0 coincides with the L2
        norm; negative orders are allowed.
        """
        if not np.all(np.isfinite(u)):
            raise DomainError("sobolev_norm requires finite input values")
        coeff = self.fft(u) / self.points ** self.dimension
        weight = (1.0 + self.k_squared) ** order
        total = np.sum(weight * np.abs(coeff) ** 2) * self.box ** self.dimension
        return float(np.sqrt(total))

    def h1_seminorm(self, u: np.ndarray) -> float:
        """|grad u| in L2, with the same derivative convention as gradient()."""
        coeff = self.fft(u) / self.points ** self.dimension
        total = np.sum(self.kd_squared * np.abs(coeff) ** 2) * self.box ** self.dimension
        return float(np.sqrt(total))

    def __repr__(self) -> str:  # pragma: no cover
        return f"TorusGrid(n={self.dimension}, N={self.points}, L={self.box:g})"


@functools.lru_cache(maxsize=64)
def get_grid(dimension: int, points: int, box: float) -> TorusGrid:
    """Memoised grid factory; grids are immutable after construction."""
    return TorusGrid(dimension, points, box)


def save_flat(values: np.ndarray, path) -> None:
    """Write a grid snapshot as raw little-endian 64-bit reals, row-major.

    Complex fields are stored as interleaved (re, im) pairs, i.e. the memory
    layout of little-endian complex128.
    """
    arr = np.ascontiguousarray(values)
    if np.iscomplexobj(arr):
        arr = arr.astype("<c16")
    else:
        arr = arr.astype("<f8")
    arr.tofile(path)


def save_csv(values: np.ndarray, path) -> None:
    """Write a grid snapshot as CSV, one row per leading-axis slice."""
    flat = values.reshape(values.shape[0], -1)
    if np.iscomplexobj(flat):
        flat = np.column_stack([flat.real, flat.imag])
    np.savetxt(path, flat, delimiter=",")
