"""Phase-invariant nonlinearities: power law and Hartree (Poisson) coupling.

Both admissible kinds factor as g(psi) = W(psi) * psi with a real local
potential W that depends on |psi| only, which is what makes the exact
split-step phase update of the solvers unitary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError
from .magschrod import WaveField

KINDS = ("none", "power", "hartree")


@dataclass(frozen=True)
class NonlinearitySpec:
    """Choice of g: none, power mu*|psi|^(2*sigma)*psi, or hartree V[psi]*psi."""

    kind: str = "none"
    sigma: float = 0.0
    mu: float = 0.0
    coupling: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "power" and self.sigma < 0:
            raise ConfigurationError("power exponent sigma must be >= 0")

    @classmethod
    def none(cls) -> "NonlinearitySpec":
        return cls(kind="none")

    @classmethod
    def power(cls, sigma: float, mu: float) -> "NonlinearitySpec":
        return cls(kind="power", sigma=float(sigma), mu=float(mu))

    @classmethod
    def hartree(cls, coupling: float = 1.0) -> "NonlinearitySpec":
        return cls(kind="hartree", coupling=float(coupling))

    def validate(self, dimension: int, sobolev_order: int) -> None:
        """Reject combinations outside the admissible (n, q) ranges."""
        if self.kind == "hartree" and dimension != 3:
            raise ConfigurationError(
                "the Hartree nonlinearity requires dimension n = 3")
        if (self.kind == "power" and dimension > 1 and sobolev_order == 2
                and self.sigma < 0.5):
            raise ConfigurationError(
                "power nonlinearity with n > 1 and q = 2 requires sigma >= 1/2")

    @property
    def conserves_charge(self) -> bool:
        """True when Im(g(psi) conj(psi)) = 0, i.e. W is real."""
        return self.kind != "power" or self.mu == np.real(self.mu)


def _hartree_complex(density: np.ndarray, box: float) -> np.ndarray:
    """Periodic Coulomb solve before discarding the rounding-level imag part.

    V_hat(k) = 4*pi*rho_hat(k)/|k|^2 for k != 0, V_hat(0) = 0 (neutralising
    zero-mode convention on the torus).
    """
    from .torus import get_grid

    grid = get_grid(3, density.shape[0], box)
    rho_hat = grid.fft(density)
    with np.errstate(divide="ignore", invalid="ignore"):
        multiplier = 4.0 * np.pi / grid.k_squared
    multiplier[(0,) * 3] = 0.0
    return grid.ifft(multiplier * rho_hat)


def hartree_potential(psi: WaveField) -> np.ndarray:
    """Poisson potential of the density |psi|^2 on the periodic box."""
    if psi.values.ndim != 3:
        raise ConfigurationError("hartree_potential requires dimension n = 3")
    density = np.abs(psi.values) ** 2
    return _hartree_complex(density, psi.box).real


def local_potential(psi: WaveField, spec: NonlinearitySpec) -> np.ndarray:
    """Real grid W with g(psi) = W * psi; zero for kind 'none'."""
    if spec.kind == "none":
        return np.zeros(psi.values.shape)
    if spec.kind == "power":
        return spec.mu * np.abs(psi.values) ** (2.0 * spec.sigma)
    return spec.coupling * hartree_potential(psi)


def apply_g(psi: WaveField, spec: NonlinearitySpec) -> WaveField:
    """Evaluate the nonlinearity pointwise on the grid."""
    return WaveField(local_potential(psi, spec) * psi.values, psi.box)


def lipschitz_probe(psi1: WaveField, psi2: WaveField, spec: NonlinearitySpec,
                    order: int) -> float:
    """|g(psi1) - g(psi2)|_{H^order} / |psi1 - psi2|_{H^order}."""
    diff = psi1.values - psi2.values
    denom = psi1.grid.sobolev_norm(diff, order)
    if denom == 0.0:
        raise DomainError("lipschitz_probe is undefined for identical inputs")
    num = psi1.grid.sobolev_norm(
        apply_g(psi1, spec).values - apply_g(psi2, spec).values, order)
    return float(num / denom)
