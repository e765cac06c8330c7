"""The logistic approximation to the coupling flow and its two-sided orbit."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import scan
from .errors import DomainError, TruncationError

__all__ = [
    "FlowParams",
    "GbarSequence",
    "f_map",
    "f_prime",
    "f_inverse",
    "build_gbar",
    "step_bounds",
    "default_window",
]


@dataclass(frozen=True)
class FlowParams:
    """Data of ``f(x) = L^eps x - L^(2 eps) a x^2``.

    ``a0`` is the ``eps -> 0`` limit of the quadratic coefficient; it only
    enters the small-eps constants in :mod:`crossover.bounds` and defaults
    to ``a``.
    """

    L: int
    eps: float
    a: float
    a0: float | None = None

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 2:
            raise DomainError(f"L must be an integer >= 2, got {self.L!r}")
        if not (1.0 < self.L**self.eps < 2.0):
            raise DomainError(f"need 1 < L^eps < 2, got L={self.L}, eps={self.eps}")
        if not self.a > 0:
            raise DomainError(f"a must be positive, got {self.a!r}")
        if self.a0 is not None and not self.a0 > 0:
            raise DomainError(f"a0 must be positive, got {self.a0!r}")

    @property
    def Le(self) -> float:
        return float(self.L) ** self.eps

    @property
    def c(self) -> float:
        """Quadratic coefficient ``L^(2 eps) a``."""
        return self.Le**2 * self.a

    @property
    def gbar_star(self) -> float:
        return (self.Le - 1.0) / self.c

    @property
    def a_limit(self) -> float:
        return self.a if self.a0 is None else self.a0

    @property
    def slope(self) -> float:
        """Limit of ``gbar_star / eps`` as ``eps -> 0``."""
        return math.log(self.L) / self.a_limit

    @property
    def mu_rate(self) -> float:
        """``L^(-(3 + eps)/2)``, the contraction of the backward mass sum."""
        return float(self.L) ** (-(3.0 + self.eps) / 2.0)


def _check_x(x, fp, name="x"):
    x = np.asarray(x, dtype=float)
    gs = fp.gbar_star
    if np.any(x < 0) or np.any(x > gs * (1 + 1e-15)):
        raise DomainError(f"{name} must lie in [0, gbar_star={gs:.6g}]")
    return x


def f_map(x, fp: FlowParams):
    x = _check_x(x, fp)
    out = fp.Le * x - fp.c * x * x
    return out if out.ndim else float(out)


def f_prime(x, fp: FlowParams):
    x = _check_x(x, fp)
    out = fp.Le - 2.0 * fp.c * x
    return out if out.ndim else float(out)


def f_inverse(y, fp: FlowParams):
    """Smaller root of ``f(x) = y``, in the cancellation-free form."""
    y = _check_x(y, fp, "y")
    disc = fp.Le**2 - 4.0 * fp.c * y
    if np.any(disc < 0):
        raise DomainError("negative discriminant in f_inverse; parameters are inconsistent")
    out = 2.0 * y / (fp.Le + np.sqrt(disc))
    return out if out.ndim else float(out)


def default_window(fp: FlowParams) -> int:
    """``ceil(40 / (eps log L))``: both tails reach their geometric regime."""
    return int(math.ceil(40.0 / (fp.eps * math.log(fp.L))))


@dataclass(frozen=True)
class GbarSequence:
    """Values of the two-sided orbit on ``n = -n_minus .. n_plus``."""

    omega0: float
    n_minus: int
    n_plus: int
    values: np.ndarray
    fp: FlowParams

    @property
    def ns(self) -> np.ndarray:
        return np.arange(-self.n_minus, self.n_plus + 1)

    def at(self, n):
        n = np.asarray(n)
        if np.any(n < -self.n_minus) or np.any(n > self.n_plus):
            raise DomainError(f"index outside stored window [-{self.n_minus}, {self.n_plus}]; use step_bounds")
        return self.values[n + self.n_minus]

    @property
    def window(self):
        return (self.n_minus, self.n_plus)

    def __len__(self):
        return len(self.values)


def build_gbar(omega0: float, window, fp: FlowParams) -> GbarSequence:
    """Orbit with ``gbar_0 = omega0 * gbar_star`` on the given window.

    ``window`` is an int (symmetric) or a pair ``(n_minus, n_plus)``.
    """
    if not (0.0 < omega0 < 1.0):
        raise DomainError(f"omega0 must lie in (0, 1), got {omega0!r}")
    n_minus, n_plus = (window, window) if np.isscalar(window) else window
    n_minus, n_plus = int(n_minus), int(n_plus)
    if n_minus < 0 or n_plus < 0:
        raise DomainError("window sizes must be nonnegative")
    g0 = omega0 * fp.gbar_star
    fwd = scan.logistic_orbit(fp.Le, fp.c, g0, n_plus)
    back = np.empty(n_minus + 1)
    back[0] = g0
    y = g0
    Le2, c4 = fp.Le**2, 4.0 * fp.c
    for k in range(1, n_minus + 1):
        y = 2.0 * y / (fp.Le + math.sqrt(Le2 - c4 * y))
        back[k] = y
    if n_minus and not back[-1] > 1e-300:
        raise TruncationError(
            "backward orbit underflows; shrink the window",
            diagnostics={"n_minus": n_minus, "last": float(back[-1])},
        )
    values = np.concatenate([back[:0:-1], fwd])
    return GbarSequence(float(omega0), n_minus, n_plus, values, fp)


def step_bounds(n: int, gs: GbarSequence):
    """Closed-form lower and upper bounds on ``gbar_n``.

    Valid for every integer ``n``, including outside the stored window.
    """
    fp, w0 = gs.fp, gs.omega0
    gstar, Le = fp.gbar_star, fp.Le
    if n >= 0:
        lo = gstar * (1.0 - (1.0 - w0) * (1.0 + w0 - Le * w0) ** n)
        hi = gstar * (1.0 - (1.0 - w0) * (2.0 - Le) ** n)
    else:
        lo = gstar * w0 * Le**n
        rho = 2.0 / (Le + math.sqrt(Le * Le - 4.0 * w0 * (Le - 1.0)))
        hi = gstar * w0 * rho ** (-n)
    return lo, hi
