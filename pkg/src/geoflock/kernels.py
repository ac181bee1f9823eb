"""Communication functions and certified lattice sums over deck orbits.

A kernel ``phi`` weights one geodesic by its length.  The interaction
weight between two points is the sum of ``phi`` over every geodesic joining
them, i.e. over the whole deck orbit in the cover.  That sum is infinite, so
it is truncated at a radius chosen from an analytic upper bound on the
discarded tail.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import ClassVar, NamedTuple

import numpy as np
from scipy import special

from .manifolds import ManifoldSpec, flip_vector, orbit_arrays, reduce_points


class SummabilityError(ValueError):
    """The kernel's orbit sums diverge on the requested lattice."""


class Summability(NamedTuple):
    summable: bool
    integral: float | None


class PhiValue(NamedTuple):
    value: float
    error_bound: float


class Kernel(abc.ABC):
    family: ClassVar[str]

    @abc.abstractmethod
    def __call__(self, r):
        """Vectorised ``phi(r)`` for ``r >= 0`` (no argument checking)."""

    @abc.abstractmethod
    def radial_moment(self, d: int) -> float | None:
        """``int_0^inf r^(d-1) phi(r) dr``, or ``None`` when it diverges."""

    @abc.abstractmethod
    def tail_integral(self, d: int, shift: float, lower: float) -> float:
        """Upper bound on ``int_lower^inf r^(d-1) phi(r - shift) dr`` for ``lower >= shift``."""

    @abc.abstractmethod
    def params(self) -> dict:
        ...

    def requirement(self, d: int) -> str:
        return ""

    def to_dict(self) -> dict:
        return {"family": self.family, "params": self.params()}


@dataclass(frozen=True)
class Exponential(Kernel):
    """``phi(r) = exp(-rate * r)``."""

    rate: float = 1.0
    family: ClassVar[str] = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"exponential rate must be positive, got {self.rate}")

    def __call__(self, r):
        return np.exp(-self.rate * np.asarray(r, dtype=float))

    def radial_moment(self, d):
        return math.factorial(d - 1) / self.rate**d

    def tail_integral(self, d, shift, lower):
        # int_lower^inf r^n e^{-lam (r - shift)} dr, n = d - 1, in closed form
        lam, n = self.rate, d - 1
        acc = 0.0
        for j in range(n + 1):
            acc += math.factorial(n) / math.factorial(n - j) * lower ** (n - j) / lam ** (j + 1)
        return math.exp(-lam * (lower - shift)) * acc

    def params(self):
        return {"rate": self.rate}


@dataclass(frozen=True)
class PowerLaw(Kernel):
    """``phi(r) = (1 + r^2)^(-alpha)``."""

    alpha: float
    family: ClassVar[str] = "power_law"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"power-law exponent must be positive, got {self.alpha}")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        q = 1.0 + r * r
        if self.alpha == 2:
            return 1.0 / (q * q)
        if self.alpha == 1:
            return 1.0 / q
        return q ** (-self.alpha)

    def radial_moment(self, d):
        if self.alpha <= d / 2:
            return None
        return 0.5 * special.beta(d / 2, self.alpha - d / 2)

    def tail_integral(self, d, shift, lower):
        if self.alpha <= d / 2:
            return math.inf
        # substitute u = r - shift; bound (1 + u^2)^-alpha by 1 on [u0, 1]
        # and by u^(-2 alpha) beyond
        b, u0 = shift, lower - shift
        total = 0.0
        if u0 < 1.0:
            total += ((1.0 + b) ** d - (u0 + b) ** d) / d
            u0 = 1.0
        for j in range(d):
            p = d - 1 - j
            total += math.comb(d - 1, j) * b**j * u0 ** (p + 1 - 2 * self.alpha) / (2 * self.alpha - p - 1)
        return total

    def params(self):
        return {"alpha": self.alpha}

    def requirement(self, d):
        return f"power law needs alpha > d/2 = {d / 2:g}, got alpha = {self.alpha:g}"


@dataclass(frozen=True)
class CompactPolynomial(Kernel):
    """``phi(r) = sum_j c_j (1 - r/A)^j`` on ``[0, A]`` and zero beyond.

    ``coefficients[j - 1]`` multiplies the ``j``-th power, so ``phi(A) = 0``
    and the kernel is continuous.  The profile must be non-increasing.
    """

    support: float
    coefficients: tuple[float, ...] = (0.0, 1.0)
    family: ClassVar[str] = "compact_polynomial"

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if not self.support > 0:
            raise ValueError(f"support radius must be positive, got {self.support}")
        if not self.coefficients or sum(self.coefficients) <= 0:
            raise ValueError("compact profile must be positive at r = 0")
        if not _nonnegative_on_unit_interval(self._slope_poly()):
            raise ValueError(f"compact profile {self.coefficients} is not non-increasing on [0, A]")

    def _slope_poly(self) -> np.ndarray:
        # -A dphi/dr as a polynomial in s = 1 - r/A, lowest power first
        return np.array([(j + 1) * c for j, c in enumerate(self.coefficients)])

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        s = np.clip(1.0 - r / self.support, 0.0, None)
        out = np.zeros_like(s)
        for c in reversed(self.coefficients):
            out = (out + c) * s
        return out

    def radial_moment(self, d):
        A = self.support
        return A**d * sum(
            c * math.factorial(d - 1) * math.factorial(j) / math.factorial(d + j)
            for j, c in enumerate(self.coefficients, start=1)
        )

    def tail_integral(self, d, shift, lower):
        top = self.support + shift
        if lower >= top:
            return 0.0
        return float(self(0.0)) * (top**d - lower**d) / d

    def params(self):
        return {"support": self.support, "coefficients": list(self.coefficients)}


def _nonnegative_on_unit_interval(coeffs: np.ndarray) -> bool:
    if np.all(coeffs >= 0):
        return True
    poly = np.polynomial.Polynomial(coeffs)
    candidates = [0.0, 1.0]
    for root in poly.deriv().roots():
        if abs(root.imag) < 1e-12 and 0.0 <= root.real <= 1.0:
            candidates.append(root.real)
    samples = np.concatenate([candidates, np.linspace(0.0, 1.0, 2001)])
    return bool(np.all(poly(samples) >= -1e-12))


FAMILIES = {k.family: k for k in (Exponential, PowerLaw, CompactPolynomial)}


def kernel_from_dict(data: dict) -> Kernel:
    family = data.get("family")
    if family not in FAMILIES:
        raise ValueError(f"unknown kernel family {family!r}; expected one of {sorted(FAMILIES)}")
    params = dict(data.get("params") or {})
    if "coefficients" in params:
        params["coefficients"] = tuple(params["coefficients"])
    try:
        return FAMILIES[family](**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {family} kernel: {exc}") from None


def evaluate(kernel: Kernel, r: float) -> float:
    if r < 0:
        raise ValueError(f"kernel argument must be non-negative, got {r}")
    return float(kernel(r))


def check_summability(kernel: Kernel, d: int) -> Summability:
    """Decide whether ``int_0^inf r^(d-1) phi(r) dr`` is finite, and its value."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    moment = kernel.radial_moment(d)
    return Summability(moment is not None, moment)


def surface_measure(d: int) -> float:
    """Hausdorff measure of the unit sphere in R^d (2 points when d = 1)."""
    return d * math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def require_summable(manifold: ManifoldSpec, kernel: Kernel) -> None:
    rank = manifold.lattice_rank
    if rank and not check_summability(kernel, rank).summable:
        raise SummabilityError(
            f"{kernel.family} kernel is not summable on {manifold}: "
            f"int_0^inf r^{rank - 1} phi(r) dr diverges ({kernel.requirement(rank)})"
        )


def tail_bound(manifold: ManifoldSpec, kernel: Kernel, anchor_offset: float, R: float) -> float:
    """Upper bound on the orbit terms whose translation has norm above ``R``.

    ``anchor_offset`` must bound ``|x - J^f y|`` over the flip classes, so an
    orbit term with translation ``t`` sits at distance at least ``|t| - anchor``.
    Each lattice point is charged to the unit cell around it, which turns the
    lattice sum into a radial integral of the (monotone) kernel.
    """
    if R < 0:
        raise ValueError(f"R must be non-negative, got {R}")
    require_summable(manifold, kernel)
    k = manifold.lattice_rank
    if k == 0:
        return 0.0
    a = float(anchor_offset)
    if isinstance(kernel, CompactPolynomial) and R >= a + kernel.support:
        return 0.0
    h = math.sqrt(k) / 2
    shift = a + h
    r0 = max(R - h, 0.0)
    total = 0.0
    if r0 < shift:
        total += float(kernel(0.0)) * (shift**k - r0**k) / k
        r0 = shift
    total += kernel.tail_integral(k, shift, r0)
    return surface_measure(k) * total


@lru_cache(maxsize=4096)
def truncation_radius(manifold: ManifoldSpec, kernel: Kernel, anchor_offset: float, eps: float) -> float:
    """Smallest ``R`` (to relative precision 1e-6) with ``tail_bound <= eps``.

    Compactly supported kernels get the radius past which nothing is
    dropped at all, so their sums are exact.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if isinstance(kernel, CompactPolynomial):
        return anchor_offset + kernel.support

    def tail(R):
        return tail_bound(manifold, kernel, anchor_offset, R)

    if tail(0.0) <= eps:
        return 0.0
    hi = 1.0
    while tail(hi) > eps:
        hi *= 2.0
        if hi > 1e9:
            raise ValueError(f"tolerance {eps:g} needs an orbit radius beyond 1e9 for {kernel}")
    lo = hi / 2 if hi > 1.0 else 0.0
    while hi - lo > 1e-6 * hi:
        mid = 0.5 * (lo + hi)
        if tail(mid) <= eps:
            hi = mid
        else:
            lo = mid
    return hi


def anchor_offset(manifold: ManifoldSpec, x, y) -> float:
    """``max_f |x - J^f(y)|``: the orbit offset that tail bounds are taken against."""
    x = np.asarray(x, dtype=float)
    return max(float(np.linalg.norm(x - flip_vector(y, f))) for f in manifold.flips)


def phi_sum(manifold: ManifoldSpec, kernel: Kernel, x, y, eps: float) -> PhiValue:
    """Total weight of all geodesics between ``x`` and ``y``, certified to ``eps``."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    require_summable(manifold, kernel)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if manifold.lattice_rank == 0:
        return PhiValue(evaluate(kernel, float(np.linalg.norm(x - y))), 0.0)
    # the sum only depends on the projections of x and y
    P, _, _ = reduce_points(manifold, np.stack([x, y]))
    x, y = P
    a = anchor_offset(manifold, x, y)
    R = truncation_radius(manifold, kernel, a, eps)
    _, _, _, dist = orbit_arrays(manifold, x, y, R + a)
    value = math.fsum(kernel(dist))
    return PhiValue(value, tail_bound(manifold, kernel, a, R))


def phi_exp_closed_form_1d(delta: float) -> float:
    """Orbit sum of ``exp(-r)`` on the circle for offset ``delta`` in [0, 1)."""
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    return (math.exp(1.0 - delta) + math.exp(delta)) / (math.e - 1.0)
