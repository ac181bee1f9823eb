"""Flat quotient manifolds handled through their universal cover R^d.

Every supported space is R^d modulo a group of deck transformations of the
form ``x -> J^f(x) + t`` where ``J`` negates the second coordinate and ``t``
is an integer translation.  Points are always stored lifted; the helpers
here enumerate orbit images, find nearest images and map lifted states back
to the fundamental domain for reporting.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class Kind(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    FLAT_TORUS = "flat_torus"
    MOBIUS_STRIP = "mobius_strip"
    KLEIN_BOTTLE = "klein_bottle"


_FLIPPING = (Kind.MOBIUS_STRIP, Kind.KLEIN_BOTTLE)


@dataclass(frozen=True)
class ManifoldSpec:
    kind: Kind
    dimension: int

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dimension!r}")
        object.__setattr__(self, "dimension", int(self.dimension))
        if self.kind in _FLIPPING and self.dimension != 2:
            raise ValueError(f"{self.kind.value} is two-dimensional, got dimension {self.dimension}")

    @classmethod
    def euclidean(cls, d: int) -> ManifoldSpec:
        return cls(Kind.EUCLIDEAN, d)

    @classmethod
    def torus(cls, d: int) -> ManifoldSpec:
        return cls(Kind.FLAT_TORUS, d)

    @classmethod
    def mobius(cls) -> ManifoldSpec:
        return cls(Kind.MOBIUS_STRIP, 2)

    @classmethod
    def klein(cls) -> ManifoldSpec:
        return cls(Kind.KLEIN_BOTTLE, 2)

    @property
    def lattice_rank(self) -> int:
        """Rank of the translation lattice of the deck group."""
        if self.kind is Kind.EUCLIDEAN:
            return 0
        if self.kind is Kind.FLAT_TORUS:
            return self.dimension
        if self.kind is Kind.MOBIUS_STRIP:
            return 1
        return 2

    @property
    def lattice_axes(self) -> tuple[int, ...]:
        """Coordinate axes along which deck translations act."""
        return tuple(range(self.lattice_rank))

    @property
    def flips(self) -> tuple[int, ...]:
        return (0, 1) if self.kind in _FLIPPING else (0,)

    def __str__(self):
        if self.kind in (Kind.EUCLIDEAN, Kind.FLAT_TORUS):
            return f"{self.kind.value}[{self.dimension}]"
        return self.kind.value


@dataclass(frozen=True, order=True)
class DeckElement:
    """The deck transformation ``x -> J^flip(x) + translation``."""

    flip: int
    translation: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "translation", tuple(int(t) for t in self.translation))
        if self.flip not in (0, 1):
            raise ValueError(f"flip parity must be 0 or 1, got {self.flip!r}")

    @classmethod
    def identity(cls, manifold: ManifoldSpec) -> DeckElement:
        return cls(0, (0,) * manifold.dimension)


def check_element(manifold: ManifoldSpec, g: DeckElement) -> None:
    """Raise ``ValueError`` unless ``g`` belongs to the deck group of ``manifold``."""
    t = g.translation
    if len(t) != manifold.dimension:
        raise ValueError(f"translation {t} has length {len(t)}, expected {manifold.dimension}")
    if manifold.kind is Kind.EUCLIDEAN:
        if g.flip or any(t):
            raise ValueError("the Euclidean space only has the identity deck element")
    elif manifold.kind is Kind.FLAT_TORUS:
        if g.flip:
            raise ValueError("flat torus deck elements cannot flip")
    else:
        if manifold.kind is Kind.MOBIUS_STRIP and t[1] != 0:
            raise ValueError(f"Mobius strip translations are (n, 0), got {t}")
        if g.flip != t[0] % 2:
            raise ValueError(f"flip parity must equal the first translation mod 2, got {g}")


def flip_vector(v, flip: int = 1) -> np.ndarray:
    """Apply ``J^flip`` to a vector or to the rows of an array."""
    out = np.array(v, dtype=float)
    if flip:
        out[..., 1] = -out[..., 1]
    return out


def apply_deck(manifold: ManifoldSpec, g: DeckElement, x) -> np.ndarray:
    check_element(manifold, g)
    return flip_vector(x, g.flip) + np.asarray(g.translation, dtype=float)


def pushforward(manifold: ManifoldSpec, g: DeckElement, v) -> np.ndarray:
    """Differential of ``g``: translations act trivially on tangent vectors."""
    check_element(manifold, g)
    return flip_vector(v, g.flip)


def compose(manifold: ManifoldSpec, g: DeckElement, h: DeckElement) -> DeckElement:
    """Return ``g o h``."""
    check_element(manifold, g)
    check_element(manifold, h)
    t = flip_vector(h.translation, g.flip) + np.asarray(g.translation)
    return DeckElement((g.flip + h.flip) % 2, tuple(int(round(c)) for c in t))


def inverse(manifold: ManifoldSpec, g: DeckElement) -> DeckElement:
    check_element(manifold, g)
    t = -flip_vector(g.translation, g.flip)
    return DeckElement(g.flip, tuple(int(round(c)) for c in t))


def _class_box(manifold: ManifoldSpec, flip: int, offset: np.ndarray, radius: float) -> np.ndarray:
    """Integer translations of one flip class within ``radius`` (sup norm) of ``offset``."""
    ranges = []
    for axis in range(manifold.dimension):
        if axis in manifold.lattice_axes:
            lo = math.floor(offset[axis] - radius)
            hi = math.ceil(offset[axis] + radius)
            ranges.append(np.arange(lo, hi + 1))
        else:
            ranges.append(np.zeros(1, dtype=int))
    grids = np.meshgrid(*ranges, indexing="ij")
    box = np.stack([g.ravel() for g in grids], axis=-1).astype(np.int64)
    if manifold.kind in _FLIPPING:
        box = box[box[:, 0] % 2 == flip]
    return box


def orbit_arrays(manifold: ManifoldSpec, source, target, radius: float, flip: int | None = None):
    """Vectorised orbit enumeration.

    Returns ``(points, flips, translations, distances)`` for every orbit
    image ``g(target)`` with ``|g(target) - source| <= radius``, sorted by
    distance, then translation, then flip.
    """
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    source = np.asarray(source, dtype=float)
    target = np.asarray(target, dtype=float)
    d = manifold.dimension
    pts, fl, tr = [], [], []
    for f in manifold.flips:
        if flip is not None and f != flip:
            continue
        base = flip_vector(target, f)
        box = _class_box(manifold, f, source - base, radius)
        pts.append(base + box)
        fl.append(np.full(len(box), f, dtype=np.int64))
        tr.append(box)
    points = np.concatenate(pts) if pts else np.empty((0, d))
    flips = np.concatenate(fl) if fl else np.empty(0, dtype=np.int64)
    trans = np.concatenate(tr) if tr else np.empty((0, d), dtype=np.int64)
    dist = np.sqrt(((points - source) ** 2).sum(axis=1))
    keep = dist <= radius
    points, flips, trans, dist = points[keep], flips[keep], trans[keep], dist[keep]
    # lexsort: last key is primary
    keys = [flips] + [trans[:, j] for j in reversed(range(d))] + [dist]
    order = np.lexsort(keys)
    return points[order], flips[order], trans[order], dist[order]


def images_within(manifold: ManifoldSpec, source, target, radius: float) -> list[tuple[np.ndarray, DeckElement]]:
    points, flips, trans, _ = orbit_arrays(manifold, source, target, radius)
    return [(p, DeckElement(int(f), tuple(t))) for p, f, t in zip(points, flips, trans)]


def _nearest_in_class(manifold: ManifoldSpec, flip: int, offset: np.ndarray) -> np.ndarray:
    t = np.zeros(manifold.dimension)
    for axis in manifold.lattice_axes:
        t[axis] = math.floor(offset[axis] + 0.5)
    if manifold.kind in _FLIPPING:
        t[0] = 2 * math.floor((offset[0] - flip) / 2 + 0.5) + flip
    return t


def min_image_distance(manifold: ManifoldSpec, x, y, flip: int | None = None) -> tuple[float, DeckElement]:
    """Smallest distance from ``x`` to the orbit of ``y``, with an achieving element.

    ``flip`` restricts the search to one class of the deck group.  Ties go
    to the lexicographically smallest translation, flip 0 first.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    classes = manifold.flips if flip is None else (flip,)
    if flip not in (None,) + manifold.flips:
        raise ValueError(f"{manifold} has no deck elements with flip {flip}")
    bound = math.inf
    for f in classes:
        base = flip_vector(y, f)
        t = _nearest_in_class(manifold, f, x - base)
        bound = min(bound, float(np.linalg.norm(base + t - x)))
    radius = bound * (1 + 1e-12) + 1e-300
    _, flips, trans, dist = orbit_arrays(manifold, x, y, radius, flip=flip)
    best = dist[0]
    ties = [(tuple(int(c) for c in t), int(f)) for t, f, dd in zip(trans, flips, dist) if dd == best]
    t, f = min(ties)
    return float(best), DeckElement(f, t)


def reduce_points(manifold: ManifoldSpec, X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Map lifted points to the fundamental domain.

    ``X`` has shape ``(..., d)``.  Returns ``(P, flips, translations)`` with
    ``X = J^flips(P) + translations`` row by row.
    """
    X = np.asarray(X, dtype=float)
    P = X.copy()
    trans = np.zeros(X.shape, dtype=float)
    flips = np.zeros(X.shape[:-1], dtype=np.int64)
    if manifold.kind is Kind.EUCLIDEAN:
        return P, flips, trans.astype(np.int64)

    def split(a):
        n = np.floor(a)
        frac = a - n
        # a tiny negative input can round up to exactly 1.0
        wrap = frac >= 1.0
        return np.where(wrap, 0.0, frac), n + wrap

    if manifold.kind is Kind.FLAT_TORUS:
        P, trans = split(X)
        return P, flips, trans.astype(np.int64)

    P[..., 0], n = split(X[..., 0])
    trans[..., 0] = n
    flips = (n.astype(np.int64) % 2)
    odd = flips == 1
    second = np.where(odd, -X[..., 1], X[..., 1])
    if manifold.kind is Kind.MOBIUS_STRIP:
        P[..., 1] = second
    else:
        P[..., 1], m = split(second)
        trans[..., 1] = np.where(odd, -m, m)
    return P, flips, trans.astype(np.int64)


def project_to_fundamental_domain(manifold: ManifoldSpec, x, v) -> tuple[np.ndarray, np.ndarray]:
    """Covering-map image of a lifted state: ``(p(x), Dp(v))``."""
    P, flips, _ = reduce_points(manifold, np.asarray(x, dtype=float)[None, :])
    return P[0], flip_vector(v, int(flips[0]))
