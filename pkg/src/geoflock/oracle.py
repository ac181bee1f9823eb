"""Brute-force reference sums and kernel reports, kept apart from the fast paths."""

from __future__ import annotations

import math

import numpy as np

from .kernels import Kernel, check_summability
from .manifolds import Kind, ManifoldSpec


def oracle_phi(manifold: ManifoldSpec, kernel: Kernel, x, y, window: int) -> float:
    """Sum ``phi(|x - g(y)|)`` over every deck element with translation entries in ``[-window, window]``."""
    if window < 1:
        raise ValueError(f"window must be at least 1, got {window}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = manifold.dimension
    if manifold.kind is Kind.EUCLIDEAN:
        return float(kernel(np.linalg.norm(x - y)))
    span = np.arange(-window, window + 1)
    # n runs over axis 0 and, except on the Mobius strip, m over axis 1
    if manifold.kind is Kind.FLAT_TORUS:
        axes = [span] * d
    elif manifold.kind is Kind.MOBIUS_STRIP:
        axes = [span, np.zeros(1, dtype=int)]
    else:
        axes = [span, span]
    grid = np.array(np.meshgrid(*axes, indexing="ij")).reshape(d, -1).T.astype(float)
    images = np.repeat(y[None, :], len(grid), axis=0)
    if manifold.kind in (Kind.MOBIUS_STRIP, Kind.KLEIN_BOTTLE):
        odd = grid[:, 0].astype(int) % 2 == 1
        images[odd, 1] = -images[odd, 1]
    images += grid
    dist = np.sqrt(((images - x) ** 2).sum(axis=1))
    return math.fsum(kernel(dist).tolist())


def lower_bound_distance(manifold: ManifoldSpec, strip_half_width: float = 1.0) -> float | None:
    """Largest possible nearest-geodesic length between two points (per class on the Mobius strip)."""
    if manifold.kind is Kind.FLAT_TORUS:
        return math.sqrt(manifold.dimension) / 2
    if manifold.kind is Kind.KLEIN_BOTTLE:
        return math.sqrt(5.0) / 2
    if manifold.kind is Kind.MOBIUS_STRIP:
        return math.sqrt(1.0 + 4.0 * strip_half_width**2)
    return None


def validate_kernel(kernel: Kernel, manifold: ManifoldSpec, strip_half_width: float = 1.0) -> dict:
    rank = manifold.lattice_rank
    if rank == 0:
        summable, integral = True, None
    else:
        summable, integral = check_summability(kernel, rank)
    dist = lower_bound_distance(manifold, strip_half_width)
    report = {
        "kernel": kernel.to_dict(),
        "manifold": str(manifold),
        "rank": rank,
        "summable": summable,
        "integral": integral,
        "lower_bound_distance": dist,
        "lower_bound_weight": None if dist is None else float(kernel(dist)),
    }
    if not summable:
        report["reason"] = kernel.requirement(rank)
    return report


def format_report(report: dict) -> str:
    lines = [
        f"kernel     {report['kernel']['family']} {report['kernel']['params']}",
        f"manifold   {report['manifold']} (lattice rank {report['rank']})",
        f"summable   {'yes' if report['summable'] else 'no'}",
    ]
    if report["integral"] is not None:
        lines.append(f"integral   {report['integral']:.12g}")
    if not report["summable"]:
        lines.append(f"reason     {report['reason']}")
    if report["lower_bound_weight"] is not None:
        lines.append(f"phi({report['lower_bound_distance']:.9g}) = {report['lower_bound_weight']:.12g}")
    return "\n".join(lines)
