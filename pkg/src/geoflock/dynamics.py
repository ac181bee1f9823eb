"""Velocity alignment with interactions summed over every geodesic.

The system is integrated on the universal cover.  Particle ``i`` feels every
orbit image ``g(x_k)`` of every particle (itself included) through the
weight ``phi(|x_i - g(x_k)|)`` acting on the transported velocity
``Dg(v_k) - v_i``.  Orbit sums are cut off at a radius whose discarded tail
is certified against ``truncation_eps``; the cutoff is smoothed over a unit
band so the right-hand side stays differentiable in the positions.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .kernels import Kernel, require_summable, tail_bound, truncation_radius
from .manifolds import Kind, ManifoldSpec, flip_vector, reduce_points

TAPER_WIDTH = 1.0
INTEGRATORS = ("rk4", "euler")


class NonFiniteStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class InitialData:
    """Explicit initial state, or the recipe used to sample one."""

    positions: tuple[tuple[float, ...], ...] | None = None
    velocities: tuple[tuple[float, ...], ...] | None = None
    strip_half_width: float = 1.0
    speed_range: float = 1.0


@dataclass(frozen=True)
class Thresholds:
    velocity_diameter: float = 1e-4
    alignment_residual: float = 1e-4
    second_component: float = 1e-4


@dataclass(frozen=True)
class SimConfig:
    manifold: ManifoldSpec
    kernel: Kernel
    coupling: float = 1.0
    n_particles: int = 5
    dt: float = 1e-2
    horizon: float = 10.0
    truncation_eps: float = 1e-6
    integrator: str = "rk4"
    seed: int = 0
    initial: InitialData = field(default_factory=InitialData)
    stride: int = 10
    lanes: int = 1
    thresholds: Thresholds = field(default_factory=Thresholds)
    record_particles: bool = False

    def __post_init__(self):
        if not self.coupling > 0:
            raise ValueError(f"coupling must be positive, got {self.coupling}")
        if self.n_particles < 1:
            raise ValueError(f"need at least one particle, got {self.n_particles}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.horizon >= 0:
            raise ValueError(f"horizon must be non-negative, got {self.horizon}")
        if not self.truncation_eps > 0:
            raise ValueError(f"truncation_eps must be positive, got {self.truncation_eps}")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")
        if self.stride < 1 or self.lanes < 1:
            raise ValueError("stride and lanes must be at least 1")
        init = self.initial
        if init.positions is not None or init.velocities is not None:
            want = (self.n_particles, self.manifold.dimension)
            for name, rows in (("positions", init.positions), ("velocities", init.velocities)):
                if rows is None or np.shape(rows) != want:
                    raise ValueError(f"initial {name} must have shape {want}, got {np.shape(rows)}")
        require_summable(self.manifold, self.kernel)


@dataclass
class ParticleState:
    time: float
    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        self.positions = np.array(self.positions, dtype=float, ndmin=2)
        self.velocities = np.array(self.velocities, dtype=float, ndmin=2)
        if self.positions.shape != self.velocities.shape:
            raise ValueError(f"positions {self.positions.shape} and velocities {self.velocities.shape} differ in shape")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.positions).all() and np.isfinite(self.velocities).all())


@dataclass
class Derivative:
    position_rates: np.ndarray
    velocity_rates: np.ndarray
    error_bound: float


@dataclass
class Interaction:
    """Truncated orbit weights for one state, in the fundamental-domain frame.

    ``weights[f, i, k]`` sums the (tapered) kernel over the flip-``f`` images
    of particle ``k`` seen from particle ``i``.  ``velocities`` are the
    velocities pushed into the frame where every particle sits in the
    fundamental domain; ``frame_flips[i]`` maps particle ``i`` back.
    """

    weights: np.ndarray
    velocities: np.ndarray
    frame_flips: np.ndarray
    cutoff: float
    weight_tail: float

    def transported_differences(self):
        """Per flip class, the array ``J^f(v_k) - v_i`` of shape (N, N, d)."""
        u = self.velocities
        return [flip_vector(u, f)[None, :, :] - u[:, None, :] for f in range(self.weights.shape[0])]


def energy(state: ParticleState) -> float:
    return 0.5 * float(np.sum(state.velocities**2))


def initial_state(config: SimConfig) -> ParticleState:
    init, m, n = config.initial, config.manifold, config.n_particles
    d = m.dimension
    if init.positions is not None:
        return ParticleState(0.0, init.positions, init.velocities)
    rng = np.random.default_rng(config.seed)
    x = rng.uniform(0.0, 1.0, size=(n, d))
    if m.kind is Kind.MOBIUS_STRIP:
        L = init.strip_half_width
        x[:, 1] = rng.uniform(-L, L, size=n)
    v = rng.uniform(-init.speed_range, init.speed_range, size=(n, d))
    return ParticleState(0.0, x, v)


def _anchor_bound(manifold: ManifoldSpec, reduced: np.ndarray) -> float:
    # every pairwise |x_i - J^f x_k| between fundamental-domain points stays below this
    if manifold.kind is Kind.FLAT_TORUS:
        return math.sqrt(manifold.dimension)
    if manifold.kind is Kind.KLEIN_BOTTLE:
        return math.sqrt(5.0)
    spread = 2.0 * float(np.max(np.abs(reduced[:, 1])))
    # coarse grid keeps the cached cutoff stable while particles drift
    return math.ceil(math.hypot(1.0, spread) * 4) / 4


def _weight_budget(config: SimConfig, speed: float) -> float:
    # per-particle force error <= 2 * coupling * speed * (per-pair weight tail)
    budget = config.truncation_eps / (2.0 * speed * max(config.coupling, config.n_particles))
    return 2.0 ** math.floor(math.log2(budget))


@lru_cache(maxsize=64)
def _translation_ball(manifold: ManifoldSpec, radius: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """Deck translations of norm <= radius per flip class, as ``(translations, norms)`` sorted by norm."""
    axes = manifold.lattice_axes
    rng = np.arange(-radius, radius + 1)
    grids = np.meshgrid(*([rng] * len(axes)), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    pts = pts[(pts**2).sum(axis=1) <= radius * radius]
    full = np.zeros((len(pts), manifold.dimension))
    full[:, list(axes)] = pts
    parity = full[:, 0].astype(np.int64) % 2
    out = []
    for f in manifold.flips:
        cls = full if len(manifold.flips) == 1 else full[parity == f]
        norms = np.sqrt((cls**2).sum(axis=1))
        order = np.argsort(norms, kind="stable")
        out.append((cls[order], norms[order]))
    return tuple(out)


def taper(r, cutoff: float, width: float = TAPER_WIDTH):
    """1 below ``cutoff``, 0 beyond ``cutoff + width``, C^3 in between."""
    s = np.clip((np.asarray(r, dtype=float) - cutoff) / width, 0.0, 1.0)
    return 1.0 - s**4 * (35.0 + s * (-84.0 + s * (70.0 - 20.0 * s)))


def _pair_sums(kernel, deltas, trans, inner, cutoff):
    # the first `inner` translations are too short to reach the taper band
    r2 = np.zeros((len(deltas), len(trans)))
    for axis in range(trans.shape[1]):
        c = deltas[:, axis, None] - trans[None, :, axis]
        r2 += c * c
    r = np.sqrt(r2)
    w = kernel(r)
    w[:, inner:] *= taper(r[:, inner:], cutoff)
    return w.sum(axis=1)


@lru_cache(maxsize=64)
def _self_sum(manifold: ManifoldSpec, kernel: Kernel, radius: int, cutoff: float) -> float:
    # flip-0 weight of a particle with itself does not depend on where it is
    trans, norms = _translation_ball(manifold, radius)[0]
    inner = int(np.searchsorted(norms, cutoff, side="right"))
    return float(_pair_sums(kernel, np.zeros((1, manifold.dimension)), trans, inner, cutoff)[0])


def interaction(state: ParticleState, config: SimConfig, speed_bound: float | None = None) -> Interaction:
    """Truncated orbit weights for ``state``.

    ``speed_bound`` must dominate every speed the weights will be applied to;
    it defaults to the largest current speed.  The integrator passes
    ``sqrt(2 E(0))``, which bounds all speeds along a trajectory because the
    energy never increases.
    """
    m, kernel = config.manifold, config.kernel
    n, d = state.positions.shape
    if d != m.dimension:
        raise ValueError(f"state has dimension {d}, manifold {m} has {m.dimension}")
    reduced, frame_flips, _ = reduce_points(m, state.positions)
    u = state.velocities.copy()
    odd = frame_flips == 1
    if odd.any():
        u[odd] = flip_vector(u[odd], 1)
    n_classes = len(m.flips)
    W = np.zeros((n_classes, n, n))

    if m.lattice_rank == 0:
        diff = reduced[:, None, :] - reduced[None, :, :]
        W[0] = kernel(np.sqrt((diff**2).sum(axis=-1)))
        return Interaction(W, u, frame_flips, math.inf, 0.0)

    speed = float(np.max(np.linalg.norm(state.velocities, axis=1))) if speed_bound is None else float(speed_bound)
    speed = max(speed, 1e-300)
    anchor = _anchor_bound(m, reduced)
    R = truncation_radius(m, kernel, anchor, _weight_budget(config, speed))
    cutoff = R + anchor
    radius = math.ceil(cutoff + TAPER_WIDTH + anchor)
    ball = _translation_ball(m, radius)

    for f in m.flips:
        # flip-0 diagonal is a constant; every other class-f pair is summed here
        iu, ku = np.triu_indices(n, k=1 if f == 0 else 0)
        trans, norms = ball[f]
        inner = int(np.searchsorted(norms, cutoff - anchor, side="right"))
        images = flip_vector(reduced, f)
        deltas = reduced[iu] - images[ku]
        lanes = min(config.lanes, len(iu))
        if lanes > 1:
            chunks = np.array_split(np.arange(len(iu)), lanes)
            with ThreadPoolExecutor(lanes) as pool:
                parts = list(pool.map(lambda c: _pair_sums(kernel, deltas[c], trans, inner, cutoff), chunks))
            sums = np.concatenate(parts)
        elif len(iu):
            sums = _pair_sums(kernel, deltas, trans, inner, cutoff)
        else:
            sums = np.zeros(0)
        # the class-f sum is symmetric in (i, k): t <-> -J^f t maps one onto the other
        W[f, iu, ku] = sums
        W[f, ku, iu] = sums
    np.fill_diagonal(W[0], _self_sum(m, kernel, radius, cutoff))
    return Interaction(W, u, frame_flips, cutoff, tail_bound(m, kernel, anchor, R))


def _accelerations(inter: Interaction, config: SimConfig) -> np.ndarray:
    n = inter.velocities.shape[0]
    acc = np.zeros_like(inter.velocities)
    for f, diff in enumerate(inter.transported_differences()):
        acc += np.einsum("ik,ikd->id", inter.weights[f], diff)
    acc *= config.coupling / n
    odd = inter.frame_flips == 1
    if odd.any():
        acc[odd] = flip_vector(acc[odd], 1)
    return acc


def rhs(state: ParticleState, config: SimConfig, speed_bound: float | None = None) -> Derivative:
    inter = interaction(state, config, speed_bound)
    acc = _accelerations(inter, config)
    vmax = float(np.max(np.linalg.norm(state.velocities, axis=1)))
    err = 2.0 * config.coupling * vmax * inter.weight_tail
    return Derivative(state.velocities.copy(), acc, err)


def _advance(state, h, k):
    return ParticleState(state.time + h, state.positions + h * k.position_rates, state.velocities + h * k.velocity_rates)


def step(state: ParticleState, config: SimConfig, speed_bound: float | None = None, dt: float | None = None) -> ParticleState:
    h = config.dt if dt is None else dt
    if config.integrator == "euler":
        k1 = rhs(state, config, speed_bound)
        return _advance(state, h, k1)
    k1 = rhs(state, config, speed_bound)
    k2 = rhs(_advance(state, h / 2, k1), config, speed_bound)
    k3 = rhs(_advance(state, h / 2, k2), config, speed_bound)
    k4 = rhs(_advance(state, h, k3), config, speed_bound)
    x = state.positions + h / 6 * (k1.position_rates + 2 * k2.position_rates + 2 * k3.position_rates + k4.position_rates)
    v = state.velocities + h / 6 * (k1.velocity_rates + 2 * k2.velocity_rates + 2 * k3.velocity_rates + k4.velocity_rates)
    return ParticleState(state.time + h, x, v)


@dataclass
class Trajectory:
    states: list[ParticleState]
    records: list


def integrate(config: SimConfig, observers=(), stride: int | None = None, on_step=None,
              state: ParticleState | None = None) -> Trajectory:
    """Run from t = 0 to the horizon with fixed steps.

    Every ``stride`` steps (and at both ends) the state is recorded, a
    diagnostics record is computed and each observer is called with
    ``(state, record)``.  ``on_step`` sees every state.
    """
    from .diagnostics import record as make_record

    stride = config.stride if stride is None else stride
    state = initial_state(config) if state is None else state
    speed_bound = math.sqrt(2.0 * energy(state))
    n_steps = math.ceil(config.horizon / config.dt - 1e-9) if config.horizon > 0 else 0
    traj = Trajectory([], [])

    def emit(s):
        rec = make_record(s, config, speed_bound)
        traj.states.append(s)
        traj.records.append(rec)
        for obs in observers:
            obs(s, rec)

    emit(state)
    if on_step is not None:
        on_step(state)
    for j in range(1, n_steps + 1):
        t_next = config.horizon if j == n_steps else j * config.dt
        h = config.horizon - state.time if j == n_steps else config.dt
        state = step(state, config, speed_bound, dt=h)
        state.time = t_next
        if not state.is_finite():
            raise NonFiniteStateError(f"non-finite state at step {j} (t = {t_next:g})")
        if on_step is not None:
            on_step(state)
        if j % stride == 0 or j == n_steps:
            emit(state)
    return traj


def self_interaction_log_speed_rate(state: ParticleState, config: SimConfig, speed_bound: float | None = None) -> float:
    """``d/dt log|v|`` of a lone particle, from its closed geodesics."""
    if state.n != 1:
        raise ValueError(f"self-interaction rate needs exactly one particle, got {state.n}")
    speed = float(np.linalg.norm(state.velocities[0]))
    if speed == 0.0:
        raise ValueError("self-interaction rate is undefined for zero velocity")
    inter = interaction(state, config, speed_bound)
    u = inter.velocities[0] / speed
    total = 0.0
    for f in range(1, inter.weights.shape[0]):
        total += inter.weights[f, 0, 0] * float(np.sum((flip_vector(u, f) - u) ** 2))
    return -0.5 * config.coupling * total
