"""Atom trajectories in the satellite frame and the Mach-Zehnder phase.

Equations of motion follow from the quadratic Lagrangian

    L/m = |r' + W x r|^2 / 2 + a(t).r + r.G(t).r / 2

with ``W`` the frame rotation rate (spin plus residual rotation) and ``G`` the
gravity-gradient tensor:

    r'' = G(t) r - 2 W x r' - W x (W x r) + a(t).

Being linear, the flow over any interval is an affine map
``x(t1) = Phi x(t0) + p``.  :func:`transfer_map` integrates the deviation
``Phi - F`` from free flight ``F = [[I, dt I], [0, I]]`` together with ``p``
using an adaptive 8th-order Runge-Kutta scheme.  Working with the deviation
keeps the interferometer coefficients, which cancel to O(1e-4) of their
free-flight parts, accurate to near machine precision.
"""

from __future__ import annotations

import functools
import itertools
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp

from .orbitgrav import OrbitModel, TENSOR_MODELS, gradient_tensor, rotation_matrix, rotation_y

Vec3 = tuple[float, float, float]
AccelSpec = Union[Vec3, Callable[[float], Sequence[float]]]

PROPAGATION_RTOL = 1e-12
LINEARITY_RTOL = 1e-10
_ATOL = 1e-24
_ZHAT = np.array([0.0, 0.0, 1.0])


class PropagationError(RuntimeError):
    """The integrator could not advance (step-size underflow or non-finite state)."""


class ModelViolationError(ValueError):
    """An input falls outside the linear/in-plane model the engine assumes."""


def _vec3(v) -> Vec3:
    a = tuple(float(x) for x in v)
    if len(a) != 3:
        raise ValueError(f"expected a 3-vector, got {v!r}")
    return a  # type: ignore[return-value]


def _cross_matrix(w) -> np.ndarray:
    wx, wy, wz = w
    return np.array([[0.0, -wz, wy], [wz, 0.0, -wx], [-wy, wx, 0.0]])


def _axis_angle(w: np.ndarray, t: float) -> np.ndarray:
    """Rotation matrix exp([w]x t) (Rodrigues)."""
    norm = float(np.linalg.norm(w))
    if norm == 0.0:
        return np.eye(3)
    k = _cross_matrix(w / norm)
    th = norm * t
    return np.eye(3) + math.sin(th) * k + (1.0 - math.cos(th)) * (k @ k)


@dataclass(frozen=True)
class FrameModel:
    """Satellite frame seen by the atoms.

    The gradient comes from ``static_gradient`` when given (a fixed 3x3
    tensor, e.g. a ground laboratory), otherwise from ``orbit`` evaluated at
    ``chi0 + omega_orbit * t`` with ``tensor_model``.  A spinning frame
    (``spin_omega_s``) also sees the tensor counter-rotate; residual
    rotations enter only through the inertial forces.  ``gradient_scale``
    multiplies the tensor and is how gradient-knowledge errors are injected.
    """

    orbit: OrbitModel | None = None
    chi0: float = 0.0
    residual_rotation: Vec3 = (0.0, 0.0, 0.0)
    spin_omega_s: Vec3 = (0.0, 0.0, 0.0)
    linear_accel: AccelSpec = (0.0, 0.0, 0.0)
    tensor_model: str = "circular"
    static_gradient: tuple | None = None
    gradient_scale: float = 1.0
    _rotation: np.ndarray = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        set_ = functools.partial(object.__setattr__, self)
        set_("residual_rotation", _vec3(self.residual_rotation))
        set_("spin_omega_s", _vec3(self.spin_omega_s))
        if not callable(self.linear_accel):
            set_("linear_accel", _vec3(self.linear_accel))
        if self.static_gradient is not None:
            m = np.asarray(self.static_gradient, dtype=float).reshape(3, 3)
            if not np.allclose(m, m.T, rtol=0.0, atol=1e-15 * max(1.0, np.abs(m).max())):
                raise ValueError("static_gradient must be symmetric")
            set_("static_gradient", tuple(tuple(row) for row in m))
        if self.tensor_model not in TENSOR_MODELS:
            raise ValueError(f"tensor_model must be one of {TENSOR_MODELS}")
        w = np.array(self.spin_omega_s) + np.array(self.residual_rotation)
        set_("_rotation", w)

    @property
    def rotation_rate(self) -> np.ndarray:
        return self._rotation.copy()

    @property
    def is_free(self) -> bool:
        """No gradient, rotation or linear acceleration anywhere."""
        no_grad = (self.orbit is None and self.static_gradient is None) or self.gradient_scale == 0.0
        no_acc = (not callable(self.linear_accel)) and not any(self.linear_accel)
        return no_grad and no_acc and not self._rotation.any()

    def gradient(self, t: float) -> np.ndarray:
        if self.static_gradient is not None:
            g = np.array(self.static_gradient)
        elif self.orbit is not None:
            chi = self.chi0 + self.orbit.omega_orbit * t
            g = gradient_tensor(self.orbit, chi, self.tensor_model).matrix()
            spin = np.array(self.spin_omega_s)
            if spin.any():
                r = _axis_angle(spin, t)
                g = r.T @ g @ r
        else:
            return np.zeros((3, 3))
        return self.gradient_scale * g

    def acceleration(self, t: float) -> np.ndarray:
        if callable(self.linear_accel):
            return np.asarray(self.linear_accel(t), dtype=float).reshape(3)
        return np.array(self.linear_accel)

    def coupling(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Position and velocity coupling matrices ``(M, C)`` of ``r'' = M r + C r' + a``."""
        w = _cross_matrix(self._rotation)
        return self.gradient(t) - w @ w, -2.0 * w


@dataclass(frozen=True)
class KinematicState:
    position: Vec3
    velocity: Vec3
    epoch: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position))
        object.__setattr__(self, "velocity", _vec3(self.velocity))
        if not all(math.isfinite(x) for x in self.position + self.velocity + (self.epoch,)):
            raise ValueError("kinematic state must be finite")

    def vector(self) -> np.ndarray:
        return np.array(self.position + self.velocity)


@dataclass(frozen=True)
class TransferMap:
    """Affine flow ``x1 = (F(dt) + deviation) x0 + forced`` over one interval."""

    dt: float
    deviation: np.ndarray
    forced: np.ndarray

    def matrix(self) -> np.ndarray:
        f = np.eye(6)
        f[:3, 3:] = self.dt * np.eye(3)
        return f + self.deviation

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        free = np.concatenate([x[:3] + self.dt * x[3:], x[3:]])
        return free + (self.deviation @ x + self.forced)


def _integrate_map(frame: FrameModel, t0: float, t1: float, rtol: float) -> TransferMap:
    dt = t1 - t0
    if frame.is_free or dt == 0.0:
        return TransferMap(dt, np.zeros((6, 6)), np.zeros(6))

    out = np.empty((6, 7))

    def rhs(t, y):
        yy = y.reshape(6, 7)
        m, c = frame.coupling(t)
        s = t - t0
        out[:3] = yy[3:]
        out[3:] = m @ yy[:3] + c @ yy[3:]
        out[3:, :3] += m
        out[3:, 3:6] += s * m + c
        out[3:, 6] += frame.acceleration(t)
        return out.ravel().copy()

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        sol = solve_ivp(rhs, (t0, t1), np.zeros(42), method="DOP853", rtol=rtol, atol=_ATOL)
    if sol.status != 0:
        raise PropagationError(f"propagation failed on [{t0}, {t1}]: {sol.message}")
    y = sol.y[:, -1].reshape(6, 7)
    if not np.all(np.isfinite(y)):
        raise PropagationError(f"non-finite state on [{t0}, {t1}]")
    dev, forced = y[:, :6].copy(), y[:, 6].copy()
    dev.setflags(write=False)
    forced.setflags(write=False)
    return TransferMap(dt, dev, forced)


@functools.lru_cache(maxsize=65536)
def _cached_map(frame: FrameModel, t0: float, t1: float, rtol: float) -> TransferMap:
    return _integrate_map(frame, t0, t1, rtol)


def transfer_map(frame: FrameModel, t0: float, t1: float, rtol: float = PROPAGATION_RTOL) -> TransferMap:
    """Flow map of the frame's equations of motion from ``t0`` to ``t1``.

    Maps are memoised per (frame, interval): every quantity the compensation
    solver and the budget need is linear algebra on a handful of maps.
    """
    try:
        return _cached_map(frame, float(t0), float(t1), rtol)
    except TypeError:  # unhashable user callable
        return _integrate_map(frame, float(t0), float(t1), rtol)


def clear_map_cache() -> None:
    _cached_map.cache_clear()


def propagate(frame: FrameModel, state: KinematicState, t_end: float) -> KinematicState:
    """Classical free fall from ``state`` to ``t_end`` (either direction)."""
    tm = transfer_map(frame, state.epoch, t_end)
    x = tm.apply(state.vector())
    return KinematicState(tuple(x[:3]), tuple(x[3:]), float(t_end))


@dataclass(frozen=True)
class PulseSequence:
    """Three-pulse Mach-Zehnder sequence with compensation shifts.

    Pulse ``j`` carries ``k_eff * (dx_j, 0, 1 + dz_j)``; pulse 1 is unshifted.
    ``recoil_velocity`` is hbar*k_eff/m of the species.
    """

    k_eff: float
    T: float
    dx2: float = 0.0
    dz2: float = 0.0
    dx3: float = 0.0
    dz3: float = 0.0
    recoil_velocity: float = 0.0

    def __post_init__(self):
        if self.k_eff <= 0.0 or self.T <= 0.0:
            raise ValueError("k_eff and T must be positive")
        big = max(abs(self.dx2), abs(self.dz2), abs(self.dx3), abs(self.dz3))
        if big > 1e-2:
            warnings.warn(
                f"compensation shift {big:.3g} is outside the perturbative regime",
                stacklevel=3,
            )

    @property
    def shifts(self) -> np.ndarray:
        return np.array([self.dx2, self.dz2, self.dx3, self.dz3])

    def with_shifts(self, shifts) -> "PulseSequence":
        dx2, dz2, dx3, dz3 = (float(s) for s in shifts)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return replace(self, dx2=dx2, dz2=dz2, dx3=dx3, dz3=dz3)

    def relative_wave_vectors(self) -> np.ndarray:
        """Rows ``k_j / k_eff - z_hat``."""
        return np.array(
            [[0.0, 0.0, 0.0], [self.dx2, 0.0, self.dz2], [self.dx3, 0.0, self.dz3]]
        )

    def wave_vectors(self) -> np.ndarray:
        return self.k_eff * (self.relative_wave_vectors() + _ZHAT)


@dataclass(frozen=True)
class PhaseDecomposition:
    phi_indep: float
    alpha: Vec3
    beta: Vec3

    def phase(self, r0, v0) -> float:
        return self.phi_indep + float(np.dot(self.alpha, r0)) + float(np.dot(self.beta, v0))


def _segment_maps(frame: FrameModel, pulses: PulseSequence, epoch: float = 0.0):
    t = pulses.T
    return transfer_map(frame, epoch, epoch + t), transfer_map(frame, epoch + t, epoch + 2 * t)


def mz_phase(frame: FrameModel, pulses: PulseSequence, initial: KinematicState) -> float:
    """Semi-classical Mach-Zehnder phase for one initial condition.

    Pulses act at ``initial.epoch + (0, T, 2T)``.  The upper branch takes the
    first recoil kick, is kicked back at the mirror pulse, and the lower branch
    receives the mirror kick; phases are read at the branch midpoints.
    """
    m1, m2 = _segment_maps(frame, pulses, initial.epoch)
    k = pulses.wave_vectors()
    kick = pulses.recoil_velocity / pulses.k_eff
    x0 = initial.vector()

    upper = x0.copy()
    upper[3:] += kick * k[0]
    lower = x0.copy()
    upper, lower = m1.apply(upper), m1.apply(lower)
    mid_t = 0.5 * (upper[:3] + lower[:3])
    upper[3:] -= kick * k[1]
    lower[3:] += kick * k[1]
    upper, lower = m2.apply(upper), m2.apply(lower)
    mid_2t = 0.5 * (upper[:3] + lower[:3])

    return float(k[0] @ x0[:3] - 2.0 * (k[1] @ mid_t) + k[2] @ mid_2t)


def phase_gradient(frame: FrameModel, pulses: PulseSequence, epoch: float = 0.0) -> np.ndarray:
    """Gradient of the phase with respect to ``(r0, v0)`` (6 entries, rad/m and rad s/m).

    Assembled from the segment maps.  The free-flight parts of the three pulse
    contributions cancel identically and are combined analytically, so the
    result carries the full relative accuracy of the map deviations.
    """
    m1, m2 = _segment_maps(frame, pulses, epoch)
    t = pulses.T
    d = pulses.relative_wave_vectors()
    kh = d + _ZHAT  # k_j / k_eff

    f_t = np.eye(6)
    f_t[:3, 3:] = t * np.eye(3)
    # Phi2 Phi1 - F(2T)
    xi = f_t @ m1.deviation + m2.deviation @ f_t + m2.deviation @ m1.deviation

    grad_r = (-2.0 * d[1] + d[2]) - 2.0 * kh[1] @ m1.deviation[:3, :3] + kh[2] @ xi[:3, :3]
    grad_v = 2.0 * t * (d[2] - d[1]) - 2.0 * kh[1] @ m1.deviation[:3, 3:] + kh[2] @ xi[:3, 3:]
    return pulses.k_eff * np.concatenate([grad_r, grad_v])


def phase_decomposition(
    frame: FrameModel,
    pulses: PulseSequence,
    check: bool = True,
    rng: np.random.Generator | None = None,
) -> PhaseDecomposition:
    """Split the phase into ``phi_indep + alpha.r0 + beta.v0``.

    The coefficients are exact for the quadratic Lagrangian.  With ``check``
    the decomposition is validated against :func:`mz_phase` at the origin, at
    unit offsets along all six coordinates and at a random point.

    Raises
    ------
    ModelViolationError
        if any evaluated phase departs from the affine reconstruction by more
        than 1e-10 of the phase scale ``k_eff * (|r0| + T |v0|)``.
    """
    grad = phase_gradient(frame, pulses)
    origin = KinematicState((0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
    phi0 = mz_phase(frame, pulses, origin)
    dec = PhaseDecomposition(phi0, tuple(grad[:3]), tuple(grad[3:]))
    if check:
        rng = rng or np.random.default_rng(0x5EED)
        points = list(np.eye(6)) + [rng.uniform(-1.0, 1.0, 6)]
        for x in points:
            st = KinematicState(tuple(x[:3]), tuple(x[3:]))
            phi = mz_phase(frame, pulses, st)
            recon = dec.phase(x[:3], x[3:])
            scale = pulses.k_eff * (np.abs(x[:3]).sum() + pulses.T * np.abs(x[3:]).sum()) + abs(phi0)
            if abs(phi - recon) > LINEARITY_RTOL * scale:
                raise ModelViolationError(
                    f"phase is not affine in the initial conditions: "
                    f"|phi - reconstruction| = {abs(phi - recon):.3e} rad at {x}"
                )
    return dec


def residual_rotation_deviation(
    gradient0: np.ndarray, omega_orbit: float, delta_omega, duration: float, samples: int = 41
) -> float:
    """Largest relative change of the rotated tensor caused by residual rotations.

    Compares ``D_p^T G D_p`` against the orbital-only ``D^T G D`` for every
    ordering ``D_p`` of the three small residual rotations and the orbital
    rotation, over ``t`` in ``[0, duration]``.  The result is the maximum
    component deviation divided by the largest tensor component.
    """
    g = np.asarray(gradient0, dtype=float)
    dw = _vec3(delta_omega)
    scale = float(np.abs(g).max())
    worst = 0.0
    for t in np.linspace(0.0, duration, samples):
        d_orb = rotation_y(-omega_orbit * t)
        ref = d_orb.T @ g @ d_orb
        rots = [rotation_matrix(i, dw[i] * t) for i in range(3)] + [d_orb]
        for order in itertools.permutations(range(4)):
            dp = np.eye(3)
            for i in order:
                dp = dp @ rots[i]
            dev = np.abs(dp.T @ g @ dp - ref).max()
            worst = max(worst, dev / scale)
    return worst
