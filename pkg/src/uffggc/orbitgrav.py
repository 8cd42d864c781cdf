"""Orbit geometry and the local gravity-gradient tensor in the satellite frame.

The orbit lies in the x-z plane of the satellite frame and the orbital
position is parametrised by the angle ``chi`` (``chi = 0`` puts the satellite
on the z axis, at perigee for elliptic orbits).  All quantities are SI,
angles are radians.

Sign convention for ``gamma``: the tidal scale ``2 GM / R0**3`` is positive.
An :class:`OrbitModel` may carry ``gamma_sign = -1`` to reproduce mission
tables that quote a negative gradient; every tensor produced from that orbit
then flips sign consistently.  This is the only place the sign is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EARTH_GM = 3.986004418e14  # m^3/s^2 (WGS-84)
EARTH_RADIUS = 6.378137e6  # m, equatorial (WGS-84)

TWO_PI = 2.0 * math.pi

TENSOR_MODELS = ("circular", "exact", "first_order")
COMPONENTS = ("xx", "yy", "zz", "xz")


def wrap_phase(chi: float) -> float:
    """Wrap an orbital angle onto [0, 2*pi)."""
    w = math.fmod(chi, TWO_PI)
    if w < 0.0:
        w += TWO_PI
    # fmod of a tiny negative number can round up to exactly 2*pi
    return 0.0 if w >= TWO_PI else w


@dataclass(frozen=True)
class OrbitModel:
    """Keplerian orbit with perigee radius ``earth_radius + altitude``."""

    altitude: float
    ellipticity: float = 0.0
    earth_gm: float = EARTH_GM
    earth_radius: float = EARTH_RADIUS
    gamma_sign: int = 1

    def __post_init__(self):
        if not 0.0 <= self.ellipticity < 1.0:
            raise ValueError(f"ellipticity must lie in [0, 1), got {self.ellipticity}")
        if self.earth_radius + self.altitude <= 0.0:
            raise ValueError("perigee radius must be positive")
        if self.earth_gm <= 0.0:
            raise ValueError("earth_gm must be positive")
        if self.gamma_sign not in (1, -1):
            raise ValueError("gamma_sign must be +1 or -1")

    @property
    def r0(self) -> float:
        return self.earth_radius + self.altitude

    @property
    def gamma_magnitude(self) -> float:
        return 2.0 * self.earth_gm / self.r0**3

    @property
    def gamma(self) -> float:
        """Signed tidal scale used to build the tensors (s^-2)."""
        return self.gamma_sign * self.gamma_magnitude

    @property
    def g0(self) -> float:
        return self.earth_gm / self.r0**2

    @property
    def omega_orbit(self) -> float:
        return math.sqrt(self.earth_gm / self.r0**3)

    @property
    def period(self) -> float:
        return TWO_PI / self.omega_orbit


@dataclass(frozen=True)
class GradientTensor:
    """Symmetric in-plane gradient tensor; ``xy`` and ``yz`` vanish."""

    xx: float
    yy: float
    zz: float
    xz: float

    @property
    def trace(self) -> float:
        return self.xx + self.yy + self.zz

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.xx, 0.0, self.xz], [0.0, self.yy, 0.0], [self.xz, 0.0, self.zz]]
        )

    @classmethod
    def from_matrix(cls, m) -> "GradientTensor":
        m = np.asarray(m, dtype=float)
        scale = max(float(np.max(np.abs(m))), np.finfo(float).tiny)
        if max(abs(m[0, 1]), abs(m[1, 2]), abs(m[1, 0]), abs(m[2, 1])) > 1e-12 * scale:
            raise ValueError("tensor has out-of-plane (xy/yz) components")
        return cls(float(m[0, 0]), float(m[1, 1]), float(m[2, 2]), 0.5 * float(m[0, 2] + m[2, 0]))

    def component(self, name: str) -> float:
        if name not in COMPONENTS:
            raise ValueError(f"unknown component {name!r}")
        return getattr(self, name)


def _circular(g: float, chi: float) -> GradientTensor:
    c2, s2 = math.cos(2.0 * chi), math.sin(2.0 * chi)
    return GradientTensor(
        xx=0.25 * g * (1.0 - 3.0 * c2),
        yy=-0.5 * g,
        zz=0.25 * g * (1.0 + 3.0 * c2),
        xz=0.75 * g * s2,
    )


def gradient_tensor_circular(orbit: OrbitModel, chi: float) -> GradientTensor:
    return _circular(orbit.gamma, chi)


def _elliptic_exact(g: float, e: float, chi: float) -> GradientTensor:
    # Newtonian tensor 3GM R_i R_j / R^5 - GM/R^3 delta_ij on the ellipse
    # R = a (sqrt(1-e^2) sin chi, 0, cos chi - e), perigee a(1-e) = R0.
    c, s = math.cos(chi), math.sin(chi)
    q = 1.0 - e * c
    pref = g * (1.0 - e) ** 3 / (2.0 * q**5)
    x = math.sqrt(1.0 - e * e) * s
    z = c - e
    xx = pref * (3.0 * x * x - q * q)
    zz = pref * (3.0 * z * z - q * q)
    xz = pref * 3.0 * x * z
    return GradientTensor(xx=xx, yy=-(xx + zz), zz=zz, xz=xz)


def _elliptic_first_order(g: float, e: float, chi: float) -> GradientTensor:
    circ = _circular(g, chi)
    c1, c2, c3 = math.cos(chi), math.cos(2 * chi), math.cos(3 * chi)
    s1, s2, s3 = math.sin(chi), math.sin(2 * chi), math.sin(3 * chi)
    k = 0.375 * g * e
    xx = circ.xx + k * (-2.0 + c1 + 6.0 * c2 - 5.0 * c3)
    zz = circ.zz + k * (-2.0 + 3.0 * c1 - 6.0 * c2 + 5.0 * c3)
    xz = circ.xz + k * (s1 - 6.0 * s2 + 5.0 * s3)
    return GradientTensor(xx=xx, yy=-(xx + zz), zz=zz, xz=xz)


def gradient_tensor_elliptic(orbit: OrbitModel, chi: float, mode: str = "exact") -> GradientTensor:
    """Gradient tensor on an elliptic orbit.

    ``mode="exact"`` evaluates the closed-form Newtonian tensor;
    ``mode="first_order"`` the circular tensor plus its O(e) correction.
    ``yy`` is completed from tracelessness in both modes.
    """
    e = orbit.ellipticity
    if not 0.0 <= e < 1.0:
        raise ValueError("elliptic tensor requires 0 <= e < 1")
    if mode == "exact":
        return _elliptic_exact(orbit.gamma, e, chi)
    if mode == "first_order":
        return _elliptic_first_order(orbit.gamma, e, chi)
    raise ValueError(f"unknown elliptic mode {mode!r}")


def gradient_tensor(orbit: OrbitModel, chi: float, model: str = "circular") -> GradientTensor:
    """Dispatch on ``model`` (one of :data:`TENSOR_MODELS`)."""
    if model == "circular":
        return gradient_tensor_circular(orbit, chi)
    return gradient_tensor_elliptic(orbit, chi, mode=model)


def rotation_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_matrix(axis: int, angle: float) -> np.ndarray:
    """Right-handed rotation about coordinate axis 0, 1 or 2."""
    c, s = math.cos(angle), math.sin(angle)
    i, j = [(1, 2), (2, 0), (0, 1)][axis]
    m = np.eye(3)
    m[i, i] = c
    m[j, j] = c
    m[i, j] = -s
    m[j, i] = s
    return m


def rotate_tensor(t: GradientTensor, angle: float) -> GradientTensor:
    """Similarity transform ``D t D^T`` with ``D`` the rotation about y."""
    d = rotation_y(angle)
    return GradientTensor.from_matrix(d @ t.matrix() @ d.T)


def gradient_tensor_at_time(
    orbit: OrbitModel, chi0: float, t: float, model: str = "circular"
) -> GradientTensor:
    """Tensor at time ``t`` after starting at ``chi0``.

    The orbital angle advances at the mean rate, ``chi = chi0 + omega_orbit*t``,
    also for elliptic models (an O(e) approximation of the true anomaly).
    """
    return gradient_tensor(orbit, chi0 + orbit.omega_orbit * t, model)


def _first_order_harmonics(g: float, e: float, component: str) -> dict[int, tuple[float, float]]:
    # (cos, sin) coefficients per harmonic of chi
    k = 0.375 * g * e
    if component == "zz":
        return {0: (0.25 * g - 2 * k, 0.0), 1: (3 * k, 0.0), 2: (0.75 * g - 6 * k, 0.0), 3: (5 * k, 0.0)}
    if component == "xx":
        return {0: (0.25 * g - 2 * k, 0.0), 1: (k, 0.0), 2: (-0.75 * g + 6 * k, 0.0), 3: (-5 * k, 0.0)}
    if component == "yy":
        return {0: (-0.5 * g + 4 * k, 0.0), 1: (-4 * k, 0.0), 2: (0.0, 0.0), 3: (0.0, 0.0)}
    if component == "xz":
        return {0: (0.0, 0.0), 1: (0.0, k), 2: (0.0, 0.75 * g - 6 * k), 3: (0.0, 5 * k)}
    raise ValueError(f"unknown component {component!r}")


def tensor_spectrum(orbit: OrbitModel, component: str, e: float | None = None) -> list[tuple[int, float]]:
    """Harmonic amplitudes (k = 0..3 of the orbital frequency) of one component.

    Uses the first-order-in-``e`` model; ``e`` defaults to the orbit's
    ellipticity.  Amplitudes are non-negative magnitudes of the combined
    cosine and sine coefficients.
    """
    if e is None:
        e = orbit.ellipticity
    coeffs = _first_order_harmonics(orbit.gamma, e, component)
    return [(k, math.hypot(*coeffs[k])) for k in range(4)]
