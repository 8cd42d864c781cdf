"""Signal demodulation at the modulation frequency and shot-noise statistics.

The differential acceleration is modelled as

    da(t) = A cos(W t) + C + sum_k B_k cos(k W t)

with ``A = eta g0`` the violation amplitude.  Demodulation multiplies by
``cos(W t)`` and averages with weight ``2/tau``; the violation moves to DC
while the other terms integrate down as ``1/tau``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class SignalModel:
    violation_amp: float
    const_term: float = 0.0
    harmonics: tuple = ()
    omega_m: float = 1.0

    def __post_init__(self):
        h = tuple((int(k), float(a)) for k, a in self.harmonics)
        keys = [k for k, _ in h]
        if any(k < 1 for k in keys) or len(set(keys)) != len(keys):
            raise ValueError("harmonics must be keyed by distinct positive integers")
        if self.omega_m <= 0.0:
            raise ValueError("omega_m must be positive")
        object.__setattr__(self, "harmonics", h)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        w = self.omega_m
        out = self.violation_amp * np.cos(w * t) + self.const_term
        for k, a in self.harmonics:
            out = out + a * np.cos(k * w * t)
        return out

    def first_harmonic(self) -> float:
        return dict(self.harmonics).get(1, 0.0)


def _sinc_ratio(x):
    """``sin(x)/x`` with the removable singularity filled."""
    x = np.asarray(x, dtype=float)
    return np.sinc(x / np.pi)


def demodulate_continuous(signal: SignalModel, tau):
    """Exact value of ``(2/tau) * integral_0^tau da(t) cos(W t) dt``.

    Accepts scalar or array ``tau``.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0.0):
        raise ValueError("tau must be positive")
    w = signal.omega_m
    in_phase = signal.violation_amp + signal.first_harmonic()
    out = in_phase * (1.0 + _sinc_ratio(2 * w * tau))
    out = out + 2.0 * signal.const_term * _sinc_ratio(w * tau)
    for k, b in signal.harmonics:
        if k == 1:
            continue
        out = out + b * (_sinc_ratio((k - 1) * w * tau) + _sinc_ratio((k + 1) * w * tau))
    return out if out.ndim else float(out)


def demodulation_bound(signal: SignalModel, tau):
    """Worst-case magnitude of :func:`demodulate_continuous` for any ``tau``.

    The in-phase part is kept at its full value; all other terms are bounded
    by ``2/(tau W)`` times ``|A + B_1|/2 + |C| + (4/3) sum_{k>=2} |B_k|``.
    """
    tau = np.asarray(tau, dtype=float)
    in_phase = abs(signal.violation_amp + signal.first_harmonic())
    rest = sum(abs(b) for k, b in signal.harmonics if k >= 2)
    out = in_phase + 2.0 / (tau * signal.omega_m) * (0.5 * in_phase + abs(signal.const_term) + 4.0 / 3.0 * rest)
    return out if out.ndim else float(out)


def demodulate_discrete(samples: Sequence[tuple[float, float]], omega_m: float, rtol: float = 1e-9) -> float:
    """``(2/n) sum_m a_m cos(W t_m)`` for uniformly spaced samples ``(t_m, a_m)``."""
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise ValueError("no samples to demodulate")
    arr = arr.reshape(-1, 2)
    t, a = arr[:, 0], arr[:, 1]
    if len(t) > 2:
        dt = np.diff(t)
        if np.max(np.abs(dt - dt.mean())) > rtol * abs(dt.mean()):
            raise ValueError("samples must be uniformly spaced")
    return float(2.0 / len(t) * np.sum(a * np.cos(omega_m * t)))


def cumulative_demodulation(values, omega_m: float, cycle_time: float) -> np.ndarray:
    """Discrete demodulation after every sample: entry ``n-1`` is ``delta a(n)``.

    ``values[m-1]`` is the signal at ``t = m * cycle_time``.
    """
    v = np.asarray(values, dtype=float)
    m = np.arange(1, len(v) + 1)
    weighted = v * np.cos(omega_m * cycle_time * m)
    return 2.0 * np.cumsum(weighted) / m


@dataclass(frozen=True)
class SpeciesNoise:
    k_eff: float
    T: float
    atoms: float = 1e6
    contrast: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.contrast <= 1.0:
            raise ValueError(f"contrast must lie in (0, 1], got {self.contrast}")
        if self.atoms <= 0.0:
            raise ValueError("atom number must be positive")
        if self.k_eff <= 0.0 or self.T <= 0.0:
            raise ValueError("k_eff and T must be positive")

    def single_shot(self) -> float:
        return 1.0 / (self.contrast * self.k_eff * self.T**2 * math.sqrt(self.atoms))


@dataclass(frozen=True)
class NoiseModel:
    """Two-species shot-noise model; ``sigma_single_shot`` is filled if omitted."""

    species_a: SpeciesNoise
    species_b: SpeciesNoise
    cycle_time: float = 10.0
    sigma_single_shot: float | None = field(default=None)

    def __post_init__(self):
        if self.cycle_time <= 0.0:
            raise ValueError("cycle time must be positive")
        sigma = math.hypot(self.species_a.single_shot(), self.species_b.single_shot())
        if self.sigma_single_shot is None:
            object.__setattr__(self, "sigma_single_shot", sigma)
        elif abs(self.sigma_single_shot - sigma) > 1e-12 * sigma:
            raise ValueError(
                f"stored sigma {self.sigma_single_shot!r} disagrees with the shot-noise formula ({sigma!r})"
            )


def shot_noise_sigma(noise: NoiseModel) -> float:
    """Single-shot differential-acceleration noise, quadrature sum over species (m/s^2)."""
    return math.hypot(noise.species_a.single_shot(), noise.species_b.single_shot())


def cos2_sum(n, x: float):
    """``sum_{m=1}^n cos^2(m x)`` in closed form (vectorised in ``n``)."""
    n = np.asarray(n, dtype=float)
    s = math.sin(x)
    if abs(s) < 1e-12:
        out = n * math.cos(x) ** 2
    else:
        out = 0.5 * n + np.sin(n * x) * np.cos((n + 1) * x) / (2.0 * s)
    return out if out.ndim else float(out)


def sigma_eta(noise: NoiseModel, g0: float, n, omega: float | None = None, mode: str = "exact"):
    """Statistical uncertainty of the Eotvos parameter after ``n`` cycles.

    ``mode="exact"`` uses the least-squares covariance of the modulated fit,
    ``sigma / g0 / sqrt(sum cos^2(W m Tc))``; ``mode="asymptotic"`` its
    many-sample limit ``sigma sqrt(2) / (g0 sqrt(n))``.  ``omega`` is the
    modulation frequency, required in exact mode.
    """
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr < 1):
        raise ValueError("n must be at least 1")
    sigma = noise.sigma_single_shot
    if mode == "asymptotic":
        out = sigma * math.sqrt(2.0) / (g0 * np.sqrt(n_arr))
    elif mode == "exact":
        if omega is None:
            raise ValueError("exact mode needs the modulation frequency")
        out = sigma / g0 / np.sqrt(cos2_sum(n_arr, omega * noise.cycle_time))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return out if np.ndim(out) else float(out)
