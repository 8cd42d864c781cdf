"""Gravity-gradient compensation: wave-vector shifts that null the phase's
dependence on the initial position and velocity, and their laser settings.

The phase gradient with respect to ``(r0, v0)`` is affine in the four shifts
``(dx2, dz2, dx3, dz3)``, so a Newton iteration converges in one or two
steps.  Residuals are expressed per unit ``k_eff``, i.e. ``alpha/k_eff``
(dimensionless) and ``beta/k_eff`` (seconds, read in units of 1 s).
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .dynamics import FrameModel, ModelViolationError, PulseSequence, phase_gradient

SPEED_OF_LIGHT = 299_792_458.0

SOLVER_TOL = 1e-12
FD_STEP = 1e-9
MAX_ITER = 50

SWEEP_COLUMNS = ("chi", "dx2", "dz2", "dx3", "dz3", "theta2", "theta3", "df2", "df3")


class ConvergenceError(RuntimeError):
    """Newton iteration did not meet the residual tolerance."""

    def __init__(self, message: str, residual: np.ndarray, shifts: np.ndarray, chi: float | None = None):
        super().__init__(message)
        self.residual = residual
        self.shifts = shifts
        self.chi = chi


@dataclass(frozen=True)
class CompensationShifts:
    dx2: float
    dz2: float
    dx3: float
    dz3: float
    chi0: float = 0.0
    converged: bool = False
    residual_alpha: tuple = (math.nan, math.nan, math.nan)
    residual_beta: tuple = (math.nan, math.nan, math.nan)
    iterations: int = 0

    def as_array(self) -> np.ndarray:
        return np.array([self.dx2, self.dz2, self.dx3, self.dz3])

    def apply(self, pulses: PulseSequence) -> PulseSequence:
        return pulses.with_shifts(self.as_array())


@dataclass(frozen=True)
class LaserSettings:
    theta_2: float
    theta_3: float
    delta_f_2: float
    delta_f_3: float


def first_order_shifts(gamma: float, T: float, omega_orbit: float, chi: float) -> np.ndarray:
    """Shifts to first order in ``gamma T^2`` for an inertial circular orbit.

    Returns ``(dx2, dz2, dx3, dz3)``.  The third-pulse terms are the
    consistent first-order solution of the nulling conditions, ``-/+ gamma
    T^3 Omega / 4``; see :func:`first_order_shifts_tabulated` for the
    coefficients as commonly tabulated.
    """
    g2 = gamma * T**2
    g3w = gamma * T**3 * omega_orbit
    s2, c2 = math.sin(2 * chi), math.cos(2 * chi)
    return np.array(
        [
            0.375 * g2 * s2 + 0.625 * g3w * c2,
            0.125 * g2 * (1.0 + 3.0 * c2) - 0.625 * g3w * s2,
            -0.25 * g3w * c2,
            0.25 * g3w * s2,
        ]
    )


def first_order_shifts_tabulated(gamma: float, T: float, omega_orbit: float, chi: float) -> np.ndarray:
    """Same expansion with third-pulse coefficients ``+/- 1/2`` as tabulated in the literature."""
    out = first_order_shifts(gamma, T, omega_orbit, chi)
    g3w = gamma * T**3 * omega_orbit
    out[2] = 0.5 * g3w * math.cos(2 * chi)
    out[3] = -0.5 * g3w * math.sin(2 * chi)
    return out


def _seed(frame: FrameModel, pulses: PulseSequence) -> np.ndarray:
    circular_inertial = (
        frame.orbit is not None
        and frame.static_gradient is None
        and not any(frame.spin_omega_s)
    )
    if not circular_inertial:
        return np.zeros(4)
    orb = frame.orbit
    return first_order_shifts(orb.gamma * frame.gradient_scale, pulses.T, orb.omega_orbit, frame.chi0)


def normalized_gradient(frame: FrameModel, pulses: PulseSequence) -> np.ndarray:
    """``(alpha, beta) / k_eff`` as a 6-vector (dimensionless, seconds)."""
    return phase_gradient(frame, pulses) / pulses.k_eff


def _residual(frame: FrameModel, pulses: PulseSequence, shifts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    g = normalized_gradient(frame, pulses.with_shifts(shifts))
    return g[[0, 2, 3, 5]], g


def solve_shifts(
    frame: FrameModel,
    pulses: PulseSequence,
    tol: float = SOLVER_TOL,
    max_iter: int = MAX_ITER,
    seed: Sequence[float] | None = None,
) -> CompensationShifts:
    """Shifts that make the phase independent of the initial kinematics.

    Newton iteration on ``F = (alpha_x, alpha_z, beta_x, beta_z) / k_eff``
    with a central-difference Jacobian, seeded by :func:`first_order_shifts`
    for inertial orbits.  Converged means ``max |F| <= tol``.

    Raises
    ------
    ModelViolationError
        if ``alpha_y`` or ``beta_y`` do not vanish (out-of-plane dynamics).
    ConvergenceError
        if ``max_iter`` steps do not reach ``tol``.
    """
    x = np.array(seed, dtype=float) if seed is not None else _seed(frame, pulses)
    f, full = _residual(frame, pulses, x)
    it = 0
    while np.max(np.abs(f)) > tol and it < max_iter:
        jac = np.empty((4, 4))
        for j in range(4):
            e = np.zeros(4)
            e[j] = FD_STEP
            jac[:, j] = (_residual(frame, pulses, x + e)[0] - _residual(frame, pulses, x - e)[0]) / (2 * FD_STEP)
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular Jacobian: {exc}", f, x, frame.chi0) from exc
        x = x + step
        f, full = _residual(frame, pulses, x)
        it += 1

    if max(abs(full[1]), abs(full[4])) > tol:
        raise ModelViolationError(
            f"y coefficients do not vanish (alpha_y/k = {full[1]:.3e}, beta_y/k = {full[4]:.3e} s); "
            "the configuration has out-of-plane dynamics that in-plane shifts cannot compensate"
        )
    if np.max(np.abs(f)) > tol:
        raise ConvergenceError(
            f"no convergence after {it} iterations, residual {np.max(np.abs(f)):.3e}", f, x, frame.chi0
        )
    k = pulses.k_eff
    return CompensationShifts(
        *(float(v) for v in x),
        chi0=frame.chi0,
        converged=True,
        residual_alpha=tuple(float(v) for v in k * full[:3]),
        residual_beta=tuple(float(v) for v in k * full[3:]),
        iterations=it,
    )


def _solve_at(args) -> CompensationShifts:
    frame, pulses, chi = args
    try:
        return solve_shifts(replace(frame, chi0=chi), pulses)
    except (ConvergenceError, ModelViolationError) as exc:
        exc.chi = chi
        exc.args = (f"chi = {chi!r}: {exc.args[0]}",) + exc.args[1:]
        raise


def shifts_sweep(
    frame: FrameModel, pulses: PulseSequence, chi_grid: Iterable[float], workers: int | None = None
) -> list[CompensationShifts]:
    """Solve the compensation shifts at every orbital angle of ``chi_grid``.

    With ``workers > 1`` the grid is split across processes; the output order
    always follows the grid.  Solver errors carry the failing angle in
    ``exc.chi``.
    """
    chis = [float(c) for c in chi_grid]
    for c in chis:
        if not 0.0 <= c < 2 * math.pi:
            raise ValueError(f"chi grid must lie in [0, 2*pi), got {c}")
    jobs = [(frame, pulses, c) for c in chis]
    if workers and workers > 1 and len(chis) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_solve_at, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [_solve_at(j) for j in jobs]


def chi_grid(steps: int) -> np.ndarray:
    if steps < 1:
        raise ValueError("chi grid needs at least one point")
    return 2 * math.pi * np.arange(steps) / steps


def shifts_to_laser(shifts: CompensationShifts, k_eff: float) -> LaserSettings:
    """Laser tilt and frequency offset realising the shifts of pulses 2 and 3.

    Frequency offsets use ``c k_eff / (8 pi)``: two-photon transitions with
    second-order diffraction, ``k_eff = 4 k_L``.
    """
    f_scale = SPEED_OF_LIGHT * k_eff / (8 * math.pi)
    out = []
    for dx, dz in ((shifts.dx2, shifts.dz2), (shifts.dx3, shifts.dz3)):
        if not 1.0 + dz > 0.0:
            raise ValueError(f"degenerate shift 1 + dz = {1.0 + dz} <= 0")
        # hypot(dx, 1+dz) - 1 without cancellation
        rho_m1 = (dx * dx + dz * (2.0 + dz)) / (math.hypot(dx, 1.0 + dz) + 1.0)
        out.append((math.atan(dx / (1.0 + dz)), f_scale * rho_m1))
    (t2, f2), (t3, f3) = out
    return LaserSettings(theta_2=t2, theta_3=t3, delta_f_2=f2, delta_f_3=f3)


def laser_to_shifts(settings: LaserSettings, k_eff: float, chi0: float = 0.0) -> CompensationShifts:
    """Inverse of :func:`shifts_to_laser` (tilts within +-pi/2)."""
    f_scale = SPEED_OF_LIGHT * k_eff / (8 * math.pi)
    vals = []
    for theta, df in ((settings.theta_2, settings.delta_f_2), (settings.theta_3, settings.delta_f_3)):
        u = df / f_scale  # rho - 1
        # rho cos(theta) - 1 = u cos(theta) - 2 sin^2(theta/2)
        dz = u * math.cos(theta) - 2.0 * math.sin(0.5 * theta) ** 2
        vals += [(1.0 + u) * math.sin(theta), dz]
    return CompensationShifts(vals[0], vals[1], vals[2], vals[3], chi0=chi0)


def sweep_rows(results: Sequence[CompensationShifts], k_eff: float) -> list[tuple[float, ...]]:
    rows = []
    for s in results:
        ls = shifts_to_laser(s, k_eff)
        rows.append((s.chi0, s.dx2, s.dz2, s.dx3, s.dz3, ls.theta_2, ls.theta_3, ls.delta_f_2, ls.delta_f_3))
    return rows


def format_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """CSV text with a header row; floats at 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def sweep_csv(results: Sequence[CompensationShifts], k_eff: float) -> str:
    return format_csv(SWEEP_COLUMNS, sweep_rows(results, k_eff))
