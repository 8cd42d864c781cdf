"""Differential-acceleration uncertainty ledger, demodulated integration curves
and the verification-shot calculator.

Each species converts its phase gradient into an acceleration coefficient by
dividing by its scale factor ``k_eff T^2``.  A co-location offset ``dr``
between the two clouds then produces the differential acceleration
``c . dr`` with ``c`` the mean of the two species' scaled coefficients, and
the ledger propagates parameter uncertainties into ``c`` by central finite
differences at fixed compensation shifts.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np
from scipy import constants

from .compensation import SPEED_OF_LIGHT, format_csv, solve_shifts
from .demod import NoiseModel, SpeciesNoise, cumulative_demodulation, sigma_eta
from .dynamics import FrameModel, PulseSequence, phase_gradient
from .orbitgrav import OrbitModel, wrap_phase

COEFF_LABELS = ("alpha_x", "alpha_y", "alpha_z", "beta_x", "beta_y", "beta_z")
REL_STEP = 1e-6
SHIFT_STEP = 1e-9
MONTH = 2.6298e6  # s, mean Julian month


@dataclass(frozen=True)
class SpeciesParams:
    """Atomic species in a second-order double-diffraction interferometer."""

    name: str
    wavelength: float
    T: float = 20.0
    mass: float = 86.909180527 * constants.atomic_mass
    atoms: float = 1e6
    contrast: float = 1.0

    def __post_init__(self):
        if self.wavelength <= 0.0 or self.T <= 0.0 or self.mass <= 0.0:
            raise ValueError("wavelength, T and mass must be positive")

    @property
    def k_eff(self) -> float:
        return 8.0 * math.pi / self.wavelength

    @property
    def laser_frequency(self) -> float:
        return SPEED_OF_LIGHT / self.wavelength

    @property
    def recoil_velocity(self) -> float:
        return constants.hbar * self.k_eff / self.mass

    @property
    def scale_factor(self) -> float:
        return self.k_eff * self.T**2

    def pulses(self, shifts=None) -> PulseSequence:
        p = PulseSequence(self.k_eff, self.T, recoil_velocity=self.recoil_velocity)
        return p if shifts is None else p.with_shifts(shifts)

    def noise(self) -> SpeciesNoise:
        return SpeciesNoise(self.k_eff, self.T, self.atoms, self.contrast)


RB87 = SpeciesParams("Rb87", 780e-9, mass=86.909180527 * constants.atomic_mass)
K41 = SpeciesParams("K41", 767e-9, mass=40.96182576 * constants.atomic_mass)


def _triple(v) -> tuple[float, float, float]:
    if np.ndim(v) == 0:
        return (float(v),) * 3
    t = tuple(float(x) for x in v)
    if len(t) != 3:
        raise ValueError(f"expected a scalar or 3 values, got {v!r}")
    return t  # type: ignore[return-value]


@dataclass(frozen=True)
class UncertaintyInputs:
    """Co-location offsets, their uncertainties and control uncertainties.

    ``delta_Omega`` applies to each rotation axis.  ``delta_e`` is the
    uncertainty of the orbit ellipticity.  ``delta_a_indep`` is an optional
    initial-condition-independent term (constant or function of time).
    """

    delta_r0: tuple = (1e-6, 1e-6, 1e-6)
    delta_v0: tuple = (1e-6, 1e-6, 1e-6)
    offset_r0: tuple = (0.0, 0.0, 0.0)
    offset_v0: tuple = (0.0, 0.0, 0.0)
    delta_Omega: float = 1e-7
    delta_gamma: float = 1e-10
    delta_theta: float = 1e-6
    delta_f: float = 400e3
    delta_T: float = 0.0
    delta_e: float = 0.0
    delta_a_indep: Union[float, Callable[[float], float]] = 0.0

    def __post_init__(self):
        for name in ("delta_r0", "delta_v0", "offset_r0", "offset_v0"):
            object.__setattr__(self, name, _triple(getattr(self, name)))
        scalars = (self.delta_Omega, self.delta_gamma, self.delta_theta, self.delta_f, self.delta_T, self.delta_e)
        if min(self.delta_r0 + self.delta_v0 + scalars) < 0.0:
            raise ValueError("uncertainties must be nonnegative")

    def zeroed(self) -> "UncertaintyInputs":
        return UncertaintyInputs(
            delta_r0=0.0, delta_v0=0.0, offset_r0=self.offset_r0, offset_v0=self.offset_v0,
            delta_Omega=0.0, delta_gamma=0.0, delta_theta=0.0, delta_f=0.0,
        )


@dataclass(frozen=True)
class Mission:
    """Everything the ledger needs: orbit, the two species and the inputs."""

    orbit: OrbitModel
    species_a: SpeciesParams = RB87
    species_b: SpeciesParams = K41
    inputs: UncertaintyInputs = field(default_factory=UncertaintyInputs)
    cycle_time: float = 10.0

    @property
    def tensor_model(self) -> str:
        return "exact" if self.orbit.ellipticity > 0.0 else "circular"

    def frame(self, chi: float) -> FrameModel:
        return FrameModel(orbit=self.orbit, chi0=wrap_phase(chi), tensor_model=self.tensor_model)

    def noise(self) -> NoiseModel:
        return NoiseModel(self.species_a.noise(), self.species_b.noise(), self.cycle_time)


@dataclass(frozen=True)
class LedgerTerm:
    label: str
    source: str
    magnitude: float
    harmonics: frozenset


@dataclass
class BudgetLedger:
    chi: float
    compensated: bool
    terms: list = field(default_factory=list)

    @property
    def total(self) -> float:
        """Linear (absolute) sum of all contributions."""
        return float(sum(t.magnitude for t in self.terms))

    @property
    def quadrature(self) -> float:
        return float(math.sqrt(sum(t.magnitude**2 for t in self.terms)))

    def by_label(self, label: str) -> float:
        return float(sum(t.magnitude for t in self.terms if t.label == label))

    def rows(self) -> list[tuple]:
        out = [(t.label, t.source, t.magnitude, _harmonic_tag(t.harmonics)) for t in self.terms]
        out.append(("total_linear", "", self.total, ""))
        out.append(("total_quadrature", "", self.quadrature, ""))
        return out

    def to_csv(self) -> str:
        return format_csv(("term", "coefficient", "magnitude", "harmonic"), self.rows())


def _harmonic_tag(h) -> str:
    return ";".join(str(k) for k in sorted(h))


def scaled_coefficients(frame: FrameModel, species: SpeciesParams, shifts=None) -> np.ndarray:
    """``(alpha, beta) / (k_eff T^2)`` of one species: acceleration per unit offset."""
    p = species.pulses(shifts)
    return phase_gradient(frame, p) / species.scale_factor


def differential_coefficients(
    frame_a: FrameModel,
    frame_b: FrameModel,
    species_a: SpeciesParams,
    species_b: SpeciesParams,
    shifts_a=None,
    shifts_b=None,
) -> tuple[np.ndarray, np.ndarray]:
    """``alpha'`` and ``beta'``: difference of the species' scaled coefficients."""
    if shifts_b is None:
        shifts_b = shifts_a
    d = scaled_coefficients(frame_a, species_a, shifts_a) - scaled_coefficients(frame_b, species_b, shifts_b)
    return d[:3], d[3:]


def colocation_coefficients(frame: FrameModel, mission: Mission, shifts_a=None, shifts_b=None) -> np.ndarray:
    """Mean scaled coefficient: differential acceleration per unit co-location offset."""
    if shifts_b is None:
        shifts_b = shifts_a
    ca = scaled_coefficients(frame, mission.species_a, shifts_a)
    cb = scaled_coefficients(frame, mission.species_b, shifts_b)
    return 0.5 * (ca + cb)


def _perturbed(mission: Mission, frame: FrameModel, name: str, h: float):
    """Return (frame, mission) with parameter ``name`` displaced by ``h``."""
    if name == "gamma":
        return replace(frame, gradient_scale=frame.gradient_scale * (1.0 + h / mission.orbit.gamma)), mission
    if name.startswith("Omega_"):
        axis = "xyz".index(name[-1])
        w = list(frame.residual_rotation)
        w[axis] += h
        return replace(frame, residual_rotation=tuple(w)), mission
    if name == "e":
        orb = replace(mission.orbit, ellipticity=mission.orbit.ellipticity + h)
        return replace(frame, orbit=orb, tensor_model="exact"), replace(mission, orbit=orb)
    if name == "T":
        m = replace(
            mission,
            species_a=replace(mission.species_a, T=mission.species_a.T + h),
            species_b=replace(mission.species_b, T=mission.species_b.T + h),
        )
        return frame, m
    raise ValueError(f"unknown parameter {name!r}")


_SHIFT_PARAMS = ("dx2", "dz2", "dx3", "dz3")


def parameter_uncertainties(mission: Mission, compensated: bool = True) -> dict[str, float]:
    """``delta Q`` per ledger parameter; zero entries are skipped by the ledger."""
    inp = mission.inputs
    out = {
        "gamma": inp.delta_gamma,
        "T": inp.delta_T,
        "Omega_x": inp.delta_Omega,
        "Omega_y": inp.delta_Omega,
        "Omega_z": inp.delta_Omega,
        "e": inp.delta_e,
    }
    if compensated:
        f_laser = 0.5 * (mission.species_a.laser_frequency + mission.species_b.laser_frequency)
        out.update(dx2=inp.delta_theta, dz2=inp.delta_f / f_laser, dx3=inp.delta_theta, dz3=inp.delta_f / f_laser)
    return out


def _step(mission: Mission, name: str) -> float:
    if name == "gamma":
        return REL_STEP * abs(mission.orbit.gamma)
    if name == "T":
        return REL_STEP * mission.species_a.T
    if name.startswith("Omega_"):
        return REL_STEP * mission.orbit.omega_orbit
    if name == "e":
        return REL_STEP
    return SHIFT_STEP


def coefficient_sensitivities(
    frame: FrameModel, mission: Mission, shifts_a=None, shifts_b=None, compensated: bool | None = None
) -> dict[str, np.ndarray]:
    """``|d c / d Q| * delta Q`` for each parameter with nonzero uncertainty.

    ``c`` is :func:`colocation_coefficients` (6 entries, alpha then beta) at
    fixed shifts.  Shift uncertainties enter as ``delta theta`` for x shifts
    and ``delta f / f`` for z shifts, applied to both species' beams.
    """
    if compensated is None:
        compensated = shifts_a is not None
    sa = np.zeros(4) if shifts_a is None else np.asarray(shifts_a, dtype=float)
    sb = sa if shifts_b is None else np.asarray(shifts_b, dtype=float)
    out = {}
    for name, dq in parameter_uncertainties(mission, compensated).items():
        if dq == 0.0:
            continue
        h = _step(mission, name)
        if name in _SHIFT_PARAMS:
            e = np.zeros(4)
            e[_SHIFT_PARAMS.index(name)] = h
            plus = colocation_coefficients(frame, mission, sa + e, sb + e)
            minus = colocation_coefficients(frame, mission, sa - e, sb - e)
            deriv = (plus - minus) / (2 * h)
        elif name == "e" and mission.orbit.ellipticity < h:
            f1, m1 = _perturbed(mission, frame, name, h)
            f0 = replace(frame, tensor_model="exact")
            deriv = (colocation_coefficients(f1, m1, sa, sb) - colocation_coefficients(f0, mission, sa, sb)) / h
        else:
            fp, mp = _perturbed(mission, frame, name, h)
            fm, mm = _perturbed(mission, frame, name, -h)
            deriv = (colocation_coefficients(fp, mp, sa, sb) - colocation_coefficients(fm, mm, sa, sb)) / (2 * h)
        out[name] = np.abs(deriv) * dq
    return out


def _harmonics(name: str, elliptic: bool) -> frozenset:
    if name in ("gamma", "nominal"):
        return frozenset({0, 2, 1, 3} if elliptic else {0, 2})
    if name == "e":
        return frozenset({0, 1, 2, 3})
    return frozenset({0})


def solve_mission_shifts(mission: Mission, chi: float) -> tuple[np.ndarray, np.ndarray]:
    frame = mission.frame(chi)
    sa = solve_shifts(frame, mission.species_a.pulses()).as_array()
    if mission.species_b.T == mission.species_a.T:
        return sa, sa
    return sa, solve_shifts(frame, mission.species_b.pulses()).as_array()


def ggc_residual_budget(mission: Mission, chi: float, compensated: bool = True, t: float = 0.0) -> BudgetLedger:
    """Uncertainty ledger at orbital angle ``chi``.

    Compensated: shifts solved for both species, residual coefficients
    contribute ``|c_i| delta dr_i`` and every parameter uncertainty
    ``|dc_i/dQ dQ| (|dr_i| + delta dr_i)``.  Uncompensated: the same with all
    shifts and shift uncertainties zero.  ``t`` only feeds a time-dependent
    ``delta_a_indep``.
    """
    inp = mission.inputs
    frame = mission.frame(chi)
    if compensated:
        sa, sb = solve_mission_shifts(mission, chi)
    else:
        sa = sb = np.zeros(4)
    offsets = np.abs(np.concatenate([inp.offset_r0, inp.offset_v0]))
    uncert = np.concatenate([inp.delta_r0, inp.delta_v0])
    elliptic = mission.orbit.ellipticity > 0.0
    ledger = BudgetLedger(chi=wrap_phase(chi), compensated=compensated)

    nominal = colocation_coefficients(frame, mission, sa, sb)
    for i, lab in enumerate(COEFF_LABELS):
        mag = abs(nominal[i]) * uncert[i]
        if mag > 0.0:
            ledger.terms.append(LedgerTerm(f"nominal:{lab}", lab, float(mag), _harmonics("nominal", elliptic)))

    sens = coefficient_sensitivities(frame, mission, sa, sb, compensated=compensated)
    for name, dc in sens.items():
        for i, lab in enumerate(COEFF_LABELS):
            mag = dc[i] * (offsets[i] + uncert[i])
            if mag > 0.0:
                ledger.terms.append(LedgerTerm(f"d{name}:{lab}", lab, float(mag), _harmonics(name, elliptic)))

    a_ind = inp.delta_a_indep(t) if callable(inp.delta_a_indep) else inp.delta_a_indep
    if a_ind:
        ledger.terms.append(LedgerTerm("indep", "", abs(float(a_ind)), frozenset({0})))
    return ledger


def _ledger_total(args) -> float:
    mission, chi, compensated = args
    return ggc_residual_budget(mission, chi, compensated).total


def ledger_totals(
    mission: Mission, chis: Sequence[float], compensated: bool = True, workers: int | None = None
) -> np.ndarray:
    """Ledger totals on a grid of orbital angles, in grid order."""
    jobs = [(mission, float(c), compensated) for c in chis]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return np.array(list(pool.map(_ledger_total, jobs, chunksize=max(1, len(jobs) // (4 * workers)))))
    return np.array([_ledger_total(j) for j in jobs])


@dataclass
class IntegrationCurve:
    n: np.ndarray
    tau: np.ndarray
    delta_eta_sys: np.ndarray
    delta_eta_sys_uncompensated: np.ndarray
    sigma_eta_stat: np.ndarray

    COLUMNS = ("tau_s", "delta_eta_sys", "delta_eta_sys_uncompensated", "sigma_eta_stat")

    def downsample(self, points: int) -> "IntegrationCurve":
        """Keep roughly ``points`` log-spaced samples (always the first and last)."""
        size = len(self.n)
        if points >= size:
            return self
        idx = np.unique(np.round(np.geomspace(1, size, points)).astype(int) - 1)
        return IntegrationCurve(
            self.n[idx], self.tau[idx], self.delta_eta_sys[idx],
            self.delta_eta_sys_uncompensated[idx], self.sigma_eta_stat[idx],
        )

    def rows(self):
        return zip(
            self.tau.tolist(), self.delta_eta_sys.tolist(),
            self.delta_eta_sys_uncompensated.tolist(), self.sigma_eta_stat.tolist(),
        )

    def to_csv(self) -> str:
        return format_csv(self.COLUMNS, self.rows())


def sample_periodic(chis: np.ndarray, values: np.ndarray, chi) -> np.ndarray:
    """Linear interpolation of an orbit-periodic function sampled on ``chis``."""
    return np.interp(np.mod(chi, 2 * math.pi), chis, values, period=2 * math.pi)


def integration_curve(
    mission: Mission,
    duration: float,
    chi_steps: int = 720,
    chi0: float = 0.0,
    workers: int | None = None,
    totals: tuple[np.ndarray, np.ndarray] | None = None,
) -> IntegrationCurve:
    """Demodulated systematic and statistical Eotvos uncertainties versus time.

    Ledger totals are evaluated on ``chi_steps`` orbital angles for the
    compensated and uncompensated cases, sampled at ``t_m = m Tc`` with
    ``chi = chi0 + Omega_orbit t_m``, demodulated at the orbital frequency
    and divided by ``g0``.  Precomputed ``totals`` (compensated,
    uncompensated) on the same grid may be passed in.
    """
    tc = mission.cycle_time
    if duration < tc:
        raise ValueError("duration must cover at least one cycle")
    chis = 2 * math.pi * np.arange(chi_steps) / chi_steps
    if totals is None:
        comp = ledger_totals(mission, chis, True, workers)
        unc = ledger_totals(mission, chis, False, workers)
    else:
        comp, unc = (np.asarray(v, dtype=float) for v in totals)
    n_total = int(math.floor(duration / tc + 1e-9))
    m = np.arange(1, n_total + 1, dtype=float)
    w = mission.orbit.omega_orbit
    chi_t = chi0 + w * tc * m
    g0 = mission.orbit.g0
    sys_c = np.abs(cumulative_demodulation(sample_periodic(chis, comp, chi_t), w, tc)) / g0
    sys_u = np.abs(cumulative_demodulation(sample_periodic(chis, unc, chi_t), w, tc)) / g0
    stat = sigma_eta(mission.noise(), g0, m, omega=w, mode="exact")
    return IntegrationCurve(m, m * tc, sys_c, sys_u, np.asarray(stat))


def crossing_time(tau: np.ndarray, curve: np.ndarray, threshold: float) -> float:
    """Time after which ``curve`` stays at or below ``threshold`` (inf if it never settles)."""
    above = np.nonzero(np.asarray(curve) > threshold)[0]
    if above.size == 0:
        return float(tau[0])
    last = above[-1]
    if last + 1 >= len(tau):
        return math.inf
    return float(tau[last + 1])


def verification_shots(sigma_r, sigma_v, atoms: float, target_dr, target_dv) -> int:
    """Shots needed to pin the mean differential position and velocity.

    The mean of ``nu`` shots with ``N`` atoms per species determines the
    differential offset to ``sigma / sqrt(nu N / 2)``; the result is the
    largest requirement over axes and quantities, at least one shot.
    """
    sr, sv, tr, tv = (np.asarray(_triple(x)) for x in (sigma_r, sigma_v, target_dr, target_dv))
    if atoms <= 0 or np.any(sr < 0) or np.any(sv < 0) or np.any(tr <= 0) or np.any(tv <= 0):
        raise ValueError("verification inputs must be positive")
    need = np.concatenate([2 * sr**2 / (atoms * tr**2), 2 * sv**2 / (atoms * tv**2)])
    # guard against 1.0000000000000002 rounding up to 2
    return int(max(1, math.ceil(float(need.max()) * (1 - 1e-12))))
