import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uffggc.demod import (
    NoiseModel,
    SignalModel,
    SpeciesNoise,
    cos2_sum,
    cumulative_demodulation,
    demodulate_continuous,
    demodulate_discrete,
    demodulation_bound,
    shot_noise_sigma,
    sigma_eta,
)

W = 2 * math.pi / 5926.0
RB = SpeciesNoise(8 * math.pi / 780e-9, 20.0)
K41 = SpeciesNoise(8 * math.pi / 767e-9, 20.0)

amps = st.floats(-1e-10, 1e-10, allow_nan=False)


def _numeric(signal, tau, n=200001):
    t = np.linspace(0.0, tau, n)
    f = signal(t) * np.cos(signal.omega_m * t)
    return 2.0 / tau * float(np.sum((f[1:] + f[:-1]) / 2 * np.diff(t)))


def test_violation_only_examples():
    s = SignalModel(1e-14, omega_m=W)
    period = 2 * math.pi / W
    assert demodulate_continuous(s, 10 * period) == pytest.approx(1e-14, rel=1e-12)
    assert demodulate_continuous(s, period / 4) == pytest.approx(1e-14, rel=1e-12)
    assert demodulate_continuous(s, period / 8) == pytest.approx(1e-14 * (1 + 2 / math.pi), rel=1e-12)


def test_constant_and_harmonic_decay():
    period = 2 * math.pi / W
    assert demodulate_continuous(SignalModel(0.0, const_term=1.0, omega_m=W), 10.25 * period) == pytest.approx(
        2 / (W * 10.25 * period), rel=1e-12
    )
    assert abs(demodulate_continuous(SignalModel(0.0, harmonics=[(2, 1.0)], omega_m=W), 10 * period)) < 1e-12


@pytest.mark.parametrize("tau", [37.0, 2000.0, 12345.6, 9e4])
def test_closed_form_matches_quadrature(tau):
    s = SignalModel(1e-14, 3e-13, ((1, 2e-14), (2, -5e-13), (3, 1e-13)), omega_m=W)
    assert demodulate_continuous(s, tau) == pytest.approx(_numeric(s, tau), rel=1e-8, abs=1e-22)


@given(amps, amps, amps, amps, st.floats(1.0, 1e7))
@settings(max_examples=50)
def test_linearity(a, c, b1, b2, tau):
    s1 = SignalModel(a, c, ((1, b1),), omega_m=W)
    s2 = SignalModel(0.0, 0.0, ((2, b2),), omega_m=W)
    both = SignalModel(a, c, ((1, b1), (2, b2)), omega_m=W)
    got = demodulate_continuous(both, tau)
    expect = demodulate_continuous(s1, tau) + demodulate_continuous(s2, tau)
    assert got == pytest.approx(expect, rel=1e-12, abs=1e-24)


def test_bound_holds_on_log_grid():
    s = SignalModel(1e-15, 4e-13, ((1, 3e-14), (2, -6e-13), (3, 2e-13), (5, 1e-13)), omega_m=W)
    taus = np.geomspace(10.0, 4e7, 5000)
    got = np.abs(demodulate_continuous(s, taus))
    assert np.all(got <= demodulation_bound(s, taus) * (1 + 1e-12))


@given(amps, amps, amps, amps, st.floats(1.0, 1e7))
def test_bound_property(a, c, b1, b2, tau):
    s = SignalModel(a, c, ((1, b1), (2, b2)), omega_m=W)
    assert abs(demodulate_continuous(s, tau)) <= demodulation_bound(s, tau) * (1 + 1e-12) + 1e-300


def test_long_time_recovers_in_phase_amplitude():
    s = SignalModel(2e-15, 1e-13, ((1, 3e-16), (2, 1e-12)), omega_m=W)
    assert demodulate_continuous(s, 1e9) == pytest.approx(2.3e-15, rel=1e-4)


def test_continuous_rejects_non_positive_tau():
    with pytest.raises(ValueError):
        demodulate_continuous(SignalModel(1.0), 0.0)


def test_signal_validation():
    with pytest.raises(ValueError):
        SignalModel(1.0, harmonics=[(0, 1.0)])
    with pytest.raises(ValueError):
        SignalModel(1.0, harmonics=[(2, 1.0), (2, 1.0)])
    with pytest.raises(ValueError):
        SignalModel(1.0, omega_m=-1.0)


def test_discrete_constant_decays():
    tc = 10.0
    errs = []
    ns = [1000, 4000, 16000, 64000]
    for n in ns:
        t = tc * np.arange(1, n + 1)
        errs.append(abs(demodulate_discrete(np.column_stack([t, np.ones(n)]), W)))
    # bounded by 2/(n |sin(W Tc / 2)|) ~ 2/(n W Tc / 2)
    for n, e in zip(ns, errs):
        assert e <= 2.0 / (n * abs(math.sin(W * tc / 2))) * 1.0001


def test_discrete_matches_continuous():
    tc = 10.0
    s = SignalModel(1e-14, 2e-13, ((2, 5e-13),), omega_m=W)
    n = 200000
    t = tc * np.arange(1, n + 1)
    disc = demodulate_discrete(np.column_stack([t, s(t)]), W)
    cont = demodulate_continuous(s, n * tc)
    assert disc == pytest.approx(cont, abs=1e-3 * 1e-14)


def test_cumulative_matches_discrete():
    tc = 10.0
    s = SignalModel(1e-14, 2e-13, omega_m=W)
    t = tc * np.arange(1, 501)
    cum = cumulative_demodulation(s(t), W, tc)
    for n in (1, 17, 500):
        assert cum[n - 1] == pytest.approx(demodulate_discrete(np.column_stack([t[:n], s(t[:n])]), W), rel=1e-12)


def test_discrete_input_errors():
    with pytest.raises(ValueError):
        demodulate_discrete([], W)
    with pytest.raises(ValueError):
        demodulate_discrete([(0.0, 1.0), (10.0, 1.0), (25.0, 1.0)], W)


def test_shot_noise_numbers():
    assert RB.single_shot() == pytest.approx(7.76e-14, rel=2e-3)
    assert K41.single_shot() == pytest.approx(7.63e-14, rel=2e-3)
    nm = NoiseModel(RB, K41)
    assert shot_noise_sigma(nm) == pytest.approx(math.hypot(RB.single_shot(), K41.single_shot()), rel=1e-15)
    assert nm.sigma_single_shot == shot_noise_sigma(nm)


def test_identical_species_and_atom_scaling():
    assert shot_noise_sigma(NoiseModel(RB, RB)) == pytest.approx(math.sqrt(2) * RB.single_shot(), rel=1e-15)
    quad = SpeciesNoise(RB.k_eff, RB.T, atoms=4e6)
    assert quad.single_shot() == pytest.approx(RB.single_shot() / 2, rel=1e-15)


@pytest.mark.parametrize("kwargs", [{"contrast": 0.0}, {"contrast": 1.2}, {"atoms": 0.0}, {"T": -1.0}])
def test_species_noise_validation(kwargs):
    base = {"k_eff": RB.k_eff, "T": 20.0}
    base.update(kwargs)
    with pytest.raises(ValueError):
        SpeciesNoise(**base)


def test_stored_sigma_mismatch():
    sigma = shot_noise_sigma(NoiseModel(RB, K41))
    NoiseModel(RB, K41, sigma_single_shot=sigma)
    with pytest.raises(ValueError):
        NoiseModel(RB, K41, sigma_single_shot=sigma * 1.01)


def test_sigma_eta_monotone():
    nm = NoiseModel(RB, K41)
    n = np.arange(1, 200001)
    s = sigma_eta(nm, 7.96, n, W, "exact")
    # exact curve may wiggle at small n; it is monotone over whole modulation periods
    per = int(round(2 * math.pi / (W * nm.cycle_time)))
    coarse = s[per - 1 :: per]
    assert np.all(np.diff(coarse) < 0)
    a = sigma_eta(nm, 7.96, n, mode="asymptotic")
    assert np.all(np.diff(a) < 0)


def test_sigma_eta_errors():
    nm = NoiseModel(RB, K41)
    with pytest.raises(ValueError):
        sigma_eta(nm, 7.96, 0, W)
    with pytest.raises(ValueError):
        sigma_eta(nm, 7.96, 10)
    with pytest.raises(ValueError):
        sigma_eta(nm, 7.96, 10, W, mode="bogus")


@given(st.integers(1, 3000), st.floats(1e-3, 3.1))
def test_cos2_sum_closed_form(n, x):
    direct = float(np.sum(np.cos(x * np.arange(1, n + 1)) ** 2))
    assert cos2_sum(n, x) == pytest.approx(direct, rel=1e-9, abs=1e-9)


def test_cos2_sum_degenerate_angle():
    assert cos2_sum(7, 0.0) == 7.0
    assert cos2_sum(7, math.pi) == pytest.approx(7.0)


@given(st.integers(10, 10**6), st.floats(0.05, 3.0))
def test_cos2_sum_envelope(n, x):
    # deviation from n/2 is bounded by 1/(2 |sin x|)
    assert abs(cos2_sum(n, x) - n / 2) <= 1 / (2 * abs(math.sin(x))) + 1e-9 * n
