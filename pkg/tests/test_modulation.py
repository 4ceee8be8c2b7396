"""Modulator coefficient algebra tests.

The anchor values are power-series Bessel evaluations frozen before the
recurrence code existed:
    J_0..J_4(1.5) = 0.5118276717359181, 0.5579365079100996,
                    0.2320876721442147, 0.06096395114113963,
                    0.011768132420343797
    J_0..J_4(3.0) = -0.26005195490193334, 0.3390589585259365,
                    0.486091260585891, 0.30906272225525155,
                    0.1320341839246122
"""

import math

import numpy as np
import pytest

from modlab import (ConfigurationError, bessel_j_sequence, bessel_j_series,
                    coeffs_from_waveform, compose_nonlocal, read_phase_waveform,
                    sinusoidal_coeffs)
from modlab.modulation import ModulatorSpectrum

J_15 = (0.5118276717359181, 0.5579365079100996, 0.2320876721442147,
        0.06096395114113963, 0.011768132420343797)
J_30 = (-0.26005195490193334, 0.3390589585259365, 0.486091260585891,
        0.30906272225525155, 0.1320341839246122)

# squared magnitudes quoted to five digits (series oracle)
Q_SQ_15 = (0.26197, 0.31129, 0.05386, 0.003717)
S_SQ_30 = (0.06763, 0.11496, 0.23628, 0.09552, 0.017433)


@pytest.mark.parametrize("x", [0.1, 0.5, 1.5, 3.0, 5.0, 8.0, -1.5])
def test_recurrence_matches_series(x):
    seq = bessel_j_sequence(25, x)
    for n in range(26):
        assert abs(seq[n] - bessel_j_series(n, x)) < 1e-13


def test_series_matches_frozen_values():
    for n, ref in enumerate(J_15):
        assert bessel_j_series(n, 1.5) == pytest.approx(ref, abs=1e-15)
    for n, ref in enumerate(J_30):
        assert bessel_j_series(n, 3.0) == pytest.approx(ref, abs=1e-15)


def test_series_negative_order_symmetry():
    assert bessel_j_series(-3, 1.5) == pytest.approx(-J_15[3], abs=1e-15)
    assert bessel_j_series(-2, 3.0) == pytest.approx(J_30[2], abs=1e-15)


def test_identity_modulator():
    mod = sinusoidal_coeffs(0.0, 0.0, 30.0)
    assert mod.k_max == 0
    assert mod.coefficient(0) == 1.0
    assert mod.coefficient(3) == 0.0
    mod.validate()


def test_sinusoidal_magnitudes_at_depth_1p5():
    mod = sinusoidal_coeffs(1.5, 0.0, 30.0)
    for k, ref in enumerate(Q_SQ_15):
        assert abs(mod.coefficient(k)) ** 2 == pytest.approx(ref, rel=5e-4)
        # against the series oracle, tight
        assert abs(mod.coefficient(k)) ** 2 == pytest.approx(J_15[k] ** 2, rel=1e-12)


def test_sinusoidal_sign_convention():
    # q_k = J_k(-depth) * exp(-i k phase)
    phase = 0.7
    mod = sinusoidal_coeffs(1.5, phase, 30.0)
    for k in range(-5, 6):
        expected = bessel_j_series(k, -1.5) * np.exp(-1j * k * phase)
        assert mod.coefficient(k) == pytest.approx(expected, abs=1e-13)


@pytest.mark.parametrize("depth", [0.5, 1.0, 1.5, 2.5])
@pytest.mark.parametrize("phase", [0.0, 0.4, math.pi])
def test_parseval(depth, phase):
    mod = sinusoidal_coeffs(depth, phase, 30.0)
    assert abs(mod.total_power() - 1.0) < 1e-12
    mod.validate()


def test_truncation_tail():
    mod = sinusoidal_coeffs(1.5, 0.0, 30.0)
    assert mod.tail_fraction() < 1e-24
    # near depth + 18 for the default tolerance
    assert 10 <= mod.k_max <= 24


def test_tail_tolerance_must_be_positive():
    with pytest.raises(ConfigurationError):
        sinusoidal_coeffs(1.5, 0.0, 30.0, tail_tol=0.0)


def test_waveform_trivial_phase():
    mod = coeffs_from_waveform(np.zeros(128), 30.0)
    assert mod.k_max == 0
    assert mod.coefficient(0) == pytest.approx(1.0, abs=1e-15)


def test_waveform_cosine_matches_sinusoidal():
    theta = 2.0 * math.pi * np.arange(512) / 512
    wav = coeffs_from_waveform(1.5 * np.cos(theta), 30.0)
    ana = sinusoidal_coeffs(1.5, 0.0, 30.0)
    for k in range(-max(wav.k_max, ana.k_max), max(wav.k_max, ana.k_max) + 1):
        assert abs(wav.coefficient(k) - ana.coefficient(k)) < 1e-10


def test_waveform_cosine_with_drive_phase():
    phase = 0.9
    theta = 2.0 * math.pi * np.arange(512) / 512
    wav = coeffs_from_waveform(1.2 * np.cos(theta + phase), 30.0)
    ana = sinusoidal_coeffs(1.2, phase, 30.0)
    for k in range(-wav.k_max, wav.k_max + 1):
        assert abs(wav.coefficient(k) - ana.coefficient(k)) < 1e-10


def test_waveform_square_wave():
    # +-1 square wave: odd harmonics with |q_k| = 2/(pi k), even ones absent
    n = 4096
    phases = np.where(np.arange(n) < n // 2, 0.0, math.pi)
    mod = coeffs_from_waveform(phases, 30.0)
    assert abs(mod.total_power() - 1.0) < 1e-12
    for k in (1, 3, 5, 7):
        assert abs(mod.coefficient(k)) == pytest.approx(2.0 / (math.pi * k), rel=2e-3)
    for k in (2, 4, 6):
        assert abs(mod.coefficient(k)) < 1e-12


def test_waveform_minimum_sample_count():
    with pytest.raises(ConfigurationError):
        coeffs_from_waveform(np.zeros(32), 30.0)


def test_compose_identity():
    q = sinusoidal_coeffs(0.0, 0.0, 30.0)
    r = sinusoidal_coeffs(1.5, 0.3, 30.0)
    s = compose_nonlocal(q, r)
    assert s.n_max == r.k_max
    assert np.allclose(s.coeffs, r.coeffs, atol=1e-15)


def test_compose_same_phase_doubles_depth():
    q = sinusoidal_coeffs(1.5, 0.0, 30.0)
    s = compose_nonlocal(q, sinusoidal_coeffs(1.5, 0.0, 30.0))
    for n, ref in enumerate(S_SQ_30):
        assert s.magnitude_sq(n) == pytest.approx(ref, rel=5e-4)
        assert s.magnitude_sq(n) == pytest.approx(J_30[n] ** 2, rel=1e-10)
    s.validate()


def test_compose_opposite_phase_cancels():
    q = sinusoidal_coeffs(1.5, 0.0, 30.0)
    s = compose_nonlocal(q, sinusoidal_coeffs(1.5, math.pi, 30.0))
    assert abs(s.coefficient(0)) == pytest.approx(1.0, abs=1e-12)
    others = max(abs(s.coefficient(n)) for n in range(1, s.n_max + 1))
    assert others < 1e-12


@pytest.mark.parametrize("d1", [0.5, 1.0, 1.5, 2.5])
@pytest.mark.parametrize("d2", [0.5, 1.0, 1.5, 2.5])
@pytest.mark.parametrize("rel_phase,sign", [(0.0, +1), (math.pi, -1)])
def test_addition_theorem_grid(d1, d2, rel_phase, sign):
    # sum_k J_k(a) J_{n-k}(b) = J_n(a+b), via the series oracle
    s = compose_nonlocal(sinusoidal_coeffs(d1, 0.0, 30.0),
                         sinusoidal_coeffs(d2, rel_phase, 30.0))
    total = d1 + sign * d2
    for n in range(-s.n_max, s.n_max + 1):
        assert abs(abs(s.coefficient(n)) - abs(bessel_j_series(n, total))) < 1e-9


def test_intermediate_relative_phase():
    # |s_n| = |J_n(w)| with w^2 = d1^2 + d2^2 + 2 d1 d2 cos(rel_phase)
    d1, d2, phi = 1.5, 1.0, 1.1
    s = compose_nonlocal(sinusoidal_coeffs(d1, 0.0, 30.0),
                         sinusoidal_coeffs(d2, phi, 30.0))
    w = math.sqrt(d1 * d1 + d2 * d2 + 2.0 * d1 * d2 * math.cos(phi))
    for n in range(-8, 9):
        assert abs(abs(s.coefficient(n)) - abs(bessel_j_series(n, w))) < 1e-10


def test_time_origin_covariance():
    # shifting the common time origin multiplies q_k and r_l by e^{-ik phi},
    # e^{-il phi}; every |s_n|^2 is unchanged
    phi = 0.813
    q = sinusoidal_coeffs(1.5, 0.0, 30.0)
    r = sinusoidal_coeffs(1.0, 0.4, 30.0)
    s_ref = compose_nonlocal(q, r)
    q_shift = ModulatorSpectrum(omega_m=30.0,
                                coeffs=q.coeffs * np.exp(-1j * q.k_values * phi))
    r_shift = ModulatorSpectrum(omega_m=30.0,
                                coeffs=r.coeffs * np.exp(-1j * r.k_values * phi))
    s_shift = compose_nonlocal(q_shift, r_shift)
    for n in range(-s_ref.n_max, s_ref.n_max + 1):
        assert s_shift.magnitude_sq(n) == pytest.approx(s_ref.magnitude_sq(n), abs=1e-12)


def test_relative_phase_is_observable():
    # oppositely signed shifts change the relative drive phase and with it
    # the sideband weights (this is the measured effect, not an invariance)
    q = sinusoidal_coeffs(1.5, 0.0, 30.0)
    r = sinusoidal_coeffs(1.5, 0.0, 30.0)
    phi = math.pi / 2
    q_shift = ModulatorSpectrum(omega_m=30.0,
                                coeffs=q.coeffs * np.exp(-1j * q.k_values * phi))
    r_shift = ModulatorSpectrum(omega_m=30.0,
                                coeffs=r.coeffs * np.exp(+1j * r.k_values * phi))
    s = compose_nonlocal(q_shift, r_shift)
    s_ref = compose_nonlocal(q, r)
    assert abs(s.magnitude_sq(0) - s_ref.magnitude_sq(0)) > 0.1


def test_compose_rejects_asynchronous_drives():
    with pytest.raises(ConfigurationError):
        compose_nonlocal(sinusoidal_coeffs(1.5, 0.0, 30.0),
                         sinusoidal_coeffs(1.5, 0.0, 29.0))


def test_read_phase_waveform(tmp_path):
    n = 128
    lines = ["# time_fraction phase_radians"]
    for j in range(n):
        lines.append(f"{j / n:.12f} {1.5 * math.cos(2 * math.pi * j / n):.12f}")
    path = tmp_path / "wave.txt"
    path.write_text("\n".join(lines) + "\n")
    phases = read_phase_waveform(path)
    assert len(phases) == n
    mod = coeffs_from_waveform(phases, 30.0)
    ana = sinusoidal_coeffs(1.5, 0.0, 30.0)
    assert abs(mod.coefficient(1) - ana.coefficient(1)) < 1e-8


def test_read_phase_waveform_rejects_bad_files(tmp_path):
    short = tmp_path / "short.txt"
    short.write_text("0.0 1.0\n0.5 2.0\n")
    with pytest.raises(ConfigurationError):
        read_phase_waveform(short)

    uneven = tmp_path / "uneven.txt"
    uneven.write_text("\n".join(f"{(j / 128) ** 1.01:.12f} 0.0" for j in range(128)) + "\n")
    with pytest.raises(ConfigurationError):
        read_phase_waveform(uneven)

    garbled = tmp_path / "garbled.txt"
    garbled.write_text("\n".join("0.0 x" for _ in range(70)) + "\n")
    with pytest.raises(ConfigurationError):
        read_phase_waveform(garbled)
