"""Fourier-series transfer functions of periodic phase modulators.

A periodic phase modulator acts in the time domain as a unimodular transfer
function ``m(t) = sum_k q_k exp(-i k w_m t)``; pure phase modulation forces
``sum |q_k|^2 = 1``. For a sinusoidal drive of depth ``d`` the coefficients
are Bessel functions, ``q_k = J_k(-d)``, with a drive-phase offset entering
as ``q_k -> q_k exp(-i k phi)``. Arbitrary periodic drives are ingested by
sampling one period of the phase and taking a DFT of ``exp(i phi(t))``.

Two modulators acting on the two photons of an energy-conserving pair
combine, in the joint frequency correlation, through the discrete
convolution of their coefficient sequences. For sinusoidal drives this
reproduces the Bessel addition theorem: equal phases behave like a single
modulator at the summed depth, opposite phases cancel outright.

Bessel values come from downward (Miller) recurrence with the standard
normalization; an independent power-series evaluator is provided as the
verification oracle.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

DEFAULT_TAIL_TOL = 1e-24
_RESCALE_LIMIT = 1e100


def bessel_j_sequence(nmax: int, x: float) -> np.ndarray:
    """J_0(x) .. J_nmax(x) by Miller's downward recurrence.

    The recurrence is run from well above max(nmax, |x|) down to order zero
    with an arbitrary seed, then normalized with J_0 + 2*sum J_2k = 1.
    Downward is the stable direction above the turning point, so the result
    is accurate to near machine precision for the moderate arguments used
    here (|x| up to a few tens of radians).
    """
    if nmax < 0:
        raise ConfigurationError("nmax must be nonnegative")
    x = float(x)
    out = np.zeros(nmax + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    ax = abs(x)
    start = max(nmax, int(ax))
    m = 2 * ((start + int(np.ceil(np.sqrt(40.0 * (start + 1))))) // 2 + 1)
    j_hi = 0.0      # unnormalized J_{k+1}
    j = 1e-30       # unnormalized J_k
    norm = 0.0
    for k in range(m, 0, -1):
        j_lo = (2.0 * k / ax) * j - j_hi
        j_hi = j
        j = j_lo
        if abs(j) > _RESCALE_LIMIT:
            j *= 1e-100
            j_hi *= 1e-100
            out *= 1e-100
            norm *= 1e-100
        order = k - 1
        if order <= nmax:
            out[order] = j
        if order > 0 and order % 2 == 0:
            norm += 2.0 * j
    norm += j   # j now holds unnormalized J_0
    out /= norm
    if x < 0.0:
        out[1::2] = -out[1::2]
    return out


def bessel_j_series(n: int, x: float, tol: float = 1e-22) -> float:
    """J_n(x) from the ascending power series; the independent oracle.

    Accurate to ~1e-15 absolute for |x| below about 15, which covers every
    modulation depth of interest. Deliberately a different algorithm from
    ``bessel_j_sequence`` so the two can check each other.
    """
    n = int(n)
    sign = 1.0
    if n < 0:
        n = -n
        if n % 2 == 1:
            sign = -sign
    if x < 0 and n % 2 == 1:
        sign = -sign
    half = 0.5 * abs(x)
    term = 1.0
    for i in range(1, n + 1):
        term *= half / i
        if term == 0.0:
            return 0.0
    total = term
    m = 0
    while True:
        m += 1
        term *= -(half * half) / (m * (n + m))
        total += term
        if abs(term) < tol * max(abs(total), 1e-300) or m > 400:
            break
    return sign * total


def _i_power(k: int) -> complex:
    """Exact i**k for integer k."""
    return (1.0, 1.0j, -1.0, -1.0j)[k % 4]


@dataclass(frozen=True)
class ModulatorSpectrum:
    """Truncated coefficient sequence {q_k}, k = -K..K, of one modulator.

    ``depth`` and ``drive_phase`` are bookkeeping for sinusoidal drives
    (None when the spectrum came from an arbitrary waveform); the physics
    lives entirely in ``coeffs``.
    """

    omega_m: float
    coeffs: np.ndarray
    depth: float | None = None
    drive_phase: float | None = None

    def __post_init__(self):
        if self.omega_m <= 0:
            raise ConfigurationError("modulator drive frequency must be positive")
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=complex))
        if self.coeffs.ndim != 1 or len(self.coeffs) % 2 != 1:
            raise ConfigurationError("coefficients must form an odd-length sequence k=-K..K")

    @property
    def k_max(self) -> int:
        return (len(self.coeffs) - 1) // 2

    @property
    def k_values(self) -> np.ndarray:
        return np.arange(-self.k_max, self.k_max + 1)

    def coefficient(self, k: int) -> complex:
        if abs(k) > self.k_max:
            return 0.0 + 0.0j
        return complex(self.coeffs[k + self.k_max])

    def total_power(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def tail_fraction(self) -> float:
        """(|q_K|^2 + |q_-K|^2) / total power; zero for the K=0 identity case."""
        if self.k_max == 0:
            return 0.0
        power = self.total_power()
        edge = abs(self.coeffs[0]) ** 2 + abs(self.coeffs[-1]) ** 2
        return float(edge / power)

    def validate(self, parseval_tol: float = 1e-10, tail_tol: float = DEFAULT_TAIL_TOL):
        if abs(self.total_power() - 1.0) > parseval_tol:
            raise ConfigurationError("modulator coefficients violate sum |q_k|^2 = 1")
        if self.tail_fraction() >= tail_tol:
            raise ConfigurationError("modulator truncation tail above tolerance")

    def __eq__(self, other):
        if not isinstance(other, ModulatorSpectrum):
            return NotImplemented
        return (self.omega_m == other.omega_m
                and self.depth == other.depth
                and self.drive_phase == other.drive_phase
                and self.coeffs.shape == other.coeffs.shape
                and bool(np.array_equal(self.coeffs, other.coeffs)))


@dataclass(frozen=True)
class NonlocalCoefficients:
    """Convolved sideband weights s_n = sum_k q_k r_{n-k}, n = -Ks..Ks."""

    omega_m: float
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=complex))
        if self.coeffs.ndim != 1 or len(self.coeffs) % 2 != 1:
            raise ConfigurationError("coefficients must form an odd-length sequence n=-K..K")

    @property
    def n_max(self) -> int:
        return (len(self.coeffs) - 1) // 2

    @property
    def n_values(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)

    def coefficient(self, n: int) -> complex:
        if abs(n) > self.n_max:
            return 0.0 + 0.0j
        return complex(self.coeffs[n + self.n_max])

    def magnitude_sq(self, n: int) -> float:
        return abs(self.coefficient(n)) ** 2

    def total_power(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def validate(self, parseval_tol: float = 1e-9):
        if abs(self.total_power() - 1.0) > parseval_tol:
            raise ConfigurationError("composed coefficients violate sum |s_n|^2 = 1")


def sinusoidal_coeffs(depth: float, drive_phase: float = 0.0,
                      omega_m: float = 30.0,
                      tail_tol: float = DEFAULT_TAIL_TOL) -> ModulatorSpectrum:
    """Coefficients of a sinusoidal phase modulator of the given depth.

    q_k = J_k(-depth) * exp(-i k drive_phase), truncated at the smallest K
    whose edge coefficients carry less than ``tail_tol`` of the power. For
    the default tolerance K comes out near depth + 18.
    """
    if tail_tol <= 0:
        raise ConfigurationError("tail tolerance must be positive")
    depth = float(depth)
    if depth == 0.0:
        return ModulatorSpectrum(omega_m=omega_m, coeffs=np.array([1.0 + 0.0j]),
                                 depth=0.0, drive_phase=float(drive_phase))
    k_big = int(np.ceil(abs(depth))) + 48
    j_pos = bessel_j_sequence(k_big, -depth)
    # stay above the turning point so an incidental Bessel zero cannot
    # masquerade as a converged tail
    k_floor = int(np.ceil(abs(depth))) + 2
    k_cut = None
    for k in range(k_floor, k_big + 1):
        if 2.0 * j_pos[k] ** 2 < tail_tol:
            k_cut = k
            break
    if k_cut is None:
        raise ConfigurationError("tail tolerance not reachable; loosen tail_tol")
    k_idx = np.arange(-k_cut, k_cut + 1)
    coeffs = np.empty(2 * k_cut + 1, dtype=complex)
    for k in k_idx:
        val = j_pos[abs(k)]
        if k < 0 and (-k) % 2 == 1:
            val = -val
        coeffs[k + k_cut] = val
    coeffs *= np.exp(-1j * k_idx * float(drive_phase))
    return ModulatorSpectrum(omega_m=omega_m, coeffs=coeffs,
                             depth=depth, drive_phase=float(drive_phase))


def coeffs_from_waveform(phase_samples, omega_m: float,
                         tail_tol: float = DEFAULT_TAIL_TOL) -> ModulatorSpectrum:
    """Coefficients of an arbitrary periodic phase drive phi(t).

    ``phase_samples`` holds phi in radians at uniform times j*T/N over one
    period, N >= 64. The coefficients are the DFT of exp(i phi), indexed to
    match m(t) = sum_k q_k exp(-i k w_m t), with the time origin placed a
    quarter period early so that a pure cosine drive reproduces the
    J_k(-depth) convention of ``sinusoidal_coeffs`` coefficient by
    coefficient (an overall time shift is unobservable; only the relative
    phase between channels matters).
    """
    phases = np.asarray(phase_samples, dtype=float)
    if phases.ndim != 1 or len(phases) < 64:
        raise ConfigurationError("waveform needs at least 64 uniform samples per period")
    n = len(phases)
    transfer = np.exp(1j * phases)
    fhat = np.fft.ifft(transfer)      # fhat[k] = (1/N) sum_j m_j exp(+2pi i jk/N)
    power = np.abs(fhat) ** 2
    total = float(power.sum())
    k_lim = n // 2 - 1
    k_keep = 0
    for k in range(1, k_lim + 1):
        if power[k] >= tail_tol * total or power[n - k] >= tail_tol * total:
            k_keep = k
    k_cut = min(k_keep + 1, k_lim) if k_keep > 0 else 0
    k_idx = np.arange(-k_cut, k_cut + 1)
    coeffs = np.array([_i_power(int(k)) * fhat[k % n] for k in k_idx], dtype=complex)
    return ModulatorSpectrum(omega_m=omega_m, coeffs=coeffs)


def read_phase_waveform(path) -> np.ndarray:
    """Load one period of a phase drive from a two-column text file.

    Columns: time as a fraction of the period, phase in radians. Rows must
    start at 0 and be uniformly spaced (j/N for N rows); '#' comments and
    blank lines are ignored. Returns the phase samples for
    ``coeffs_from_waveform``.
    """
    times = []
    phases = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 2:
                raise ConfigurationError(
                    f"{path}:{lineno}: expected two columns (time_fraction phase_radians)")
            try:
                times.append(float(parts[0]))
                phases.append(float(parts[1]))
            except ValueError as exc:
                raise ConfigurationError(f"{path}:{lineno}: non-numeric value") from exc
    n = len(times)
    if n < 64:
        raise ConfigurationError("waveform file needs at least 64 samples per period")
    expected = np.arange(n) / n
    if np.max(np.abs(np.asarray(times) - expected)) > 1e-9:
        raise ConfigurationError(
            "waveform times must be uniform fractions of the period: 0, 1/N, ..., (N-1)/N")
    return np.asarray(phases, dtype=float)


def compose_nonlocal(q: ModulatorSpectrum, r: ModulatorSpectrum) -> NonlocalCoefficients:
    """Sideband weights of two distant modulators acting on one photon pair.

    Full discrete convolution of the two coefficient sequences; no
    re-truncation, so the composed sequence keeps the product's power
    exactly. Both modulators must share the drive frequency (they are
    synchronously driven by assumption).
    """
    if q.omega_m != r.omega_m:
        raise ConfigurationError(
            "modulators must be synchronously driven (equal drive frequencies)")
    s = np.convolve(q.coeffs, r.coeffs)
    return NonlocalCoefficients(omega_m=q.omega_m, coeffs=s)
