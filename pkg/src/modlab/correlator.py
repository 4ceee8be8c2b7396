"""Singles rates and frequency-domain coincidence traces.

Two model tiers are provided. ``coincidence_trace`` is the closed-form
sideband model: within the window around the n-th sideband the paired rate
is ``c_n * H2(n w_m - delta)``, where ``H2`` is the convolution of the two
monochromators' intensity responses and ``c_n`` weighs the composed
modulator coefficient ``s_n``. ``coincidence_full`` rebuilds the paired
rate from the delay-domain pair kernels using the full sampled amplitudes,
and serves as the high-fidelity oracle for the closed form. The two agree
to well under a percent while the filters are narrow compared to the
modulation frequency and wide compared to the inverse gate (the reference
parameters exceed those margins by factors of about 3.5 and 11); the
deviation grows as the filter width approaches the modulation frequency,
which is expected and not asserted anywhere.

Both tiers share the accidental floor ``R1 * R2 * T`` from uncorrelated
detections inside the gate. Absolute rates inherit an arbitrary source
normalization; only the fitted transmission scales make them counts per
second, exactly as in an experiment.

Frequencies are ordinary GHz. Delay grids are conjugate to that axis
(units of reciprocal GHz; about 0.159 ns per unit). The gate width is
quoted in ns and enters only the accidental term.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, ResolutionError
from .modulation import compose_nonlocal
from .numerics import adaptive_simpson

_TWO_SQRT_2LN2 = 2.0 * np.sqrt(2.0 * np.log(2.0))
_PASSBAND_FWHMS = 4.0        # integration half-width in units of intensity FWHM
_KERNEL_EDGE_FRACTION = 1e-6
_NEGLIGIBLE_WEIGHT = 1e-30

FWHM_CONVENTIONS = ("intensity", "field")


@dataclass(frozen=True)
class GaussianFilter:
    """Monochromator response: Gaussian field transmission of width ``fwhm``.

    ``slit`` is the output slit position in mm; the selected center
    frequency is ``dispersion * slit``. ``alpha`` is the dimensionless
    field transmission scale absorbing losses and detector efficiency.

    The quoted ``fwhm`` is interpreted per convention: "intensity" takes it
    as the FWHM of |H|^2 (this matches the response formula
    alpha*exp[-2 ln2 w^2 / fwhm^2] taken at face value), "field" takes it
    as the FWHM of H itself, making the intensity FWHM narrower by sqrt(2).
    """

    fwhm: float
    alpha: float
    slit: float
    dispersion: float

    def __post_init__(self):
        if self.fwhm <= 0:
            raise ConfigurationError("filter FWHM must be positive")
        if self.alpha < 0:
            raise ConfigurationError("filter transmission scale must be nonnegative")
        if self.dispersion <= 0:
            raise ConfigurationError("dispersion must be positive")

    @property
    def center(self) -> float:
        return self.dispersion * self.slit

    def intensity_fwhm(self, convention: str = "intensity") -> float:
        _check_convention(convention)
        return self.fwhm if convention == "intensity" else self.fwhm / np.sqrt(2.0)

    def intensity_sigma(self, convention: str = "intensity") -> float:
        return self.intensity_fwhm(convention) / _TWO_SQRT_2LN2

    def field_response(self, offset, convention: str = "intensity"):
        """H at ``offset`` from the slit center frequency."""
        sig = self.intensity_sigma(convention)
        return self.alpha * np.exp(-np.asarray(offset, dtype=float) ** 2 / (4.0 * sig ** 2))

    def intensity_response(self, offset, convention: str = "intensity"):
        sig = self.intensity_sigma(convention)
        return self.alpha ** 2 * np.exp(-np.asarray(offset, dtype=float) ** 2 / (2.0 * sig ** 2))

    def intensity_integral(self, convention: str = "intensity") -> float:
        """integral of |H|^2 over frequency, closed form."""
        sig = self.intensity_sigma(convention)
        return self.alpha ** 2 * sig * np.sqrt(2.0 * np.pi)

    def passband_halfwidth(self, convention: str = "intensity") -> float:
        return _PASSBAND_FWHMS * self.intensity_fwhm(convention)


def _check_convention(convention):
    if convention not in FWHM_CONVENTIONS:
        raise ConfigurationError(
            f"unknown FWHM convention {convention!r}; expected one of {FWHM_CONVENTIONS}")


@dataclass(frozen=True)
class H2Profile:
    """Convolution of two filters' intensity responses: a Gaussian lineshape."""

    peak: float
    sigma: float

    def __call__(self, offset):
        return self.peak * np.exp(-np.asarray(offset, dtype=float) ** 2 / (2.0 * self.sigma ** 2))

    @property
    def fwhm(self) -> float:
        return _TWO_SQRT_2LN2 * self.sigma


def h2_profile(filter1: GaussianFilter, filter2: GaussianFilter,
               convention: str = "intensity") -> H2Profile:
    """Sideband lineshape |H1|^2 * |H2|^2 (Gaussian convolution, analytic).

    Variances add, so for two equal filters the result's FWHM is sqrt(2)
    times the individual intensity FWHM; the peak equals the zero-shift
    overlap integral of the two intensity responses.
    """
    s1 = filter1.intensity_sigma(convention)
    s2 = filter2.intensity_sigma(convention)
    sigma = np.sqrt(s1 ** 2 + s2 ** 2)
    peak = (filter1.alpha ** 2 * filter2.alpha ** 2
            * np.sqrt(2.0 * np.pi) * s1 * s2 / sigma)
    return H2Profile(peak=peak, sigma=sigma)


@dataclass(frozen=True)
class CorrelationTrace:
    """Sampled coincidence rate versus relative frequency delta.

    ``total = paired + accidental`` pointwise; ``n_index`` is the sideband
    window each sample falls in; ``clipped`` marks samples beyond the
    truncated sideband support, where the paired term was set to zero.
    """

    delta_axis: np.ndarray
    paired: np.ndarray
    accidental: np.ndarray
    total: np.ndarray
    n_index: np.ndarray
    clipped: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.clipped is None:
            object.__setattr__(self, "clipped", np.zeros(len(self.delta_axis), dtype=bool))

    def validate(self):
        if np.any(self.paired < 0):
            raise ConfigurationError("paired rate must be nonnegative")
        if np.max(np.abs(self.total - (self.paired + self.accidental))) > 1e-12 * max(
                1.0, float(np.max(np.abs(self.total)))):
            raise ConfigurationError("total must equal paired + accidental pointwise")


def sideband_index(delta, omega_m):
    """Window index n = floor(delta/w_m + 1/2); exact half-points round up."""
    return np.floor(np.asarray(delta, dtype=float) / omega_m + 0.5).astype(int)


def singles_rate(amps, mod, filt: GaussianFilter, convention: str = "intensity") -> float:
    """Monochromator count rate: (1/4pi) sum_k |q_k|^2 int |B(w-k w_m)|^2 |H|^2 dw.

    Integrals run over the filter passband by adaptive Simpson. For
    flat-band amplitudes the sideband shifts drop out and the rate reduces
    to |B0|^2/(4pi) times the filter's intensity integral (the coefficients
    sum to one).
    """
    _check_convention(convention)
    center = filt.center
    width = filt.passband_halfwidth(convention)
    powers = np.abs(mod.coeffs) ** 2

    if amps.is_flat:
        b0_sq = abs(amps.b0) ** 2
        peak = filt.alpha ** 2
        atol = 1e-12 * max(peak, 1e-300) * 2.0 * width
        integral = adaptive_simpson(
            lambda w: float(filt.intensity_response(w - center, convention)),
            center - width, center + width, atol)
        return b0_sq / (4.0 * np.pi) * integral * float(powers.sum())

    total = 0.0
    for k, p in zip(mod.k_values, powers):
        if p < _NEGLIGIBLE_WEIGHT:
            continue
        shift = k * mod.omega_m
        lo, hi = center - width - shift, center + width - shift
        if not amps.covers(lo, hi):
            raise DomainError(
                f"filter passband shifted by sideband k={k} lies outside the amplitude grid")

        def integrand(w, _shift=shift):
            b = amps.b_at(w - _shift)
            return float(np.abs(b) ** 2 * filt.intensity_response(w - center, convention))

        peak = integrand(center)
        atol = 1e-12 * max(peak, 1e-300) * 2.0 * width
        total += p * adaptive_simpson(integrand, center - width, center + width, atol)
    return total / (4.0 * np.pi)


def _trace_common(scenario):
    s = compose_nonlocal(scenario.mod1, scenario.mod2)
    conv = scenario.fwhm_convention
    r1 = singles_rate(scenario.amplitudes, scenario.mod1, scenario.filter1, conv)
    r2 = singles_rate(scenario.amplitudes, scenario.mod2, scenario.filter2, conv)
    accidental = r1 * r2 * scenario.gate_ns * 1e-9
    return s, accidental


def coincidence_trace(scenario, delta_axis) -> CorrelationTrace:
    """Closed-form coincidence rate versus delta (the flat-band model).

    Per sample: pick the sideband window n, weight the lineshape by
    c_n = |A0 B0 s_n|^2 / (8 pi), and add the constant accidental floor
    R1*R2*T. Samples beyond the composed coefficients' support get a zero
    paired term and are flagged (with a warning), not rejected.
    """
    delta = np.asarray(delta_axis, dtype=float)
    omega_m = scenario.omega_m
    s, accidental = _trace_common(scenario)
    h2 = h2_profile(scenario.filter1, scenario.filter2, scenario.fwhm_convention)

    amp_factor = abs(scenario.amplitudes.a0 * scenario.amplitudes.b0) ** 2 / (8.0 * np.pi)
    c_table = amp_factor * np.abs(s.coeffs) ** 2

    n_idx = sideband_index(delta, omega_m)
    clipped = np.abs(n_idx) > s.n_max
    if np.any(clipped):
        warnings.warn(
            "delta samples beyond the modulator truncation support; paired term set to zero",
            RuntimeWarning, stacklevel=2)

    paired = np.zeros_like(delta)
    ok = ~clipped
    paired[ok] = c_table[n_idx[ok] + s.n_max] * h2(n_idx[ok] * omega_m - delta[ok])

    accidental_arr = np.full_like(delta, accidental)
    return CorrelationTrace(delta_axis=delta, paired=paired,
                            accidental=accidental_arr, total=paired + accidental_arr,
                            n_index=n_idx, clipped=clipped)


@dataclass(frozen=True)
class PairKernel:
    """Delay-domain kernels F_k(tau) for one delta sample.

    One row per sideband index k with nonzero composed weight q_k r_{n-k};
    ``weights`` holds those products. The kernels must have decayed at the
    tau-grid edges for the delay integral to be trustworthy.
    """

    tau: np.ndarray
    k_values: np.ndarray
    kernels: np.ndarray
    weights: np.ndarray

    def summed(self):
        return self.weights @ self.kernels

    def validate(self, edge_fraction: float = _KERNEL_EDGE_FRACTION):
        mags = np.abs(self.kernels) ** 2
        peaks = mags.max(axis=1)
        live = peaks > 0
        if not np.any(live):
            return
        edges = np.maximum(mags[live, 0], mags[live, -1])
        if np.any(edges > edge_fraction * peaks[live]):
            raise ResolutionError(
                "pair kernel has not decayed at the tau-grid edges; widen the grid")


def make_tau_grid(scenario, points: int = 4096) -> np.ndarray:
    """Default delay grid: power-of-two length, spanning many kernel widths.

    Units are reciprocal GHz (conjugate to the ordinary-frequency axis).
    The half-span of 24 inverse intensity-FWHMs comfortably exceeds both
    the required ten-fold margin and the kernel decay requirement.
    """
    if points < 2 or points & (points - 1) != 0 or points < 4096:
        raise ConfigurationError("tau grid length must be a power of two >= 4096")
    f1 = scenario.filter1.intensity_fwhm(scenario.fwhm_convention)
    f2 = scenario.filter2.intensity_fwhm(scenario.fwhm_convention)
    half = 24.0 / min(f1, f2)
    return np.linspace(-half, half, points)


def _check_tau_grid(tau, scenario):
    tau = np.asarray(tau, dtype=float)
    if tau.ndim != 1 or len(tau) < 16:
        raise ResolutionError("tau grid must be a 1-d array with at least 16 samples")
    steps = np.diff(tau)
    if steps.min() <= 0 or (steps.max() - steps.min()) > 1e-9 * steps.max():
        raise ResolutionError("tau grid must be uniform and increasing")
    f1 = scenario.filter1.intensity_fwhm(scenario.fwhm_convention)
    f2 = scenario.filter2.intensity_fwhm(scenario.fwhm_convention)
    span_needed = 10.0 / min(f1, f2)
    if tau[-1] - tau[0] < span_needed:
        raise ResolutionError(
            "tau grid span must be at least 10x the inverse intensity filter width")
    return tau


def _omega_offsets(scenario):
    """Internal offset grid for the delay kernels: resolves both filters."""
    conv = scenario.fwhm_convention
    f_min = min(scenario.filter1.intensity_fwhm(conv),
                scenario.filter2.intensity_fwhm(conv))
    sigma_max = max(scenario.filter1.intensity_sigma(conv),
                    scenario.filter2.intensity_sigma(conv))
    half = 0.5 * scenario.omega_m + 8.0 * sigma_max
    step = f_min / 40.0
    n = int(np.ceil(2.0 * half / step)) + 1
    return np.linspace(-half, half, n)


def _sideband_weight_table(scenario, n_values):
    """w_k(n) = q_k r_{n-k} for each requested n, over channel-1's k support."""
    q = scenario.mod1
    r = scenario.mod2
    k_vals = q.k_values
    table = np.zeros((len(n_values), len(k_vals)), dtype=complex)
    for row, n in enumerate(n_values):
        for col, k in enumerate(k_vals):
            table[row, col] = q.coefficient(int(k)) * r.coefficient(int(n - k))
    return k_vals, table


def pair_kernel(scenario, delta: float, tau_grid) -> PairKernel:
    """Kernels F_k(tau) for a single delta sample (diagnostic/oracle path).

    F_k is the windowed transform of A(w - k w_m) B(w_p - w + k w_m) seen
    through both filters; ``coincidence_full`` integrates the squared
    magnitude of their weighted sum over delay.
    """
    tau = _check_tau_grid(tau_grid, scenario)
    omega_m = scenario.omega_m
    n = int(sideband_index(np.array([delta]), omega_m)[0])
    k_vals, table = _sideband_weight_table(scenario, [n])
    weights = table[0]
    u = _omega_offsets(scenario)
    du = u[1] - u[0]
    xi = n * omega_m - float(delta)

    conv = scenario.fwhm_convention
    h_window = (scenario.filter1.field_response(u, conv)
                * scenario.filter2.field_response(xi - u, conv))
    amps = scenario.amplitudes
    c1 = scenario.filter1.center
    pump = scenario.pump_frequency

    kernels = np.zeros((len(k_vals), len(tau)), dtype=complex)
    phase = np.exp(1j * np.outer(u, tau))
    for row, k in enumerate(k_vals):
        if abs(weights[row]) < _NEGLIGIBLE_WEIGHT:
            continue
        ab = amps.a_at(c1 + u - k * omega_m) * amps.b_at(pump - c1 - u + k * omega_m)
        g = ab * h_window
        kernels[row] = (du / (4.0 * np.pi)) * (g @ phase)
    return PairKernel(tau=tau, k_values=np.asarray(k_vals), kernels=kernels, weights=weights)


def coincidence_full(scenario, delta_axis, tau_grid=None) -> CorrelationTrace:
    """Full-model coincidence rate: delay-integrated pair kernels.

    Builds the weighted kernel sum on the internal frequency-offset grid,
    transforms to the delay axis, and integrates its squared magnitude over
    the whole grid (the gate is long compared to the kernel decay, so the
    paired integral is effectively ungated; the gate enters only the
    accidental floor). Uses the actual sampled amplitudes when available.
    """
    if tau_grid is None:
        tau_grid = make_tau_grid(scenario)
    tau = _check_tau_grid(tau_grid, scenario)
    delta = np.asarray(delta_axis, dtype=float)
    omega_m = scenario.omega_m
    amps = scenario.amplitudes
    conv = scenario.fwhm_convention
    pump = scenario.pump_frequency
    c1 = scenario.filter1.center

    s, accidental = _trace_common(scenario)
    n_idx = sideband_index(delta, omega_m)
    clipped = np.abs(n_idx) > s.n_max
    if np.any(clipped):
        warnings.warn(
            "delta samples beyond the modulator truncation support; paired term set to zero",
            RuntimeWarning, stacklevel=2)

    u = _omega_offsets(scenario)
    du = u[1] - u[0]
    distinct_n = sorted(set(int(v) for v in n_idx[~clipped]))

    if amps.is_flat:
        # A, B constant: the k-sum collapses to A0 B0 s_n
        ab0 = amps.a0 * amps.b0
        summed = {n: np.full(len(u), ab0 * s.coefficient(n), dtype=complex)
                  for n in distinct_n}
    else:
        k_vals, table = _sideband_weight_table(scenario, distinct_n)
        ab_k = np.zeros((len(k_vals), len(u)), dtype=complex)
        for col, k in enumerate(k_vals):
            lo, hi = c1 + u[0] - k * omega_m, c1 + u[-1] - k * omega_m
            lo_b, hi_b = pump - c1 - u[-1] + k * omega_m, pump - c1 - u[0] + k * omega_m
            if not (amps.covers(lo, hi) and amps.covers(lo_b, hi_b)):
                raise DomainError(
                    f"sideband k={k} needs amplitudes outside the sampled grid")
            ab_k[col] = (amps.a_at(c1 + u - k * omega_m)
                         * amps.b_at(pump - c1 - u + k * omega_m))
        summed = {n: table[row] @ ab_k for row, n in enumerate(distinct_n)}

    h1 = scenario.filter1.field_response(u, conv)
    g_rows = np.zeros((len(delta), len(u)), dtype=complex)
    for i in range(len(delta)):
        if clipped[i]:
            continue
        n = int(n_idx[i])
        xi = n * omega_m - delta[i]
        g_rows[i] = summed[n] * h1 * scenario.filter2.field_response(xi - u, conv)

    phase = np.exp(1j * np.outer(u, tau))
    f_rows = (du / (4.0 * np.pi)) * (g_rows @ phase)
    mags = np.abs(f_rows) ** 2

    peak = mags.max()
    if peak > 0:
        edge = max(mags[:, 0].max(), mags[:, -1].max())
        if edge > _KERNEL_EDGE_FRACTION * peak:
            raise ResolutionError(
                "pair kernels have not decayed at the tau-grid edges; widen the grid")

    paired = np.trapezoid(mags, tau, axis=1)
    accidental_arr = np.full_like(delta, accidental)
    return CorrelationTrace(delta_axis=delta, paired=paired,
                            accidental=accidental_arr, total=paired + accidental_arr,
                            n_index=n_idx, clipped=clipped)


def sideband_areas(trace: CorrelationTrace, min_window_samples: int = 24) -> dict:
    """Integrated paired rate per sideband window, keyed by the index n.

    Windows are the half-open intervals [(n-1/2) w_m, (n+1/2) w_m) already
    encoded in ``n_index``. Every fully covered window sees a congruent set
    of sample offsets, so area ratios between windows are free of
    quadrature bias. Requires a uniform, sufficiently dense delta axis.
    """
    delta = trace.delta_axis
    if len(delta) < 2:
        raise ResolutionError("trace too short to integrate")
    steps = np.diff(delta)
    step = float(steps[0])
    if step <= 0 or (steps.max() - steps.min()) > 1e-9 * abs(step):
        raise ResolutionError("sideband areas need a uniform increasing delta axis")

    n_idx = trace.n_index
    # interior windows must contain enough samples to resolve the lineshape
    boundaries = np.flatnonzero(np.diff(n_idx)) + 1
    if len(boundaries) >= 2:
        run_lengths = np.diff(boundaries)
        if len(run_lengths) and run_lengths.min() < min_window_samples:
            raise ResolutionError(
                f"fewer than {min_window_samples} samples per sideband window")
    elif len(delta) < min_window_samples:
        raise ResolutionError(
            f"fewer than {min_window_samples} samples per sideband window")

    areas = {}
    for n in np.unique(n_idx):
        areas[int(n)] = step * float(trace.paired[n_idx == n].sum())
    return areas
