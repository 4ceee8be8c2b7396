"""Parametric-gain spectral amplitudes for a cw-pumped nonlinear crystal.

A monochromatic pump at frequency ``w_p`` drives pair generation, coupling
the slowly varying envelope at frequency ``w`` to the conjugated envelope at
``w_p - w``. Propagating that 2x2 linear system through the crystal yields
the Bogoliubov-style transfer functions ``A(w)`` and ``B(w)`` of the output
field. Physical consistency requires ``|A|^2 - |B|^2 = 1`` at every
frequency and a cross-symmetry constraint between conjugate frequencies;
both are verified after integration.

Frequencies are ordinary frequencies in GHz throughout, crystal coordinates
in mm. The integrator is fixed-step classical RK4 on conjugate pairs, with
a closed-form constant-coefficient solution available as an oracle.

No attempt is made to model a realistic phase-matching curve; the coupling
and mismatch profiles are caller-supplied, so the simulated spectral shape
is only as faithful as those inputs.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ConvergenceError, DomainError

DEFAULT_STEPS = 256
_UNITARITY_HARD_LIMIT = 1e-6
_SYMMETRY_RTOL = 1e-9


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform frequency grid symmetric about half the pump frequency.

    The symmetry guarantees that the conjugate ``w_p - w`` of every sample
    is itself a sample (index ``n-1-i`` for sample ``i``), which is what
    lets the propagator solve each conjugate pair exactly once.
    """

    center: float
    span: float
    points: int
    pump_frequency: float

    def __post_init__(self):
        if self.points < 2:
            raise ConfigurationError("frequency grid needs at least 2 points")
        if self.span <= 0:
            raise ConfigurationError("frequency grid span must be positive")
        half_pump = 0.5 * self.pump_frequency
        if abs(self.center - half_pump) > 1e-9 * max(1.0, abs(self.pump_frequency)):
            raise ConfigurationError(
                "grid is not conjugate-paired: center must equal pump_frequency/2 "
                f"(center={self.center}, pump/2={half_pump})")

    @property
    def omegas(self):
        return np.linspace(self.center - 0.5 * self.span,
                           self.center + 0.5 * self.span, self.points)

    @property
    def step(self):
        return self.span / (self.points - 1)

    def conjugate_index(self, i):
        return self.points - 1 - i


@dataclass(frozen=True)
class CrystalProfile:
    """Coupling kappa(w) [1/mm] and wave-vector mismatch delta_k(w) [1/mm]
    sampled on a FrequencyGrid, plus the crystal length in mm.

    Pair generation couples ``w`` with ``w_p - w`` through a single
    interaction term, so both profiles must be symmetric under that
    conjugation; ``propagate_envelopes`` rejects profiles that are not.
    """

    kappa: np.ndarray
    delta_k: np.ndarray
    length: float

    def __post_init__(self):
        object.__setattr__(self, "kappa", np.asarray(self.kappa, dtype=complex))
        object.__setattr__(self, "delta_k", np.asarray(self.delta_k, dtype=float))
        if self.kappa.ndim != 1 or self.delta_k.ndim != 1:
            raise ConfigurationError("kappa and delta_k must be 1-d samples")
        if self.kappa.shape != self.delta_k.shape:
            raise ConfigurationError("kappa and delta_k sample counts differ")
        if self.length <= 0:
            raise ConfigurationError("crystal length must be positive")

    @classmethod
    def constant(cls, grid: FrequencyGrid, kappa0, delta_k0, length):
        """Uniform profile over the whole grid (the analytically solvable case)."""
        n = grid.points
        return cls(np.full(n, kappa0, dtype=complex),
                   np.full(n, float(delta_k0)), float(length))


@dataclass(frozen=True)
class SpectralAmplitudes:
    """Transfer functions A(w), B(w) of the crystal output field.

    ``a``/``b`` are complex samples on ``grid``; ``a0``/``b0`` are the
    flat-band constants used by the closed-form coincidence model. A purely
    flat-band instance (``grid is None``) carries only the constants.
    """

    a0: complex
    b0: complex
    grid: FrequencyGrid | None = None
    a: np.ndarray | None = field(default=None, repr=False)
    b: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if (self.grid is None) != (self.a is None) or (self.a is None) != (self.b is None):
            raise ConfigurationError("sampled amplitudes need grid, a and b together")
        if self.a is not None:
            object.__setattr__(self, "a", np.asarray(self.a, dtype=complex))
            object.__setattr__(self, "b", np.asarray(self.b, dtype=complex))
            if len(self.a) != self.grid.points or len(self.b) != self.grid.points:
                raise ConfigurationError("amplitude sample counts do not match grid")

    @classmethod
    def flat(cls, a0, b0):
        """Flat-band shortcut: A and B treated as constant near the slit."""
        return cls(a0=complex(a0), b0=complex(b0))

    @property
    def is_flat(self):
        return self.grid is None

    def a_at(self, omega):
        """A(w) by linear interpolation (constant a0 for flat instances)."""
        if self.is_flat:
            return np.full_like(np.asarray(omega, dtype=float), self.a0, dtype=complex)
        return self._interp(self.a, omega)

    def b_at(self, omega):
        if self.is_flat:
            return np.full_like(np.asarray(omega, dtype=float), self.b0, dtype=complex)
        return self._interp(self.b, omega)

    def _interp(self, values, omega):
        omega = np.asarray(omega, dtype=float)
        grid_w = self.grid.omegas
        if omega.min() < grid_w[0] - 1e-9 or omega.max() > grid_w[-1] + 1e-9:
            raise DomainError("requested frequency lies outside the amplitude grid")
        re = np.interp(omega, grid_w, values.real)
        im = np.interp(omega, grid_w, values.imag)
        return re + 1j * im

    def covers(self, lo, hi):
        """True when [lo, hi] lies inside the sampled grid (always for flat)."""
        if self.is_flat:
            return True
        w = self.grid.omegas
        return w[0] <= lo and hi <= w[-1]

    def __eq__(self, other):
        if not isinstance(other, SpectralAmplitudes):
            return NotImplemented
        if self.a0 != other.a0 or self.b0 != other.b0 or self.grid != other.grid:
            return False
        if self.is_flat and other.is_flat:
            return True
        if self.is_flat != other.is_flat:
            return False
        return bool(np.array_equal(self.a, other.a) and np.array_equal(self.b, other.b))

    def unitarity_residual(self):
        """max over samples of | |A|^2 - |B|^2 - 1 | (flat: uses a0, b0)."""
        if self.is_flat:
            return abs(abs(self.a0) ** 2 - abs(self.b0) ** 2 - 1.0)
        res = np.abs(np.abs(self.a) ** 2 - np.abs(self.b) ** 2 - 1.0)
        return float(res.max())

    def symmetry_residual(self):
        """max over conjugate pairs of |A(w)B(w_p-w) - B(w)A(w_p-w)|."""
        if self.is_flat:
            return 0.0
        rev_a = self.a[::-1]
        rev_b = self.b[::-1]
        return float(np.abs(self.a * rev_b - self.b * rev_a).max())

    def validate(self, tol=1e-9):
        if self.unitarity_residual() > tol:
            raise ConfigurationError("amplitude unitarity violated beyond tolerance")
        if self.symmetry_residual() > tol:
            raise ConfigurationError("conjugate-pair symmetry violated beyond tolerance")
        if abs(abs(self.a0) ** 2 - abs(self.b0) ** 2 - 1.0) > tol:
            raise ConfigurationError("flat-band constants violate |A0|^2-|B0|^2=1")


def _pair_derivative(z, alpha, beta, kappa, delta_k):
    c = 1j * kappa * np.exp(1j * delta_k * z)
    return c * np.conj(beta), c * np.conj(alpha)


def propagate_envelopes(profile: CrystalProfile, grid: FrequencyGrid,
                        steps: int = DEFAULT_STEPS) -> SpectralAmplitudes:
    """Integrate the coupled envelope equations from z=0 to z=L.

    Each conjugate pair (w, w_p - w) evolves under a 2x2 system whose
    fundamental solution starts at the identity (A=1, B=0). Fixed-step
    classical RK4 is used, with the mismatch exponential evaluated at the
    substep midpoints so the z-dependent coefficient does not degrade the
    fourth-order accuracy. Every pair is solved once and both grid entries
    filled, which makes the cross-symmetry constraint exact by construction.

    Raises ConfigurationError for unpaired grids or asymmetric profiles and
    ConvergenceError when the unitarity residual after integration exceeds
    1e-6 (increase ``steps``).
    """
    if steps < 16:
        raise ConfigurationError("propagation needs at least 16 RK4 steps")
    n = grid.points
    if len(profile.kappa) != n:
        raise ConfigurationError("profile sample count does not match grid")

    kap = profile.kappa
    dk = profile.delta_k
    scale_k = max(1.0, float(np.abs(kap).max()))
    scale_d = max(1.0, float(np.abs(dk).max()))
    if (np.abs(kap - kap[::-1]).max() > _SYMMETRY_RTOL * scale_k
            or np.abs(dk - dk[::-1]).max() > _SYMMETRY_RTOL * scale_d):
        raise ConfigurationError(
            "kappa and delta_k must be symmetric under w -> w_p - w "
            "(a single interaction term couples each conjugate pair)")

    half = (n + 1) // 2
    idx = np.arange(half)
    pair_kap = kap[idx]
    pair_dk = dk[idx]

    alpha = np.ones(half, dtype=complex)
    beta = np.zeros(half, dtype=complex)
    h = profile.length / steps
    z = 0.0
    for _ in range(steps):
        da1, db1 = _pair_derivative(z, alpha, beta, pair_kap, pair_dk)
        da2, db2 = _pair_derivative(z + 0.5 * h, alpha + 0.5 * h * da1,
                                    beta + 0.5 * h * db1, pair_kap, pair_dk)
        da3, db3 = _pair_derivative(z + 0.5 * h, alpha + 0.5 * h * da2,
                                    beta + 0.5 * h * db2, pair_kap, pair_dk)
        da4, db4 = _pair_derivative(z + h, alpha + h * da3,
                                    beta + h * db3, pair_kap, pair_dk)
        alpha = alpha + (h / 6.0) * (da1 + 2.0 * da2 + 2.0 * da3 + da4)
        beta = beta + (h / 6.0) * (db1 + 2.0 * db2 + 2.0 * db3 + db4)
        z += h

    a = np.empty(n, dtype=complex)
    b = np.empty(n, dtype=complex)
    a[idx] = alpha
    a[n - 1 - idx] = alpha
    b[idx] = beta
    b[n - 1 - idx] = beta

    residual = np.abs(np.abs(a) ** 2 - np.abs(b) ** 2 - 1.0).max()
    if residual > _UNITARITY_HARD_LIMIT:
        raise ConvergenceError(
            f"unitarity residual {residual:.3e} after integration; increase steps")

    mid = n // 2
    return SpectralAmplitudes(a0=a[mid], b0=b[mid], grid=grid, a=a, b=b)


def analytic_amplitudes(kappa0, delta_k0, length):
    """Closed-form (A0, B0) for constant coupling and mismatch.

    The gain parameter is g = sqrt(|kappa0|^2 - (delta_k/2)^2); the solution
    switches continuously between the hyperbolic and trigonometric branches
    as g^2 changes sign, with the g -> 0 limit taken by series. Serves as
    the regression oracle for ``propagate_envelopes``.
    """
    kappa0 = complex(kappa0)
    delta_k0 = float(delta_k0)
    length = float(length)
    g_sq = abs(kappa0) ** 2 - 0.25 * delta_k0 ** 2
    g = np.sqrt(complex(g_sq))
    gl = g * length
    if abs(gl) < 1e-8:
        # sinh(gL)/g and cosh(gL) by series; keeps the g -> 0 limit smooth
        sinhc = length * (1.0 + gl * gl / 6.0)
        cosh_gl = 1.0 + gl * gl / 2.0
    else:
        sinhc = np.sinh(gl) / g
        cosh_gl = np.cosh(gl)
    phase = np.exp(0.5j * delta_k0 * length)
    a0 = phase * (cosh_gl - 0.5j * delta_k0 * sinhc)
    b0 = phase * (1j * kappa0 * sinhc)
    return complex(a0), complex(b0)


def amplitudes_from_rate(r2_measured, filter2, convention="intensity"):
    """Back out flat-band (A0, B0) from a measured singles rate in channel 2.

    Inverts the flat-band singles-rate expression
    ``R2 = |B0|^2 / (4 pi) * integral |H2|^2`` for |B0| and applies the
    commutator-preserving condition |A0|^2 - |B0|^2 = 1 for |A0|. Phases are
    set to zero: the coincidence model only involves |A0 B0|^2 and |B0|^2.
    """
    if r2_measured <= 0:
        raise DomainError("measured rate must be positive")
    h2_integral = filter2.intensity_integral(convention)
    if h2_integral <= 0:
        raise DomainError("filter 2 must have positive transmission (alpha > 0)")
    b0_sq = 4.0 * np.pi * float(r2_measured) / h2_integral
    b0 = np.sqrt(b0_sq)
    # a0 from the rounded b0 keeps |A0|^2-|B0|^2 = 1 exact under serialization
    a0 = np.sqrt(1.0 + b0 * b0)
    return complex(a0), complex(b0)
