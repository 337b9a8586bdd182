"""Correlation data: exponential series, field kernels and wave-packet integrals."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

RATE_TOL = 1e-14
ERFI_DOMAIN = 30.0


@dataclass(frozen=True)
class ExponentialSeries:
    """A function ``sum_k a_k exp(-b_k lag)`` of a non-negative lag."""

    amplitudes: tuple = ()
    rates: tuple = ()

    def __post_init__(self):
        amps = tuple(complex(a) for a in self.amplitudes)
        rates = tuple(complex(b) for b in self.rates)
        if len(amps) != len(rates):
            raise ValueError("amplitudes and rates must have equal length")
        for b in rates:
            if b.real < -RATE_TOL:
                raise ValueError(f"rate {b} grows in time; real parts must be non-negative")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "rates", rates)

    @classmethod
    def from_terms(cls, terms) -> "ExponentialSeries":
        terms = list(terms)
        return cls(tuple(a for a, _ in terms), tuple(b for _, b in terms))

    @property
    def terms(self) -> list[tuple[complex, complex]]:
        return list(zip(self.amplitudes, self.rates))

    def __len__(self) -> int:
        return len(self.amplitudes)

    def __add__(self, other: "ExponentialSeries") -> "ExponentialSeries":
        return ExponentialSeries(self.amplitudes + other.amplitudes, self.rates + other.rates)

    def scaled(self, factor: complex) -> "ExponentialSeries":
        return ExponentialSeries(tuple(factor * a for a in self.amplitudes), self.rates)

    def conjugate(self) -> "ExponentialSeries":
        return ExponentialSeries(tuple(a.conjugate() for a in self.amplitudes),
                                 tuple(b.conjugate() for b in self.rates))

    def __call__(self, lag):
        return eval_series(self, lag)


def eval_series(series: ExponentialSeries, lag):
    """Evaluate an exponential series at ``lag >= 0`` (scalar or array)."""
    lag_arr = np.asarray(lag, dtype=float)
    if np.any(lag_arr < 0):
        raise ValueError("lag must be non-negative")
    total = np.zeros(lag_arr.shape, dtype=complex)
    for a, b in zip(series.amplitudes, series.rates):
        total = total + a * np.exp(-b * lag_arr)
    return complex(total) if total.ndim == 0 else total


def single_mode_correlation(coupling: float, frequency: float, decay: float) -> ExponentialSeries:
    """``coupling**2 exp(-(i frequency + decay) t)``, the zero-temperature damped-mode correlation."""
    return ExponentialSeries((coupling ** 2,), (decay + 1j * frequency,))


def real_imag_split(series: ExponentialSeries) -> tuple[ExponentialSeries, ExponentialSeries]:
    """Exponential series for the real and imaginary parts of ``series`` on real lags."""
    conj = series.conjugate()
    real = series.scaled(0.5) + conj.scaled(0.5)
    imag = series.scaled(-0.5j) + conj.scaled(0.5j)
    return real, imag


@dataclass
class CorrelationTable:
    """Correlation series indexed by pairs of interaction-superoperator labels."""

    n_alpha: int
    entries: dict = field(default_factory=dict)

    def __getitem__(self, key) -> ExponentialSeries:
        a2, a1 = key
        if not (0 <= a2 < self.n_alpha and 0 <= a1 < self.n_alpha):
            raise IndexError(f"label pair {key} outside {self.n_alpha} labels")
        return self.entries.get((a2, a1), ExponentialSeries())

    def __setitem__(self, key, value: ExponentialSeries):
        a2, a1 = key
        if not (0 <= a2 < self.n_alpha and 0 <= a1 < self.n_alpha):
            raise IndexError(f"label pair {key} outside {self.n_alpha} labels")
        self.entries[(a2, a1)] = value


@dataclass(frozen=True)
class CrossCorrelation:
    """Kernel between one field and one coupling label.

    Either an exponential series in the lag, or an arbitrary callable of the
    coupling time ``tau``. Only dynamic fields need the exponential form.
    """

    series: ExponentialSeries | None = None
    fn: Callable[[float], complex] | None = None

    def __post_init__(self):
        if (self.series is None) == (self.fn is None):
            raise ValueError("give exactly one of series or fn")

    @property
    def is_exponential(self) -> bool:
        return self.series is not None

    def __call__(self, arg) -> complex:
        if self.series is not None:
            return eval_series(self.series, arg)
        return complex(self.fn(arg))


def faddeeva_w(z: complex) -> complex:
    """Scaled complex error function ``w(z) = exp(-z^2) erfc(-i z)``.

    In the upper half plane the Laplace continued fraction is used whenever
    it converges to full precision (``Im z >= 2`` or far out along the real
    axis); otherwise ``w`` is rebuilt from the Erfi Taylor series. The lower
    half plane follows from ``w(z) = 2 exp(-z^2) - w(-z)``.
    """
    z = complex(z)
    if z.imag < 0:
        if z.imag ** 2 - z.real ** 2 > 700.0:
            raise OverflowError(f"w({z}) overflows double precision")
        return 2.0 * cmath.exp(-z * z) - faddeeva_w(-z)
    x, y = z.real, z.imag
    if y >= 2.0 or x * x - y * y > 36.0:
        return _faddeeva_cf(z)
    return cmath.exp(-z * z) * (1.0 + 1j * _erfi_series(z))


def faddeeva_erfi(z: complex) -> complex:
    """Imaginary error function ``Erfi(z) = -i erf(i z)`` for ``|z| < 30``.

    In the strip ``|Im z| < 2`` near the origin a Taylor series is summed,
    where cancellation between terms stays below ``exp(8)``. Elsewhere the
    value follows from the continued fraction for ``w`` in the upper half
    plane.
    Raises ``OverflowError`` when the value is not representable.
    """
    z = complex(z)
    if not abs(z) < ERFI_DOMAIN:
        raise ValueError(f"|z| = {abs(z):.3g} outside the supported domain |z| < {ERFI_DOMAIN}")
    x, y = z.real, z.imag
    if x * x - y * y > 700.0:
        raise OverflowError(f"Erfi({z}) overflows double precision")
    if abs(y) < 2.0 and x * x - y * y <= 36.0:
        return _erfi_series(z)
    # Erfi(z) = -i + i exp(z^2) w(-z) and w(-z) = 2 exp(-z^2) - w(z)
    if y <= 0:
        return -1j + 1j * cmath.exp(z * z) * _faddeeva_cf(-z)
    return 1j - 1j * cmath.exp(z * z) * _faddeeva_cf(z)


def _erfi_series(z: complex) -> complex:
    z2 = z * z
    term = z
    total = z
    n = 0
    while n < 4000:
        n += 1
        term *= z2 / n
        contrib = term / (2 * n + 1)
        total += contrib
        if abs(contrib) <= 1e-17 * abs(total) and n > abs(z2):
            break
    return 2.0 / math.sqrt(math.pi) * total


def _faddeeva_cf(z: complex, depth: int = 60) -> complex:
    r = 0j
    for k in range(depth, 0, -1):
        r = (0.5 * k) / (z - r)
    return 1j / math.sqrt(math.pi) / (z - r)


@dataclass(frozen=True)
class WavePacket:
    """Gaussian one-photon input in the right-moving branch of the waveguide.

    The momentum profile is ``g_in(p) = exp(-(p - p_in)^2 / (2 sigma_in^2)) /
    (sqrt(2 pi) sigma_in)`` and the photon starts centred at ``x_in``.
    """

    x_in: float
    p_in: float
    sigma_in: float
    c: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        if not self.sigma_in > 0:
            raise ValueError("sigma_in must be positive")
        if not self.c > 0:
            raise ValueError("c must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")

    @property
    def zeta_in(self) -> float:
        return 0.5 / self.sigma_in

    def profile(self, p):
        p = np.asarray(p, dtype=float)
        return np.exp(-((p - self.p_in) ** 2) / (2 * self.sigma_in ** 2)) / (
            math.sqrt(2 * math.pi) * self.sigma_in)

    def amplitude(self, p):
        """Initial momentum amplitude ``sqrt(g_in(p)) exp(-i p x_in)``."""
        p = np.asarray(p, dtype=float)
        return np.sqrt(self.profile(p)) * np.exp(-1j * p * self.x_in)


def omega_in(w: WavePacket, sign: int, t: float) -> complex:
    """Input drive frequency ``Omega_in_sign(t)``.

    Defined by ``i sqrt(gamma c / 2 pi) int dp sqrt(g_in) exp(-+i (p x_in + c|p| t))``,
    evaluated in closed form. ``sign`` is +1 or -1.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if t < 0:
        raise ValueError("t must be non-negative")
    if w.gamma == 0:
        return 0j
    # Each Gaussian-times-(1 -+ i Erfi) factor of the closed form equals
    # exp(-Y^2) w(.) with Y = p_in / (2 sigma_in); this form cannot overflow.
    zeta, y_shift = w.zeta_in, w.p_in / (2 * w.sigma_in)
    k_in = (2 * math.pi) ** -0.25 * math.sqrt(w.gamma * w.c / zeta) / 2
    x_fwd = (w.x_in + w.c * t) / (2 * zeta)
    x_bwd = (w.x_in - w.c * t) / (2 * zeta)
    bracket = (faddeeva_w(-sign * x_fwd - 1j * y_shift)
               + faddeeva_w(sign * x_bwd + 1j * y_shift))
    return 1j * k_in * math.exp(-y_shift ** 2) * bracket


def omega_out_kick_times(x_out: float, t_out: float, c: float) -> list[tuple[float, float]]:
    """Kick times and weights for a position-resolved output field.

    The output kernel is a pair of delta functions at ``t_out -+ x_out / c``;
    only the one inside ``[0, t_out]`` acts. A delta on an interval endpoint
    counts with weight 1/2, and at ``x_out = 0`` both deltas sit at ``t_out``
    and are merged into one unit-weight kick. Returns ``[(time, weight)]``.
    """
    if t_out < 0:
        raise ValueError("t_out must be non-negative")
    if not c > 0:
        raise ValueError("c must be positive")
    delay = abs(x_out) / c
    if t_out == 0:
        return []
    if delay == 0:
        return [(float(t_out), 1.0)]
    t_star = t_out - delay
    if t_star < -1e-12 * max(1.0, t_out):
        return []
    if abs(t_star) <= 1e-12 * max(1.0, t_out):
        return [(0.0, 0.5)]
    return [(float(t_star), 1.0)]


def free_field_overlap(w: WavePacket, x_out: float, t_out: float, dx: float) -> complex:
    """Free correlation between the output creation field at ``(x_out, t_out)``
    and the input annihilation field, for an output bin of width ``dx``."""
    if not dx > 0:
        raise ValueError("dx must be positive")
    zeta, y_shift = w.zeta_in, w.p_in / (2 * w.sigma_in)
    d_fwd = (x_out - w.x_in + w.c * t_out) / (2 * zeta)
    d_bwd = (x_out - w.x_in - w.c * t_out) / (2 * zeta)
    pref = math.sqrt(dx / zeta) / (2 * (2 * math.pi) ** 0.25) * math.exp(-y_shift ** 2)
    return pref * (faddeeva_w(-d_bwd - 1j * y_shift) + faddeeva_w(d_fwd + 1j * y_shift))
