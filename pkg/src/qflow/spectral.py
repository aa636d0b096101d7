"""Fourier pseudospectral toolkit on a uniform grid of [0, 2*pi).

Grid fields are plain 1-d ``numpy`` arrays of even length ``N >= 16`` holding
samples at ``theta_j = 2*pi*j/N``.  Spectra are the one-sided normalised
coefficients ``c_k = rfft(f)[k] / N`` for ``k = 0..N/2``; the negative modes
are implied by conjugate symmetry.  With this normalisation ``cos(3*theta)``
has ``c_3 = 1/2`` and the Nyquist entry stores the full amplitude of
``cos(N*theta/2)``.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import PositivityError

TWO_PI = 2.0 * np.pi
MIN_POINTS = 16
MAX_DERIVATIVE_ORDER = 8
# fractional powers refuse anything at or below this
POSITIVITY_FLOOR = 1e-8
# largest relative size a Fourier coefficient may have and still count as round-off
NOISE_FLOOR = 1e-14


def check_field(f) -> np.ndarray:
    """Validate and return ``f`` as a float grid field."""
    f = np.asarray(f, dtype=float)
    if f.ndim != 1:
        raise ValueError(f"grid field must be one-dimensional, got shape {f.shape}")
    n = f.size
    if n < MIN_POINTS or n % 2:
        raise ValueError(f"grid size must be even and >= {MIN_POINTS}, got {n}")
    if not np.all(np.isfinite(f)):
        raise ValueError("grid field contains non-finite samples")
    return f


def check_positive(f, name: str = "field", floor: float = POSITIVITY_FLOOR) -> None:
    fmin = float(np.min(f))
    if not fmin > floor:
        raise PositivityError(f"{name} must stay above {floor:g}; min is {fmin:.6g}")


def grid(n: int) -> np.ndarray:
    return TWO_PI * np.arange(n) / n


def wavenumbers(n: int) -> np.ndarray:
    return np.arange(n // 2 + 1, dtype=float)


def to_spectrum(f) -> np.ndarray:
    f = check_field(f)
    return np.fft.rfft(f) / f.size


def to_grid(c, n: int | None = None) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    if n is None:
        n = 2 * (c.size - 1)
    return np.fft.irfft(c * n, n)


def resample_spectrum(c: np.ndarray, n_new: int) -> np.ndarray:
    """Zero-pad or truncate one-sided coefficients to a grid of ``n_new`` points.

    The Nyquist mode is split on padding and folded back on truncation so a
    real field survives a pad/truncate round trip unchanged.
    """
    n_old = 2 * (c.size - 1)
    out = np.zeros(n_new // 2 + 1, dtype=complex)
    if n_new == n_old:
        out[:] = c
    elif n_new > n_old:
        h = n_old // 2
        out[:h] = c[:h]
        out[h] = 0.5 * c[h].real
    else:
        h = n_new // 2
        out[:h] = c[:h]
        out[h] = 2.0 * c[h].real
    return out


def interpolate(f, n_new: int) -> np.ndarray:
    """Band-limited interpolation of ``f`` onto ``n_new`` uniform points."""
    return to_grid(resample_spectrum(to_spectrum(f), n_new), n_new)


def evaluate(f, x) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``f`` at arbitrary angles."""
    c = to_spectrum(f)
    n = 2 * (c.size - 1)
    x = np.asarray(x, dtype=float)
    k = np.arange(n // 2)
    phase = np.exp(1j * np.multiply.outer(x, k))
    w = np.full(n // 2, 2.0)
    w[0] = 1.0
    vals = (phase @ (w * c[:-1])).real
    return vals + c[-1].real * np.cos(0.5 * n * x)


def derivative(f, order: int = 1, clean: bool = True) -> np.ndarray:
    """Spectral derivative; odd orders drop the Nyquist mode.

    With ``clean`` the round-off floor of the spectrum is removed first (see
    :func:`denoise`).
    """
    _check_order(order)
    f = check_field(f)
    if order == 0:
        return f.copy()
    c = np.fft.rfft(f)
    return _apply_multiplier(denoise(c) if clean else c, order, f.size)


def _check_order(order) -> None:
    if not isinstance(order, (int, np.integer)) or order < 0:
        raise ValueError(f"derivative order must be a non-negative integer, got {order!r}")
    if order > MAX_DERIVATIVE_ORDER:
        raise ValueError(f"derivative order {order} exceeds {MAX_DERIVATIVE_ORDER}")


def _apply_multiplier(c: np.ndarray, order: int, n: int) -> np.ndarray:
    mult = (1j * wavenumbers(n)) ** order
    if order % 2:
        mult[-1] = 0.0
    return np.fft.irfft(c * mult, n)


def denoise(c: np.ndarray, rel_tol: float = NOISE_FLOOR) -> np.ndarray:
    """Zero the coefficients that sit at the round-off floor of the transform.

    The floor is read off the top quarter of the spectrum (pure round-off for
    a resolved field) and capped at ``rel_tol * max|c|`` so genuine content in
    high modes is never discarded wholesale.  Round-off from evaluating
    trigonometric functions on the grid is not white (it can peak at ``n/4``),
    so anything below ``2 eps max|c|`` also counts as noise: a coefficient
    that small is not known to better than its own size.
    """
    c = np.array(c, dtype=complex)
    mag = np.abs(c)
    top = mag[(3 * (mag.size - 1)) // 4 :]
    peak = float(mag.max())
    noise = max(4.0 * float(top.max()), 2.0 * np.finfo(float).eps * peak)
    floor = min(noise, rel_tol * peak)
    c[mag <= floor] = 0.0
    return c


def derivatives(f, max_order: int, clean: bool = True) -> list[np.ndarray]:
    """``[f, f', ..., f^(max_order)]`` from a single transform.

    With ``clean`` the spectrum is passed through :func:`denoise` first, so
    round-off in modes the field does not occupy is not amplified by
    ``k**order``.  Every returned array, the zeroth included, comes from the
    same cleaned spectrum.
    """
    _check_order(max_order)
    f = check_field(f)
    c = np.fft.rfft(f)
    if clean:
        c = denoise(c)
    return [_apply_multiplier(c, k, f.size) for k in range(max_order + 1)]


def bandwidth(f, rel_tol: float = 1e-13) -> int:
    """Highest wavenumber whose coefficient exceeds ``rel_tol * max|c|``."""
    mag = np.abs(np.fft.rfft(check_field(f)))
    nz = np.flatnonzero(mag > rel_tol * mag.max())
    return int(nz[-1]) if nz.size else 0


def integrate(f) -> float:
    """Uniform-weight quadrature of ``f`` over one period."""
    f = check_field(f)
    return float(TWO_PI * np.mean(f))


def pointwise_power(f, p: float) -> np.ndarray:
    """Nodal ``f**p``; fractional or negative exponents need ``min(f) > 1e-8``."""
    f = check_field(f)
    p = float(p)
    if not (p.is_integer() and p >= 0):
        check_positive(f, "base of fractional power")
    return f ** p


def measure_integral(f, v) -> float:
    """``integral f dsigma`` with ``dsigma = v**(-2/3) dtheta``."""
    v = check_field(v)
    check_positive(v, "conformal factor")
    f = check_field(f)
    return integrate(f * pointwise_power(v, -2.0 / 3.0))


def _antiderivative_parts(f):
    """Mean slope and the periodic part's spectrum of ``integral_0^theta f``."""
    c = to_spectrum(f)
    k = wavenumbers(2 * (c.size - 1))
    anti = np.zeros_like(c)
    anti[1:-1] = c[1:-1] / (1j * k[1:-1])
    return c[0].real, anti


def cumulative_integral(f) -> np.ndarray:
    """Spectral antiderivative ``F(theta_j) = integral_0^theta_j f``, including the mean drift."""
    f = check_field(f)
    slope, anti = _antiderivative_parts(f)
    periodic = to_grid(anti, f.size)
    return slope * grid(f.size) + periodic - periodic[0]


def arclength_map(v) -> tuple[np.ndarray, float]:
    """Return ``sigma(theta_j)`` and the total length for ``dsigma = v**(-2/3) dtheta``."""
    v = check_field(v)
    check_positive(v, "conformal factor")
    density = pointwise_power(v, -2.0 / 3.0)
    sigma = cumulative_integral(density)
    return sigma, integrate(density)


def arclength_resample(v, f, newton_steps: int = 3) -> np.ndarray:
    """Samples of ``f`` at the points ``theta(sigma_j)`` with ``sigma_j`` uniform in ``[0, L)``.

    ``sigma(theta)`` is inverted with a monotone cubic through the nodes of
    the spectral antiderivative, then polished by Newton steps on the
    trigonometric interpolant of ``sigma`` (its slope is the density, which
    is strictly positive).  ``f`` is evaluated through its interpolant.
    """
    v = check_field(v)
    f = check_field(f)
    n = v.size
    density = pointwise_power(v, -2.0 / 3.0)
    check_positive(density, "arclength density")
    sigma = cumulative_integral(density)
    length = integrate(density)
    theta = grid(n)
    s_ext = np.concatenate([sigma - length, sigma, [length]])
    t_ext = np.concatenate([theta - TWO_PI, theta, [TWO_PI]])
    targets = length * np.arange(n) / n
    x = PchipInterpolator(s_ext, t_ext)(targets)

    slope, anti = _antiderivative_parts(density)
    anti_grid = to_grid(anti, n)
    offset = anti_grid[0]
    for _ in range(newton_steps):
        s_of_x = slope * x + evaluate(anti_grid, x) - offset
        x = x - (s_of_x - targets) / evaluate(density, x)
    return evaluate(f, x)
