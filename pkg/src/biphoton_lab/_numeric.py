import numpy as np
from scipy.signal import czt


def half_max_width(x, y, peak_index=None):
    """Full width at half maximum around a peak, by linear interpolation.

    Walks outwards from the peak to the first samples below half maximum.
    Returns nan if either side never drops below half maximum.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    i0 = int(np.argmax(y)) if peak_index is None else int(peak_index)
    half = 0.5 * y[i0]

    below = np.nonzero(y[i0:] < half)[0]
    if below.size == 0:
        return float("nan")
    j = i0 + below[0]
    right = x[j - 1] + (half - y[j - 1]) * (x[j] - x[j - 1]) / (y[j] - y[j - 1])

    below = np.nonzero(y[: i0 + 1][::-1] < half)[0]
    if below.size == 0:
        return float("nan")
    j = i0 - below[0]
    left = x[j] + (half - y[j]) * (x[j + 1] - x[j]) / (y[j + 1] - y[j])
    return float(right - left)


def uniform_fourier_sum(values, t0, dt, f0, df, m, sign=+1):
    """Evaluate sum_j values[j] * exp(sign * i * (f0 + k df) * (t0 + j dt)) for k < m.

    Both axes are uniform, so the double sum is a chirp-z transform. Exact up
    to rounding; cost O((n + m) log(n + m)).
    """
    values = np.asarray(values)
    n = values.shape[0]
    j = np.arange(n)
    k = np.arange(m)
    x = values * np.exp(sign * 1j * f0 * dt * j)
    w = np.exp(sign * 1j * df * dt)
    out = czt(x, m=m, w=w, a=1.0)
    return out * np.exp(sign * 1j * (f0 + k * df) * t0)


def direct_fourier_sum(values, t, f, sign=+1, chunk=2048):
    """Reference evaluation of sum_j values[j] exp(sign i f_k t_j); O(n m)."""
    values = np.asarray(values)
    t = np.asarray(t, dtype=float)
    f = np.atleast_1d(np.asarray(f, dtype=float))
    out = np.empty(f.shape[0], dtype=complex)
    for start in range(0, f.shape[0], chunk):
        fk = f[start : start + chunk]
        out[start : start + chunk] = np.exp(sign * 1j * np.outer(fk, t)) @ values
    return out
