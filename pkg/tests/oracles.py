"""Independent reference implementations used only by the tests.

These are deliberately naive (explicit loops, textbook formulas) so they
share no code path with the package under test.
"""

from __future__ import annotations

import numpy as np


def conv1d_loops(x, w, b, stride, pad):
    c_in, length = x.shape
    c_out, _, k = w.shape
    xp = np.zeros((c_in, length + 2 * pad))
    xp[:, pad:pad + length] = x
    l_out = (length + 2 * pad - k) // stride + 1
    y = np.zeros((c_out, l_out))
    for o in range(c_out):
        for j in range(l_out):
            acc = 0.0 if b is None else b[o]
            for i in range(c_in):
                for kk in range(k):
                    acc += w[o, i, kk] * xp[i, j * stride + kk]
            y[o, j] = acc
    return y


def conv_transpose1d_loops(x, w, b, stride, pad):
    """Scatter-add definition; ``w`` has layout (in, out, k)."""
    c_in, length = x.shape
    _, c_out, k = w.shape
    full = (length - 1) * stride + k
    y = np.zeros((c_out, full))
    for i in range(c_in):
        for j in range(length):
            for o in range(c_out):
                for kk in range(k):
                    y[o, j * stride + kk] += x[i, j] * w[i, o, kk]
    y = y[:, pad:full - pad]
    if b is not None:
        y = y + np.asarray(b)[:, None]
    return y


def ssim_loops(x, y, window=11, k1=0.01, k2=0.03):
    """SSIM from its definition, one window position at a time."""
    vals = []
    for lx, ly in zip(np.atleast_2d(x), np.atleast_2d(y)):
        r = ly.max() - ly.min()
        r = r if r > 0 else 1.0
        c1, c2 = (k1 * r) ** 2, (k2 * r) ** 2
        for s in range(len(lx) - window + 1):
            a, b = lx[s:s + window], ly[s:s + window]
            mx, my = sum(a) / window, sum(b) / window
            vx = sum((v - mx) ** 2 for v in a) / window
            vy = sum((v - my) ** 2 for v in b) / window
            cov = sum((p - mx) * (q - my) for p, q in zip(a, b)) / window
            vals.append(((2 * mx * my + c1) * (2 * cov + c2)) / ((mx ** 2 + my ** 2 + c1) * (vx + vy + c2)))
    return float(np.mean(vals))


def central_diff(f, arr, h=1e-5, indices=None):
    """Numerical gradient of scalar ``f()`` w.r.t. entries of ``arr`` (perturbed in place)."""
    grad = np.zeros_like(arr)
    idx = indices if indices is not None else list(np.ndindex(arr.shape))
    for i in idx:
        old = arr[i]
        arr[i] = old + h
        fp = f()
        arr[i] = old - h
        fm = f()
        arr[i] = old
        grad[i] = (fp - fm) / (2 * h)
    return grad


def rel_err(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-12))


def count_peaks(trace, min_height, min_distance):
    """Local maxima above ``min_height`` at least ``min_distance`` samples apart."""
    peaks = []
    for i in range(1, len(trace) - 1):
        if trace[i] >= min_height and trace[i] >= trace[i - 1] and trace[i] > trace[i + 1]:
            if peaks and i - peaks[-1] < min_distance:
                if trace[i] > trace[peaks[-1]]:
                    peaks[-1] = i
                continue
            peaks.append(i)
    return len(peaks)


def band_energy_fraction(x, fs, lo, hi):
    spec = np.abs(np.fft.rfft(x)) ** 2
    f = np.fft.rfftfreq(len(x), 1 / fs)
    total = spec.sum()
    return float(spec[(f >= lo) & (f <= hi)].sum() / total) if total > 0 else 0.0


def tone_gain(y, fs, freq):
    """Amplitude of ``freq`` in ``y`` by DFT projection (integer cycles assumed)."""
    n = len(y)
    t = np.arange(n) / fs
    return float(2 * abs(np.sum(y * np.exp(-2j * np.pi * freq * t))) / n)
