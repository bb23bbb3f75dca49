"""Pure-numpy versions of the hot kernels.

Every function here has a twin in ``_kernels.pyx`` with the same signature
and the same arithmetic, so either backend can be selected at import time.
"""
import numpy as np


def thomas_batched(lower, diag, upper, rhs):
    """Solve many independent tridiagonal systems at once.

    All arguments have shape (m, n): system ``k`` is
    ``lower[k, j] x[j-1] + diag[k, j] x[j] + upper[k, j] x[j+1] = rhs[k, j]``.
    ``lower[:, 0]`` and ``upper[:, -1]`` are ignored.

    Returns the solution and a boolean flag that is False when a zero pivot
    was hit.
    """
    lower = np.asarray(lower, dtype=float)
    diag = np.asarray(diag, dtype=float)
    upper = np.asarray(upper, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    m, n = diag.shape
    cp = np.empty((m, n))
    dp = np.empty((m, n))
    ok = True
    beta = diag[:, 0].copy()
    if np.any(beta == 0.0):
        ok = False
        beta = np.where(beta == 0.0, np.nan, beta)
    cp[:, 0] = upper[:, 0] / beta
    dp[:, 0] = rhs[:, 0] / beta
    for j in range(1, n):
        beta = diag[:, j] - lower[:, j] * cp[:, j - 1]
        if np.any(beta == 0.0):
            ok = False
            beta = np.where(beta == 0.0, np.nan, beta)
        cp[:, j] = upper[:, j] / beta
        dp[:, j] = (rhs[:, j] - lower[:, j] * dp[:, j - 1]) / beta
    x = np.empty((m, n))
    x[:, -1] = dp[:, -1]
    for j in range(n - 2, -1, -1):
        x[:, j] = dp[:, j] - cp[:, j] * x[:, j + 1]
    return x, ok


def _pfc_flux(g, alpha):
    """Positive flux-conservative (PFC) flux through right cell faces.

    ``g`` is padded with two ghost cells on the left and one on the right,
    shape (m, n + 3). Entry ``k`` of the result is the flux through the right
    face of padded cell ``k``. ``alpha`` has shape (m, 1), 0 <= alpha < 1.
    """
    gi = g[:, :-1]
    gp = np.empty_like(gi)
    gm = np.empty_like(gi)
    gp[:, :] = g[:, 1:]
    gm[:, 1:] = g[:, :-2]
    gm[:, 0] = g[:, 0]

    dp = gp - gi
    dm = gi - gm
    with np.errstate(divide="ignore", invalid="ignore"):
        eps_p = np.where(dp > 0.0, np.minimum(1.0, 2.0 * gi / np.where(dp > 0.0, dp, 1.0)), 1.0)
        eps_m = np.where(dm < 0.0, np.minimum(1.0, -2.0 * gi / np.where(dm < 0.0, dm, -1.0)), 1.0)
    a = alpha
    return a * (
        gi
        + eps_p * (1.0 - a) * (2.0 - a) / 6.0 * dp
        + eps_m * (1.0 - a) * (1.0 + a) / 6.0 * dm
    )


def pfc_shift_periodic(f, shifts):
    """Shift each row of ``f`` right by ``shifts[k]`` cells on a periodic line.

    Mass per row is preserved exactly (telescoping fluxes); integer shifts are
    exact circular shifts. Third order on smooth data, positivity preserving.
    """
    f = np.asarray(f, dtype=float)
    shifts = np.asarray(shifts, dtype=float)
    m, n = f.shape
    k = np.floor(shifts)
    alpha = (shifts - k)[:, None]
    k = k.astype(np.int64) % n
    cols = (np.arange(n)[None, :] - k[:, None]) % n
    g0 = np.take_along_axis(f, cols, axis=1)
    g = np.concatenate([g0[:, -2:], g0, g0[:, :1]], axis=1)
    flux = _pfc_flux(g, alpha)
    # flux[:, i + 2] is the right face of cell i
    out = g0 - flux[:, 2:] + flux[:, 1:-1]
    return out


def pfc_shift_open(f, shifts):
    """Shift each row of ``f`` right by ``shifts[k]`` cells with zero inflow.

    Mass leaving through either end is returned per row as ``leak``.
    """
    f = np.asarray(f, dtype=float)
    shifts = np.asarray(shifts, dtype=float)
    m, n = f.shape
    k = np.floor(shifts).astype(np.int64)
    alpha = (shifts - np.floor(shifts))[:, None]
    idx = np.arange(n)[None, :] - k[:, None]
    valid = (idx >= 0) & (idx < n)
    g0 = np.where(valid, np.take_along_axis(f, np.clip(idx, 0, n - 1), axis=1), 0.0)
    zeros = np.zeros((m, 2))
    g = np.concatenate([zeros, g0, zeros[:, :1]], axis=1)
    flux = _pfc_flux(g, alpha)
    out = g0 - flux[:, 2:] + flux[:, 1:-1]
    # integer-shift spill plus the flux through both end faces
    leak = f.sum(axis=1) - out.sum(axis=1)
    return out, leak
