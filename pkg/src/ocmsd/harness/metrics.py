"""Error metrics for estimated mode parameters and depths."""

from __future__ import annotations

import numpy as np

from ..modesolver import ModeSet


def align_modes(est_xi, ref_xi):
    """One-to-one greedy matching of estimated to reference wavenumbers.

    Returns an integer array ``match`` of length ``len(ref_xi)`` holding the
    index of the estimated mode assigned to each reference mode, or -1.
    Pairs are taken in order of increasing wavenumber distance.
    """
    est_xi = np.asarray(est_xi, dtype=float)
    ref_xi = np.asarray(ref_xi, dtype=float)
    match = np.full(len(ref_xi), -1)
    if len(est_xi) == 0 or len(ref_xi) == 0:
        return match
    dist = np.abs(ref_xi[:, None] - est_xi[None, :])
    used_e = np.zeros(len(est_xi), dtype=bool)
    for flat in np.argsort(dist, axis=None, kind="stable"):
        r, e = divmod(int(flat), len(est_xi))
        if match[r] < 0 and not used_e[e]:
            match[r] = e
            used_e[e] = True
    return match


def _on_grid(modes: ModeSet, z):
    if len(modes.grid.depths) == len(z) and np.allclose(modes.grid.depths, z):
        return modes.functions
    return np.array([np.interp(z, modes.grid.depths, f) for f in modes.functions])


def mode_function_error(estimated: ModeSet, reference: ModeSet, match=None) -> np.ndarray:
    """(1/H) * integral |psi_m - phi_m| dz for every reference mode.

    Estimated functions are sign-aligned to their reference partner first.
    Reference modes without a partner get NaN.
    """
    z = reference.grid.depths
    h = reference.grid.h
    H = reference.grid.bottom
    if match is None:
        n = min(estimated.M, reference.M)
        match = np.concatenate([np.arange(n), np.full(reference.M - n, -1)])
    est = _on_grid(estimated, z)
    out = np.full(reference.M, np.nan)
    for m, e in enumerate(match):
        if e < 0:
            continue
        psi = est[e]
        phi = reference.functions[m]
        if np.dot(psi, phi) < 0:
            psi = -psi
        d = np.abs(psi - phi)
        out[m] = h * (d.sum() - 0.5 * (d[0] + d[-1])) / H
    return out


def amplitude_error(estimated, reference) -> float:
    """Distance between unit-normalised amplitude vectors after phase alignment.

    The reference is scaled to unit 2-norm; the estimate is rotated by the
    global phase maximising Re<a_hat, a> and scaled to unit norm.
    """
    a_hat = np.asarray(estimated, dtype=complex)
    a = np.asarray(reference, dtype=complex)
    if a_hat.shape != a.shape:
        raise ValueError("amplitude vectors differ in length")
    na, nh = np.linalg.norm(a), np.linalg.norm(a_hat)
    if na == 0 or nh == 0:
        raise ValueError("zero amplitude vector")
    a = a / na
    s = np.vdot(a, a_hat)
    rot = np.exp(-1j * np.angle(s)) if s != 0 else 1.0
    return float(np.linalg.norm(a_hat * rot / nh - a))


def absolute_error(true_depth: float, estimated_depth: float) -> float:
    return abs(true_depth - estimated_depth)
