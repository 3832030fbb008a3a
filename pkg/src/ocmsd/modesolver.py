"""Depth-direction eigen-numerics.

Three routes to mode depth functions live here:

* :func:`propagate_recurrence` marches the three-term difference equation
  down from the pressure-release surface for a trial wavenumber.
* :func:`candidate_mode_set` turns one anchor wavenumber into a full,
  exactly orthonormal set of water-column modes (the OCMS dictionary).
* :func:`reference_mode_set` is the truth model: trapped modes of the water
  column over a fluid halfspace, found by shooting and bisection.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .envarray import DepthGrid, DomainError, Environment, speed_at

REFERENCE = "reference"
CANDIDATE = "candidate"


@dataclass(frozen=True, eq=False)
class ModeSet:
    """Ordered modes on a depth grid.

    Attributes
    ----------
    grid : DepthGrid
    wavenumbers : ndarray, shape (M,)
        Horizontal wavenumbers in 1/m, strictly decreasing.
    functions : ndarray, shape (M, L+1)
        Mode depth functions on the grid nodes, normalised so that
        ``sum(psi**2) * h == 1``.
    kind : str
        ``"reference"`` or ``"candidate"``.
    anchor_xi : float or None
        Anchor wavenumber of a candidate set.
    """

    grid: DepthGrid
    wavenumbers: np.ndarray
    functions: np.ndarray
    kind: str = CANDIDATE
    anchor_xi: Optional[float] = None
    meta: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return len(self.wavenumbers)

    @property
    def orders(self) -> np.ndarray:
        """Mode order of each function, one more than its interior zero count."""
        return np.array([count_nodes(f) + 1 for f in self.functions], dtype=int)

    def gram(self) -> np.ndarray:
        return self.functions @ self.functions.T * self.grid.h

    def subset(self, idx) -> "ModeSet":
        idx = np.asarray(idx, dtype=int)
        return ModeSet(self.grid, self.wavenumbers[idx], self.functions[idx], self.kind, self.anchor_xi, dict(self.meta))


def count_nodes(f: np.ndarray, rel_tol: float = 1e-10) -> int:
    """Number of sign changes of ``f`` ignoring near-zero samples."""
    f = np.asarray(f)
    s = np.sign(f[np.abs(f) > rel_tol * np.max(np.abs(f))])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def wavenumber_squared(env: Environment, grid: DepthGrid, f: float) -> np.ndarray:
    """k^2(z_l) = (omega / c(z_l))^2 on the grid nodes."""
    omega = 2.0 * math.pi * f
    return (omega / speed_at(env.ssp, grid.depths)) ** 2


def _march(k2, h, xi2, init=(0.0, None), exact=False, extra=0):
    """March u_{l+1} = d_l u_l - u_{l-1} for one or many trial xi^2.

    Returns an array of shape ``xi2.shape + (len(k2) + extra,)``; ``extra``
    virtual nodes below the last grid node reuse the last k^2 value.
    """
    xi2 = np.asarray(xi2, dtype=float)
    n = len(k2) + extra
    k2e = np.concatenate([k2, np.full(extra, k2[-1])])
    u = np.empty(xi2.shape + (n,))
    u0, u1 = init
    u[..., 0] = u0
    u[..., 1] = h if u1 is None else u1
    for l in range(1, n - 1):
        u[..., l + 1] = _diag_coeff(k2e[l], xi2, h, exact) * u[..., l] - u[..., l - 1]
    return u


def _diag_coeff(k2, xi2, h, exact):
    if not exact:
        return 2.0 - h * h * (k2 - xi2)
    kz2 = k2 - xi2
    # 2 cos(h sqrt(kz2)), continued analytically to kz2 < 0
    return np.where(kz2 >= 0, 2.0 * np.cos(h * np.sqrt(np.abs(kz2))), 2.0 * np.cosh(h * np.sqrt(np.abs(kz2))))


def propagate_recurrence(env: Environment, grid: DepthGrid, f: float, xi: float, init=(0.0, None), exact=False):
    """Unnormalised trial depth function for wavenumber ``xi``.

    Marches ``u_{l+1} = (2 - h^2 (k^2(z_l) - xi^2)) u_l - u_{l-1}`` from
    ``u_0 = 0, u_1 = h``. ``exact=True`` uses ``2 cos(h sqrt(k^2 - xi^2))``
    instead of its small-h linearisation.
    """
    xi_top = 2.0 * math.pi * f / env.ssp.min_speed
    if not (0 < xi < xi_top):
        raise DomainError(f"xi={xi} outside (0, {xi_top:.6g}); no oscillatory region")
    return _march(wavenumber_squared(env, grid, f), grid.h, xi * xi, init=init, exact=exact)


def tridiag_eigensolve(diag, offdiag, select_range=None):
    """Eigenpairs of a real symmetric tridiagonal matrix.

    Returns eigenvalues in ascending order and the matching orthonormal
    eigenvectors as columns. ``select_range=(lo, hi)`` restricts the
    computation to eigenvalues in ``(lo, hi]``.
    """
    diag = np.asarray(diag, dtype=float)
    offdiag = np.asarray(offdiag, dtype=float)
    if diag.size == 1:
        w = diag.copy()
        if select_range is not None and not (select_range[0] < w[0] <= select_range[1]):
            return np.empty(0), np.empty((1, 0))
        return w, np.ones((1, 1))
    if select_range is None:
        return eigh_tridiagonal(diag, offdiag)
    return eigh_tridiagonal(diag, offdiag, select="v", select_range=select_range)


def _fix_sign(fns: np.ndarray) -> np.ndarray:
    """Flip each row so its first significant lobe below the surface is positive."""
    out = fns.copy()
    for row in out:
        big = np.flatnonzero(np.abs(row) > 1e-8 * np.max(np.abs(row)))
        if big.size and row[big[0]] < 0:
            row *= -1.0
    return out


def candidate_mode_set(env: Environment, grid: DepthGrid, f: float, xi_anchor: float, band, max_retries: int = 5):
    """Orthonormal set of water-column modes containing ``xi_anchor``.

    The anchor's trial solution fixes the bottom closure ratio
    ``beta = u_{L+1} / u_L``; the water-column operator with that closure is
    then diagonalised, so every returned wavenumber shares the anchor's
    bottom condition and the functions are orthonormal to machine precision.
    """
    xi_min, xi_max = band
    if not xi_min < xi_max:
        raise ValueError("empty wavenumber band")
    if not xi_min <= xi_anchor <= xi_max:
        raise ValueError("anchor outside the band")
    k2 = wavenumber_squared(env, grid, f)
    h = grid.h
    xi = xi_anchor
    for attempt in range(max_retries + 1):
        u = _march(k2, h, xi * xi, extra=1)
        if abs(u[-2]) >= 1e-12 * np.max(np.abs(u)):
            break
        xi = xi_anchor * (1.0 + (1e-7 if attempt % 2 == 0 else -1e-7) * (attempt // 2 + 1))
    else:
        raise RuntimeError("trial solution has a node at the bottom; anchor perturbation failed")
    return _closure_modes(k2, h, grid, u[-1] / u[-2], xi, band)


def _closure_modes(k2, h, grid, beta, xi, band):
    xi_min, xi_max = band
    inv_h2 = 1.0 / (h * h)
    diag = -2.0 * inv_h2 + k2[1:]
    diag[-1] += beta * inv_h2
    off = np.full(len(diag) - 1, inv_h2)
    lo = min(xi_min * xi_min, xi * xi) * (1 - 1e-12)
    hi = max(xi_max * xi_max, xi * xi) * (1 + 1e-12)
    lam, vec = tridiag_eigensolve(diag, off, select_range=(lo, hi))
    order = np.argsort(lam)[::-1]
    lam, vec = lam[order], vec[:, order]
    xis = np.sqrt(np.maximum(lam, 0.0))
    keep = ((xis >= xi_min) & (xis <= xi_max)) | (np.abs(xis - xi) <= 1e-9 * xi)
    xis, vec = xis[keep], vec[:, keep]
    fns = np.zeros((len(xis), grid.L + 1))
    fns[:, 1:] = vec.T / math.sqrt(h)
    return ModeSet(grid, xis, _fix_sign(fns), CANDIDATE, float(xi), {"beta": float(beta)})


def _bottom_mismatch(u_Lm1, u_L, u_Lp1, k2_L, xi2, h, exact, gamma_over_rho):
    """psi'(H) + (gamma_b / rho_ratio) psi(H) from the discrete local solution."""
    c = 0.5 * _diag_coeff(k2_L, xi2, h, exact)
    # S = sin(theta)/kappa with cos(theta) = c, theta = kappa h (sinh for c > 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        theta = np.where(c <= 1, np.arccos(np.clip(c, -1, 1)), np.arccosh(np.maximum(c, 1)))
        ratio = np.where(c <= 1, np.sin(theta), np.sinh(theta)) / theta
    s = h * np.where(theta > 1e-8, ratio, 1.0)
    dpsi = (u_Lp1 - u_Lm1) / (2.0 * s)
    return dpsi + gamma_over_rho * u_L


def reference_mode_set(env: Environment, grid: DepthGrid, f: float, exact: bool = False, n_scan: int = 4000, tol: float = 1e-10):
    """Trapped modes of the water column over the environment's halfspace.

    Each mode satisfies ``psi'(H) / psi(H) = -gamma_b / rho_ratio`` with
    ``gamma_b = sqrt(xi^2 - k_b^2)``. Roots are bracketed on ``n_scan``
    uniform points of the trapped band and refined by bisection to ``tol``.
    Functions are returned with the water-column normalisation; the fraction
    of modal energy in the evanescent tail is kept in ``meta["tail_fraction"]``.
    """
    hs = env.halfspace
    if hs is None:
        raise ValueError("reference modes need a bottom halfspace")
    if hs.speed_mps <= env.ssp.max_speed:
        raise ValueError("halfspace speed must exceed every water speed")
    omega = 2.0 * math.pi * f
    kb = omega / hs.speed_mps
    k_top = omega / env.ssp.min_speed
    k2 = wavenumber_squared(env, grid, f)
    h = grid.h
    rho = hs.density_ratio

    def mismatch(xi):
        xi = np.asarray(xi, dtype=float)
        u = _march(k2, h, xi * xi, exact=exact, extra=1)
        g = np.sqrt(np.maximum(xi * xi - kb * kb, 0.0)) / rho
        val = _bottom_mismatch(u[..., -3], u[..., -2], u[..., -1], k2[-1], xi * xi, h, exact, g)
        return val / np.max(np.abs(u), axis=-1)

    span = k_top - kb
    xs = np.linspace(kb + 1e-9 * span, k_top - 1e-9 * span, n_scan)
    fs = mismatch(xs)
    idx = np.flatnonzero(np.sign(fs[:-1]) * np.sign(fs[1:]) < 0)
    if idx.size == 0:
        warnings.warn(f"no trapped modes at {f} Hz", RuntimeWarning)
        return ModeSet(grid, np.empty(0), np.empty((0, grid.L + 1)), REFERENCE)

    lo, hi = xs[idx].copy(), xs[idx + 1].copy()
    flo = fs[idx].copy()
    while np.max(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        fm = mismatch(mid)
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    xis = np.sort(0.5 * (lo + hi))[::-1]

    u = _march(k2, h, xis * xis, exact=exact)
    norm = np.sqrt(np.sum(u * u, axis=1) * h)
    fns = _fix_sign(u / norm[:, None])
    gamma = np.sqrt(xis * xis - kb * kb)
    tail = fns[:, -1] ** 2 / (2.0 * rho * gamma)
    meta = {"tail_fraction": tail / (1.0 + tail), "kb": kb}
    return ModeSet(grid, xis, fns, REFERENCE, None, meta)


def sample_at_depths(modes: ModeSet, depths) -> np.ndarray:
    """Linearly interpolate every mode onto ``depths``.

    Returns an ``N x M`` matrix whose column ``m`` is mode ``m`` sampled at
    the requested depths.
    """
    depths = np.atleast_1d(np.asarray(depths, dtype=float))
    z = modes.grid.depths
    if np.any(depths < 0) or np.any(depths > z[-1] + 1e-9):
        raise DomainError(f"depth outside the water column [0, {z[-1]}] m")
    out = np.empty((depths.size, modes.M))
    for m, fn in enumerate(modes.functions):
        out[:, m] = np.interp(depths, z, fn)
    return out
