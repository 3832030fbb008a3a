"""Orthogonality-constrained modal search.

For each trial anchor wavenumber the candidate dictionary is fitted to the
snapshot by basis pursuit denoising; the anchor with the sparsest feasible
amplitude vector wins. The coarse grid is evaluated in one vectorised batch
(dictionaries and BPDN problems alike); golden-section refinement follows.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import clarabel
import numpy as np
from scipy import sparse

from .envarray import DepthGrid, Environment
from .fieldsynth import PressureSnapshot
from .modesolver import ModeSet, candidate_mode_set, sample_at_depths, wavenumber_squared

log = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
EPS_FLOOR = 1e-12
EPS_SAFETY = 1.1
GRAM_RCOND = 1e-13
DIRECT_EPS_RATIO = 1e-6


class EstimationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    epsilon_n: float
    band: tuple
    coarse_grid_points: int = 2000
    refine_tolerance: float = 1e-6
    lasso_max_iter: int = 5000
    lasso_rel_tol: float = 1e-9
    bisection_steps: int = 40

    def __post_init__(self):
        if not self.epsilon_n > 0:
            raise ValueError("epsilon_n must be positive")
        if self.coarse_grid_points < 10:
            raise ValueError("coarse grid needs at least 10 points")
        if not self.band[0] < self.band[1]:
            raise ValueError("empty wavenumber band")


@dataclass(frozen=True, eq=False)
class ModeEstimate:
    modes: ModeSet
    amplitudes: np.ndarray
    l1_norm: float
    residual_l2: float
    anchor_xi: float
    epsilon_n: float
    objective_trace: list = field(default_factory=list)
    degenerate: bool = False

    @property
    def wavenumbers(self) -> np.ndarray:
        return self.modes.wavenumbers


# --------------------------------------------------------------------------
# basis pursuit denoising


def _soft(z, thresh):
    mag = np.abs(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(mag > thresh, 1.0 - thresh / mag, 0.0)
    return z * scale


def _resid2(G, c, pp, a):
    """||p - Psi a||^2 from the normal-equation quantities."""
    Ga = np.einsum("bij,bj->bi", G, a)
    val = pp - 2.0 * np.real(np.einsum("bi,bi->b", c.conj(), a)) + np.real(np.einsum("bi,bi->b", a.conj(), Ga))
    return np.maximum(val, 0.0)


def _lasso_apg(G, c, lam, step, x0, max_iter, rel_tol):
    """Accelerated proximal gradient for 0.5 a^H G a - Re(c^H a) + lam sum|a_m|.

    Batched over the leading axis; uses gradient-based adaptive restart.
    Returns the iterates and a per-instance convergence flag.
    """
    x = x0.copy()
    y = x.copy()
    t = np.ones(len(x))
    thr = (step * lam)[:, None]
    active = np.arange(len(x))
    for _ in range(max_iter):
        Gs, cs, ys, xs, ts = G[active], c[active], y[active], x[active], t[active]
        grad = np.einsum("bij,bj->bi", Gs, ys) - cs
        xn = _soft(ys - step[active, None] * grad, thr[active])
        restart = np.real(np.sum(np.conj(ys - xn) * (xn - xs), axis=1)) > 0
        ts = np.where(restart, 1.0, ts)
        tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * ts * ts))
        mom = np.where(restart, 0.0, (ts - 1.0) / tn)
        y[active] = xn + mom[:, None] * (xn - xs)
        x[active] = xn
        t[active] = tn
        dx = np.linalg.norm(xn - xs, axis=1)
        done = dx <= rel_tol * np.maximum(np.linalg.norm(xn, axis=1), 1e-300)
        active = active[~done]
        if active.size == 0:
            break
    converged = np.ones(len(x), dtype=bool)
    converged[active] = False
    return x, converged


def _soc_l1(R, y, rad, tol=1e-10):
    """min sum|a_m| s.t. ||y - R a||_2 <= rad as a second-order cone program.

    Real variables (Re a, Im a, t); one cone for the residual and one cone
    ``|a_m| <= t_m`` per column, solved by Clarabel. Returns None when the
    solver does not converge.
    """
    r, M = R.shape
    A1 = np.zeros((1 + 2 * r, 3 * M))
    A1[1:, : 2 * M] = np.block([[R.real, -R.imag], [R.imag, R.real]])
    # cone m reads (t_m, Re a_m, Im a_m)
    rows = np.arange(3 * M)
    cols = np.stack([2 * M + np.arange(M), np.arange(M), M + np.arange(M)], axis=1).ravel()
    A2 = sparse.csc_matrix((-np.ones(3 * M), (rows, cols)), shape=(3 * M, 3 * M))
    A = sparse.vstack([sparse.csc_matrix(A1), A2]).tocsc()
    # a hair inside the ball so the returned point is feasible despite solver tolerance
    b = np.concatenate([[rad * (1.0 - 1e-9)], y.real, y.imag, np.zeros(3 * M)])
    q = np.concatenate([np.zeros(2 * M), np.ones(M)])
    cones = [clarabel.SecondOrderConeT(1 + 2 * r)] + [clarabel.SecondOrderConeT(3)] * M
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = settings.tol_gap_rel = settings.tol_feas = tol
    sol = clarabel.DefaultSolver(sparse.csc_matrix((3 * M, 3 * M)), q, A, b, cones, settings).solve()
    x = np.asarray(sol.x)
    if str(sol.status) not in ("Solved", "AlmostSolved") or not np.all(np.isfinite(x)):
        return None
    return x[:M] + 1j * x[M : 2 * M]


def _bpdn_conic(G, c, pp, eps2):
    """BPDN from Gram data: with ``G = R^H R`` on its range and ``y = R^-H c``
    the residual energy is ``||y - R a||^2 + (pp - ||y||^2)``."""
    lam, V = np.linalg.eigh(G)
    keep = lam > GRAM_RCOND * max(lam[-1], 1e-300)
    lam, V = lam[keep], V[:, keep]
    if lam.size == 0:
        return None
    y = (V.conj().T @ c) / np.sqrt(lam)
    rad2 = eps2 - (pp - np.vdot(y, y).real)
    if rad2 <= 0:
        return None
    return _soc_l1(np.sqrt(lam)[:, None] * V.conj().T, y, math.sqrt(rad2))


def bpdn_batch(G, c, pp, eps, max_iter=5000, rel_tol=1e-9, bisection_steps=40, cond_limit=1e6):
    """Batched min sum|a_m| s.t. ||p - Psi a||_2 <= eps.

    Parameters
    ----------
    G : ndarray (B, M, M)
        Gram matrices Psi^H Psi (zero rows and columns for padded modes).
    c : ndarray (B, M)
        Correlations Psi^H p.
    pp : ndarray (B,)
        ||p||^2.
    eps : float or ndarray (B,)
    cond_limit : float
        Instances whose Gram matrix (padding excluded) is worse conditioned
        than this, or on which the proximal solver stalls, are solved by
        a second-order cone solver instead.

    Returns
    -------
    a : ndarray (B, M) complex
    feasible : ndarray (B,) bool
        False where even the least-squares residual exceeds ``eps``.
    """
    G = np.asarray(G, dtype=complex)
    c = np.asarray(c, dtype=complex)
    pp = np.asarray(pp, dtype=float)
    B, M = c.shape
    eps = np.broadcast_to(np.asarray(eps, dtype=float), (B,)).copy()
    eps2 = eps * eps

    # directions below 1e-13 of the largest Gram eigenvalue are rounding noise;
    # feasibility and the conic solver both ignore them
    a_ls = np.einsum("bij,bj->bi", np.linalg.pinv(G, rcond=GRAM_RCOND, hermitian=True), c)
    feasible = _resid2(G, c, pp, a_ls) <= eps2 * (1 + 1e-12)
    zero_ok = pp <= eps2
    out = a_ls.copy()
    out[zero_ok] = 0.0

    work = np.flatnonzero(feasible & ~zero_ok)
    if work.size:
        Gw, cw, ppw, e2 = G[work], c[work], pp[work], eps2[work]
        pad = np.all(Gw == 0, axis=2)
        ev = np.linalg.eigvalsh(Gw + pad[:, :, None] * np.eye(M) * np.abs(Gw).max(axis=(1, 2))[:, None, None])
        lip = ev[:, -1]
        stiff = ev[:, 0] * cond_limit < lip
        easy = np.flatnonzero(~stiff)
        stalled = np.zeros(work.size, dtype=bool)
        if easy.size:
            Ge, ce, ppe, e2e = Gw[easy], cw[easy], ppw[easy], e2[easy]
            step = 1.0 / np.maximum(lip[easy], 1e-300)
            lo = np.zeros(easy.size)
            hi = np.max(np.abs(ce), axis=1)
            best = a_ls[work[easy]]
            warm = best.copy()
            for _ in range(bisection_steps):
                mid = 0.5 * (lo + hi)
                a, conv = _lasso_apg(Ge, ce, mid, step, warm, max_iter, rel_tol)
                stalled[easy[~conv]] = True
                ok = _resid2(Ge, ce, ppe, a) <= e2e
                lo = np.where(ok, mid, lo)
                hi = np.where(ok, hi, mid)
                best[ok] = a[ok]
                warm = a
                if np.all(hi - lo <= 1e-13 * np.maximum(hi, 1e-300)):
                    break
            out[work[easy]] = best
        hard = np.flatnonzero(stiff | stalled)
        for i in hard:
            sc = math.sqrt(ppw[i])
            a = _bpdn_conic(Gw[i], cw[i] / sc, 1.0, e2[i] / sc**2)
            if a is None:
                log.warning("conic solver failed; keeping the proximal or least-squares estimate")
            else:
                out[work[i]] = a * sc
    out[~feasible] = np.nan
    return out, feasible


def bpdn_solve(dictionary, p, epsilon_n, max_iter=5000, rel_tol=1e-9, bisection_steps=40):
    """Basis pursuit denoising with complex (modulus) L1 norm.

    Minimises ``sum_m |a_m|`` subject to ``||p - dictionary @ a||_2 <= epsilon_n``.
    Returns the complex amplitude vector, or ``None`` when the constraint
    cannot be met (least-squares residual above ``epsilon_n``).
    """
    D = np.asarray(dictionary)
    p = np.asarray(p, dtype=complex)
    if D.ndim != 2 or p.shape != (D.shape[0],):
        raise ValueError("dictionary must be N x M and p length N")
    if not (np.all(np.isfinite(D)) and np.all(np.isfinite(p)) and math.isfinite(epsilon_n)):
        raise ValueError("non-finite input to bpdn_solve")
    a_ls = np.linalg.lstsq(D, p, rcond=None)[0]
    pn = float(np.linalg.norm(p))
    if np.linalg.norm(p - D @ a_ls) > epsilon_n:
        return None
    if pn <= epsilon_n:
        return np.zeros(D.shape[1], dtype=complex)
    if epsilon_n <= DIRECT_EPS_RATIO * pn:
        # Gram-space residuals cannot resolve a bound this far below ||p||
        a = _soc_l1(D.astype(complex), p, epsilon_n) if epsilon_n > 0 else None
        return a_ls if a is None or np.linalg.norm(p - D @ a) > epsilon_n * (1 + 1e-6) else a
    Dh = D.conj().T
    G = (Dh @ D)[None]
    c = (Dh @ p)[None]
    a, ok = bpdn_batch(G, c, np.array([pn * pn]), epsilon_n, max_iter, rel_tol, bisection_steps)
    if not ok[0]:
        return None
    a = a[0]
    # certify against the direct residual; M-space residuals lose digits
    # when ||p - D a|| << ||p||
    if np.linalg.norm(p - D @ a) > epsilon_n * (1 + 1e-6):
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if np.linalg.norm(p - D @ (a_ls + mid * (a - a_ls))) <= epsilon_n:
                lo = mid
            else:
                hi = mid
        a = a_ls + lo * (a - a_ls)
    return a


# --------------------------------------------------------------------------
# noise level


def epsilon_from_noise(snapshot: PressureSnapshot, mode: str = "known", aux_bins=None, relative_floor: float = 0.0) -> float:
    """Residual bound epsilon_n from the noise energy on the array.

    ``mode="known"`` uses ``1.1 * sigma * sqrt(N)``; ``mode="offbin"`` uses
    ``1.1 * median ||bin||_2`` over signal-free neighbouring frequency bins
    (taken from ``aux_bins`` or ``snapshot.aux_bins``). The result never
    drops below ``max(1e-12, relative_floor * ||p||_2)``.
    """
    if mode == "known":
        if snapshot.noise_sigma is None:
            raise ValueError("known-sigma mode needs snapshot.noise_sigma")
        eps = EPS_SAFETY * snapshot.noise_sigma * math.sqrt(snapshot.N)
    elif mode == "offbin":
        bins = aux_bins if aux_bins is not None else snapshot.aux_bins
        if bins is None or len(bins) == 0:
            raise ValueError("off-bin mode needs at least one auxiliary bin")
        eps = EPS_SAFETY * float(np.median([np.linalg.norm(b) for b in bins]))
    else:
        raise ValueError(f"unknown epsilon mode {mode!r}")
    floor = max(EPS_FLOOR, relative_floor * float(np.linalg.norm(snapshot.pressure)))
    return max(eps, floor)


# --------------------------------------------------------------------------
# batched candidate dictionaries


class _DictionaryFactory:
    """Builds many candidate dictionaries, sampled on the array, at once.

    A candidate set is fixed by its bottom closure ratio beta; its
    wavenumbers are the roots of g(lam) = u_{L+1}(lam) - beta u_L(lam),
    bracketed on a fixed scan of the band and polished by Illinois regula
    falsi, and its functions are the marched solutions at those roots.
    """

    def __init__(self, env: Environment, grid: DepthGrid, f: float, band, depths, scan_points: Optional[int] = None):
        self.k2 = wavenumber_squared(env, grid, f)
        self.h = grid.h
        self.grid = grid
        self.band = band
        lo2, hi2 = band[0] ** 2, band[1] ** 2
        n_est = grid.bottom / math.pi * math.sqrt(max(np.max(self.k2) - lo2, 0.0)) + 2
        n_scan = scan_points or max(2000, int(60 * n_est))
        self.scan = np.linspace(lo2, hi2, n_scan)
        self.s0, self.s1 = self._tail(self.scan)
        depths = np.asarray(depths, dtype=float)
        z = grid.depths
        if np.any(depths < 0) or np.any(depths > z[-1] + 1e-9):
            raise ValueError("array depth outside the water column")
        pos = np.clip(depths / self.h, 0, grid.L)
        self.i0 = np.minimum(np.floor(pos).astype(int), grid.L - 1)
        self.w1 = pos - self.i0

    def _tail(self, lam):
        """(u_L, u_{L+1}) for every lam, marching without storage."""
        h2 = self.h * self.h
        um = np.zeros_like(lam)
        u = np.full_like(lam, self.h)
        k2 = self.k2
        for l in range(1, len(k2)):
            um, u = u, (2.0 - h2 * (k2[l] - lam)) * u - um
        return um, u

    def _march_sampled(self, lam):
        """Normalised sampled functions at the nodes needed by the array."""
        h2 = self.h * self.h
        k2 = self.k2
        L = len(k2) - 1
        nodes = np.unique(np.concatenate([self.i0, self.i0 + 1]))
        row = np.full(L + 1, -1)
        row[nodes] = np.arange(len(nodes))
        vals = np.zeros((len(nodes),) + lam.shape)
        um = np.zeros_like(lam)
        u = np.full_like(lam, self.h)
        ss = u * u
        if row[1] >= 0:
            vals[row[1]] = u
        for l in range(1, L):
            um, u = u, (2.0 - h2 * (k2[l] - lam)) * u - um
            ss += u * u
            if row[l + 1] >= 0:
                vals[row[l + 1]] = u
        norm = np.sqrt(ss * self.h)
        samp = (1.0 - self.w1)[:, None] * vals[row[self.i0]] + self.w1[:, None] * vals[row[self.i0 + 1]]
        return samp / norm

    def build(self, anchors):
        """Wavenumbers (B, Mmax; NaN padded) and dictionaries (B, N, Mmax)."""
        anchors = np.atleast_1d(np.asarray(anchors, dtype=float)).copy()
        lam_a = anchors * anchors
        uL, uL1 = self._tail(lam_a)
        scale = np.abs(uL) + np.abs(uL1)
        for attempt in range(5):
            bad = np.abs(uL) < 1e-12 * scale
            if not np.any(bad):
                break
            anchors[bad] *= 1.0 + (1e-7 if attempt % 2 == 0 else -1e-7) * (attempt // 2 + 1)
            lam_a = anchors * anchors
            uL, uL1 = self._tail(lam_a)
        beta = uL1 / uL

        g = self.s1[None, :] - beta[:, None] * self.s0[None, :]
        sg = np.sign(g)
        b_idx, s_idx = np.nonzero(sg[:, :-1] * sg[:, 1:] < 0)
        lo = self.scan[s_idx].copy()
        hi = self.scan[s_idx + 1].copy()
        beta_r = beta[b_idx]
        # the anchor root is known exactly
        own = (lam_a[b_idx] >= lo) & (lam_a[b_idx] <= hi)
        roots = self._illinois(lo, hi, g[b_idx, s_idx], g[b_idx, s_idx + 1], beta_r)
        roots[own] = lam_a[b_idx][own]
        # anchor outside every scan bracket (band edge): add it explicitly
        has_own = np.zeros(len(anchors), dtype=bool)
        has_own[b_idx[own]] = True
        missing = np.flatnonzero(~has_own)
        b_idx = np.concatenate([b_idx, missing])
        roots = np.concatenate([roots, lam_a[missing]])

        order = np.lexsort((-roots, b_idx))
        b_idx, roots = b_idx[order], roots[order]
        counts = np.bincount(b_idx, minlength=len(anchors))
        mmax = int(counts.max())
        slot = np.arange(len(b_idx)) - np.repeat(np.cumsum(counts) - counts, counts)

        samp = self._march_sampled(roots)
        N = len(self.i0)
        xis = np.full((len(anchors), mmax), np.nan)
        psi = np.zeros((len(anchors), N, mmax))
        xis[b_idx, slot] = np.sqrt(roots)
        psi[b_idx, :, slot] = samp.T
        return anchors, xis, psi

    def _illinois(self, lo, hi, glo, ghi, beta, iters=60, xtol=1e-15):
        lo, hi, glo, ghi = lo.copy(), hi.copy(), glo.copy(), ghi.copy()
        side = np.zeros(len(lo), dtype=int)
        best = np.where(np.abs(glo) < np.abs(ghi), lo, hi)
        act = np.arange(len(lo))
        for _ in range(iters):
            l, r, gl, gr, sd = lo[act], hi[act], glo[act], ghi[act], side[act]
            x = np.clip((l * gr - r * gl) / (gr - gl), l, r)
            u0, u1 = self._tail(x)
            gx = u1 - beta[act] * u0
            keep_r = np.sign(gx) == np.sign(gl)
            # Illinois: halve the retained endpoint's value on repeat retention
            gr = np.where(keep_r & (sd == 1), 0.5 * gr, gr)
            gl = np.where(~keep_r & (sd == -1), 0.5 * gl, gl)
            lo[act] = np.where(keep_r, x, l)
            glo[act] = np.where(keep_r, gx, gl)
            hi[act] = np.where(keep_r, r, x)
            ghi[act] = np.where(keep_r, gr, gx)
            side[act] = np.where(keep_r, 1, -1)
            best[act] = x
            done = (np.abs(gx) <= 1e-14 * (np.abs(u1) + np.abs(beta[act] * u0))) | (hi[act] - lo[act] <= xtol * np.abs(x))
            if np.all(done):
                break
            act = act[~done]
        return best


def _objective_batch(factory: _DictionaryFactory, anchors, p, cfg: SolverConfig):
    anchors, xis, psi = factory.build(anchors)
    G = np.einsum("bnm,bnk->bmk", psi, psi)
    c = np.einsum("bnm,n->bm", psi, p)
    pp = np.full(len(anchors), np.vdot(p, p).real)
    a, ok = bpdn_batch(G, c, pp, cfg.epsilon_n, cfg.lasso_max_iter, cfg.lasso_rel_tol, cfg.bisection_steps)
    J = np.where(ok, np.nansum(np.abs(a), axis=1), np.inf)
    return anchors, J


def estimate_modes(snapshot: PressureSnapshot, env: Environment, cfg: SolverConfig, grid: Optional[DepthGrid] = None) -> ModeEstimate:
    """Estimate wavenumbers, mode functions and amplitudes from one snapshot.

    Evaluates J(xi) = min ||a||_1 (subject to the residual bound) on a
    uniform grid of anchors across ``cfg.band``, skipping infeasible
    anchors, then refines the best one by golden-section search.
    """
    env = env.without_halfspace()
    f = snapshot.frequency
    if grid is None:
        grid = DepthGrid.for_environment(env, f)
    p = snapshot.pressure
    factory = _DictionaryFactory(env, grid, f, cfg.band, snapshot.depths)

    xs = np.linspace(cfg.band[0], cfg.band[1], cfg.coarse_grid_points)
    xs_used, J = _objective_batch(factory, xs, p, cfg)
    trace = list(zip(xs_used.tolist(), J.tolist()))
    if not np.any(np.isfinite(J)):
        raise EstimationError("epsilon_n too small for this snapshot")
    jmin = np.min(J)
    best = int(np.flatnonzero(J <= jmin + 1e-12 * max(abs(jmin), 1e-300))[0])

    def evaluate(x):
        xu, Jx = _objective_batch(factory, [x], p, cfg)
        trace.append((float(xu[0]), float(Jx[0])))
        return float(Jx[0])

    a_ = xs[max(best - 1, 0)]
    b_ = xs[min(best + 1, len(xs) - 1)]
    x_best, j_best = float(xs_used[best]), float(J[best])
    c_ = b_ - GOLDEN * (b_ - a_)
    d_ = a_ + GOLDEN * (b_ - a_)
    fc, fd = evaluate(c_), evaluate(d_)
    while abs(b_ - a_) > cfg.refine_tolerance:
        if fc <= fd:
            b_, d_, fd = d_, c_, fc
            c_ = b_ - GOLDEN * (b_ - a_)
            fc = evaluate(c_)
        else:
            a_, c_, fc = c_, d_, fd
            d_ = a_ + GOLDEN * (b_ - a_)
            fd = evaluate(d_)
    for x, jx in ((c_, fc), (d_, fd)):
        if jx < j_best:
            x_best, j_best = x, jx

    return _finalise(snapshot, env, grid, f, x_best, cfg, trace)


def estimate_at_anchor(snapshot: PressureSnapshot, env: Environment, cfg: SolverConfig, xi_anchor: float, grid: Optional[DepthGrid] = None) -> ModeEstimate:
    """Fit the dictionary of a single, given anchor (no search)."""
    env = env.without_halfspace()
    grid = grid or DepthGrid.for_environment(env, snapshot.frequency)
    return _finalise(snapshot, env, grid, snapshot.frequency, xi_anchor, cfg, [])


def _finalise(snapshot, env, grid, f, xi, cfg, trace) -> ModeEstimate:
    modes = candidate_mode_set(env, grid, f, xi, cfg.band)
    D = sample_at_depths(modes, snapshot.depths)
    a = bpdn_solve(D, snapshot.pressure, cfg.epsilon_n, cfg.lasso_max_iter, cfg.lasso_rel_tol, cfg.bisection_steps)
    if a is None:
        raise EstimationError("epsilon_n too small for this snapshot")
    resid = float(np.linalg.norm(snapshot.pressure - D @ a))
    l1 = float(np.sum(np.abs(a)))
    return ModeEstimate(modes, a, l1, resid, float(modes.anchor_xi), cfg.epsilon_n, trace, degenerate=bool(l1 == 0.0))
