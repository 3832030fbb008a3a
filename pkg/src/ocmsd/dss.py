"""Depth-sign search and source depth estimation.

For every trial depth z_q the mode signs sign[psi_m(z_q)] compensate the
ambiguity function; the hypothesis whose normalised ambiguity function is
closest (in KL divergence) to a Dirichlet-kernel template centred on z_q
fixes the signs, and the source depth is the peak of that ambiguity
function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .modesolver import ModeSet, sample_at_depths
from .ocms import ModeEstimate

TEMPLATE_FLOOR = 1e-6
SIGN_STEP = 0.1
AMP_THRESHOLD = 1e-3


class DegenerateEstimate(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SignHypothesis:
    q: int
    depth: float
    signs: np.ndarray


@dataclass(frozen=True, eq=False)
class DepthResult:
    estimated_depth: float
    selected_q0: int
    selected_signs: np.ndarray
    depths: np.ndarray
    ambiguity: np.ndarray
    kl_trace: np.ndarray
    sign_depths: np.ndarray

    @property
    def z_q0(self) -> float:
        return float(self.sign_depths[self.selected_q0 - 1])


def mode_signs(values) -> np.ndarray:
    """sign() with sign(0) = +1."""
    return np.where(np.asarray(values) < 0, -1.0, 1.0)


def _trapz(y, h):
    return h * (np.sum(y, axis=-1) - 0.5 * (y[..., 0] + y[..., -1]))


def _ambiguity_rows(functions, weights, h):
    s = weights @ functions
    d = s * s
    area = _trapz(d, h)
    if np.any(area <= 0):
        raise DegenerateEstimate("ambiguity function vanishes identically")
    return d / area[..., None]


def ambiguity(modes: ModeSet, amp_moduli, signs) -> np.ndarray:
    """Normalised ambiguity D(z) = |sum_m psi_m(z) |a_m| delta_m|^2 on the mode grid.

    Scaled so its trapezoid integral over the water column is one.
    """
    amp = np.asarray(amp_moduli, dtype=float)
    signs = np.asarray(signs, dtype=float)
    if amp.shape != (modes.M,) or signs.shape != (modes.M,):
        raise ValueError("one modulus and one sign per mode required")
    if np.any(amp < 0):
        raise ValueError("amplitude moduli must be non-negative")
    if not np.any(amp > 0):
        raise DegenerateEstimate("all amplitude moduli are zero")
    return _ambiguity_rows(modes.functions, amp * signs, modes.grid.h)


def _template_rows(z_q, n_modes, H, z, h):
    z_q = np.atleast_1d(np.asarray(z_q, dtype=float))
    dz = z[None, :] - z_q[:, None]
    num = np.sin((n_modes + 1) * math.pi * dz / H)
    den = np.sin(math.pi * dz / (2.0 * H))
    near = np.abs(dz) < 0.5 * h
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio2 = np.where(near, (2.0 * (n_modes + 1)) ** 2, (num / np.where(near, 1.0, den)) ** 2)
    t = ratio2 + TEMPLATE_FLOOR
    return t / _trapz(t, h)[:, None]


def dirichlet_template(z_q: float, n_modes: int, H: float, grid) -> np.ndarray:
    """Normalised Dirichlet-kernel template centred on ``z_q``.

    ``(|sin((M+1) pi (z - z_q) / H) / sin(pi (z - z_q) / (2H))|^2 + 1e-6)``,
    with the removable singularity at ``z = z_q`` replaced by its limit
    ``(2(M+1))^2``, normalised to unit trapezoid integral on the grid.
    """
    if not (0 < z_q <= H) or n_modes < 1:
        raise ValueError("need 0 < z_q <= H and at least one mode")
    return _template_rows(z_q, n_modes, H, grid.depths, grid.h)[0]


def kl_divergence(D, Ds, grid=None) -> float:
    """KL divergence of ``D`` from ``Ds``.

    Trapezoid quadrature on ``grid`` when given, a plain sum otherwise.
    Entries with ``D == 0`` contribute nothing.
    """
    D = np.asarray(D, dtype=float)
    Ds = np.asarray(Ds, dtype=float)
    if np.any(D < 0) or np.any(Ds < 0):
        raise ValueError("distributions must be non-negative")
    return float(_kl_rows(D[None], Ds[None], None if grid is None else grid.h)[0])


def _kl_rows(D, Ds, h):
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(D > 0, D * np.log(D / Ds), 0.0)
    return np.sum(terms, axis=-1) if h is None else _trapz(terms, h)


def sign_hypotheses(modes: ModeSet, step: float = SIGN_STEP):
    """Sign patterns sign[psi_m(z_q)] at z_q = q * step, q = 1..floor(H/step)."""
    H = modes.grid.bottom
    Q = int(math.floor(H / step + 1e-9))
    zq = step * np.arange(1, Q + 1)
    signs = mode_signs(sample_at_depths(modes, zq))
    return [SignHypothesis(q + 1, float(zq[q]), signs[q]) for q in range(Q)]


def estimate_depth(
    estimate: ModeEstimate,
    sign_step: float = SIGN_STEP,
    amp_threshold: float = AMP_THRESHOLD,
    template_modes: Optional[int] = None,
) -> DepthResult:
    """Source depth from estimated modes and amplitudes.

    Modes with ``|a_m| < amp_threshold * max|a|`` keep a fixed + sign.
    ``template_modes`` overrides the mode count M used by the template;
    by default it is the number of modes above the threshold.
    """
    modes = estimate.modes
    amp = np.abs(np.asarray(estimate.amplitudes))
    if amp.size == 0 or not np.any(amp > 0):
        raise DegenerateEstimate("estimate has no non-zero amplitude")
    return depth_sign_search(modes, amp, sign_step, amp_threshold, template_modes)


def depth_sign_search(modes: ModeSet, amp, sign_step=SIGN_STEP, amp_threshold=AMP_THRESHOLD, template_modes=None) -> DepthResult:
    grid = modes.grid
    H = grid.bottom
    z = grid.depths
    amp = np.asarray(amp, dtype=float)
    if not np.any(amp > 0):
        raise DegenerateEstimate("estimate has no non-zero amplitude")
    active = amp >= amp_threshold * amp.max()
    n_t = int(template_modes or np.count_nonzero(active))

    Q = int(math.floor(H / sign_step + 1e-9))
    zq = sign_step * np.arange(1, Q + 1)
    signs = mode_signs(sample_at_depths(modes, zq))
    signs[:, ~active] = 1.0

    D = _ambiguity_rows(modes.functions, signs * amp[None, :], grid.h)
    Ds = _template_rows(zq, n_t, H, z, grid.h)
    kl = _kl_rows(D, Ds, grid.h)
    q0 = int(np.argmin(kl))
    d0 = D[q0]
    z_hat = float(z[int(np.argmax(d0))])
    return DepthResult(z_hat, q0 + 1, signs[q0], z, d0, kl, zq)
