"""Ocean environment, depth grid, source and array geometry.

All objects here are frozen value types; they are shared read-only between
the solver, the synthesizer and the Monte-Carlo workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

SPEED_BAND = (1300.0, 1700.0)
DEFAULT_SPEED_MARGIN = 300.0
DEFAULT_GRID_STEP = 0.05


class DomainError(ValueError):
    """Raised when an argument lies outside the physical domain of an operation."""


@dataclass(frozen=True)
class SoundSpeedProfile:
    """Piecewise-linear sound speed profile c(z).

    Parameters
    ----------
    depths : sequence of float
        Knot depths in metres, strictly increasing, starting at 0.
    speeds : sequence of float
        Sound speed at each knot (m/s).
    """

    depths: tuple
    speeds: tuple

    def __post_init__(self):
        d = tuple(float(x) for x in self.depths)
        c = tuple(float(x) for x in self.speeds)
        object.__setattr__(self, "depths", d)
        object.__setattr__(self, "speeds", c)
        if len(d) < 2 or len(d) != len(c):
            raise ValueError("profile needs at least two (depth, speed) points")
        if d[0] != 0.0:
            raise ValueError("profile must start at the surface (depth 0)")
        if any(b <= a for a, b in zip(d, d[1:])):
            raise ValueError("profile depths must be strictly increasing")
        if any(not (SPEED_BAND[0] < s < SPEED_BAND[1]) for s in c):
            raise ValueError(f"sound speeds must lie in {SPEED_BAND} m/s")

    @classmethod
    def from_points(cls, points: Sequence[Sequence[float]]) -> "SoundSpeedProfile":
        pts = [tuple(p) for p in points]
        return cls(tuple(p[0] for p in pts), tuple(p[1] for p in pts))

    @property
    def bottom(self) -> float:
        return self.depths[-1]

    @property
    def min_speed(self) -> float:
        return min(self.speeds)

    @property
    def max_speed(self) -> float:
        return max(self.speeds)


def speed_at(ssp: SoundSpeedProfile, z):
    """Sound speed at depth ``z`` (scalar or array) by linear interpolation.

    Knot values are reproduced exactly. Depths outside the profile raise
    :class:`DomainError`.
    """
    za = np.asarray(z, dtype=float)
    if np.any(za < ssp.depths[0]) or np.any(za > ssp.depths[-1]):
        raise DomainError(f"depth outside profile [0, {ssp.depths[-1]}] m")
    c = np.interp(za, ssp.depths, ssp.speeds)
    return float(c) if c.ndim == 0 else c


@dataclass(frozen=True)
class Halfspace:
    """Fluid bottom halfspace; only the truth model reads it."""

    speed_mps: float
    density_ratio: float = 1.0  # rho_bottom / rho_water, water taken as 1 g/cm^3
    attenuation_db_per_wavelength: float = 0.0

    def __post_init__(self):
        if self.density_ratio <= 0:
            raise ValueError("density_ratio must be positive")
        if self.attenuation_db_per_wavelength < 0:
            raise ValueError("attenuation must be non-negative")


@dataclass(frozen=True)
class Environment:
    ssp: SoundSpeedProfile
    water_depth: float
    halfspace: Optional[Halfspace] = None

    def __post_init__(self):
        if self.water_depth <= 0:
            raise ValueError("water depth must be positive")
        if not math.isclose(self.water_depth, self.ssp.bottom, rel_tol=0, abs_tol=1e-9):
            raise ValueError("water depth must equal the deepest profile point")
        if self.halfspace is not None and self.halfspace.speed_mps <= self.ssp.max_speed:
            raise ValueError("halfspace speed must exceed every water speed")

    def without_halfspace(self) -> "Environment":
        """The water-column-only view handed to the estimator."""
        return Environment(self.ssp, self.water_depth, None)


def wavenumber_bounds(env: Environment, f: float, margin: float = DEFAULT_SPEED_MARGIN):
    """Default candidate wavenumber band ``(xi_min, xi_max)`` in 1/m.

    ``xi_max = 2 pi f / min(c)`` and ``xi_min = 2 pi f / (max(c) + margin)``.
    """
    if f <= 0:
        raise DomainError("frequency must be positive")
    omega = 2.0 * math.pi * f
    return omega / (env.ssp.max_speed + margin), omega / env.ssp.min_speed


@dataclass(frozen=True)
class DepthGrid:
    """Uniform depth grid z_l = l*h, l = 0..L, with L*h in (H - h, H]."""

    h: float
    L: int

    def __post_init__(self):
        if self.h <= 0 or self.L < 2:
            raise ValueError("grid needs h > 0 and at least 3 nodes")

    @classmethod
    def for_environment(cls, env: Environment, f: float, h: Optional[float] = None) -> "DepthGrid":
        lam_min = env.ssp.min_speed / f
        h_max = lam_min / 40.0
        if h is None:
            h = min(DEFAULT_GRID_STEP, h_max)
        elif h > h_max * (1 + 1e-12):
            raise ValueError(f"grid step {h} m exceeds lambda_min/40 = {h_max:.4g} m")
        H = env.water_depth
        L = int(math.floor(H / h + 1e-9))
        return cls(float(h), L)

    @property
    def depths(self) -> np.ndarray:
        return np.arange(self.L + 1) * self.h

    @property
    def bottom(self) -> float:
        return self.L * self.h


@dataclass(frozen=True)
class ArrayGeometry:
    element_depths: tuple

    def __post_init__(self):
        d = tuple(float(x) for x in self.element_depths)
        object.__setattr__(self, "element_depths", d)
        if len(d) < 2:
            raise ValueError("array needs at least two elements")
        if any(b <= a for a, b in zip(d, d[1:])):
            raise ValueError("element depths must be strictly increasing")

    @classmethod
    def uniform(cls, first_depth: float, spacing: float, count: int) -> "ArrayGeometry":
        return cls(tuple(first_depth + spacing * i for i in range(count)))

    @property
    def N(self) -> int:
        return len(self.element_depths)

    @property
    def depths(self) -> np.ndarray:
        return np.asarray(self.element_depths)

    def check_inside(self, H: float) -> None:
        if self.element_depths[0] <= 0 or self.element_depths[-1] >= H:
            raise ValueError(f"array elements must lie strictly inside (0, {H}) m")


@dataclass(frozen=True)
class SourceSpec:
    frequency: float
    depth: float
    range: float
    spectrum: complex = 1.0 + 0.0j

    def __post_init__(self):
        if self.frequency <= 0 or self.range <= 0 or self.depth <= 0:
            raise ValueError("frequency, depth and range must be positive")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.frequency


@dataclass(frozen=True)
class Scenario:
    """Everything read from one config document."""

    env: Environment
    array: ArrayGeometry
    source: SourceSpec
    band: Optional[tuple] = None
    speed_margin: float = DEFAULT_SPEED_MARGIN
    grid_step: Optional[float] = None
    extra: dict = field(default_factory=dict, compare=False)

    def grid(self, f: Optional[float] = None) -> DepthGrid:
        return DepthGrid.for_environment(self.env, f or self.source.frequency, self.grid_step)

    def search_band(self, f: Optional[float] = None) -> tuple:
        if self.band is not None:
            return tuple(self.band)
        return wavenumber_bounds(self.env, f or self.source.frequency, self.speed_margin)


def scenario_from_dict(doc: dict) -> Scenario:
    """Build a :class:`Scenario` from a parsed config mapping.

    Keys: ``ssp`` (list of [depth, speed]), ``water_depth``, optional
    ``halfspace {speed, density_ratio, attenuation_db_per_lambda}``,
    ``array {first_depth, spacing, count}`` or ``array {depths: [...]}``,
    ``source {frequency, depth, range}``. Optional ``band [xi_min, xi_max]``,
    ``speed_margin`` and ``grid_step``.
    """
    ssp = SoundSpeedProfile.from_points(doc["ssp"])
    hs = doc.get("halfspace")
    halfspace = None
    if hs:
        halfspace = Halfspace(
            float(hs["speed"]),
            float(hs.get("density_ratio", 1.0)),
            float(hs.get("attenuation_db_per_lambda", 0.0)),
        )
    env = Environment(ssp, float(doc.get("water_depth", ssp.bottom)), halfspace)

    arr = doc["array"]
    if "depths" in arr:
        array = ArrayGeometry(tuple(arr["depths"]))
    else:
        array = ArrayGeometry.uniform(float(arr["first_depth"]), float(arr["spacing"]), int(arr["count"]))
    array.check_inside(env.water_depth)

    src = doc["source"]
    source = SourceSpec(float(src["frequency"]), float(src["depth"]), float(src["range"]))
    if source.depth >= env.water_depth:
        raise ValueError("source must be inside the water column")

    band = doc.get("band")
    known = {"ssp", "water_depth", "halfspace", "array", "source", "band", "speed_margin", "grid_step"}
    return Scenario(
        env,
        array,
        source,
        band=tuple(float(b) for b in band) if band else None,
        speed_margin=float(doc.get("speed_margin", DEFAULT_SPEED_MARGIN)),
        grid_step=doc.get("grid_step"),
        extra={k: v for k, v in doc.items() if k not in known},
    )


def load_scenario(path) -> Scenario:
    """Read a YAML (or JSON) scenario file."""
    with open(Path(path)) as fh:
        return scenario_from_dict(yaml.safe_load(fh))


def scenario_to_dict(sc: Scenario) -> dict:
    env = sc.env
    doc = {
        "ssp": [[d, c] for d, c in zip(env.ssp.depths, env.ssp.speeds)],
        "water_depth": env.water_depth,
        "array": {"depths": list(sc.array.element_depths)},
        "source": {"frequency": sc.source.frequency, "depth": sc.source.depth, "range": sc.source.range},
        "speed_margin": sc.speed_margin,
    }
    if env.halfspace is not None:
        hs = env.halfspace
        doc["halfspace"] = {
            "speed": hs.speed_mps,
            "density_ratio": hs.density_ratio,
            "attenuation_db_per_lambda": hs.attenuation_db_per_wavelength,
        }
    if sc.band is not None:
        doc["band"] = list(sc.band)
    if sc.grid_step is not None:
        doc["grid_step"] = sc.grid_step
    doc.update(sc.extra)
    return doc


def yellow_sea_scenario(
    frequency: float = 596.0,
    source_depth: float = 20.0,
    source_range: float = 5000.0,
    n_elements: int = 30,
    first_depth: float = 1.0,
    spacing: float = 1.0,
) -> Scenario:
    """Shallow-water thermocline waveguide used for the simulation study.

    31 m of water, 1496 m/s above 8 m falling linearly to 1485 m/s at 10 m,
    over a 1652 m/s, 1.77 g/cm^3, 0.2 dB/wavelength fluid bottom.
    """
    ssp = SoundSpeedProfile((0.0, 8.0, 10.0, 31.0), (1496.0, 1496.0, 1485.0, 1485.0))
    env = Environment(ssp, 31.0, Halfspace(1652.0, 1.77, 0.2))
    array = ArrayGeometry.uniform(first_depth, spacing, n_elements)
    return Scenario(env, array, SourceSpec(frequency, source_depth, source_range))
