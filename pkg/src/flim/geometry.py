"""Scene construction: LED luminaire, photodiode array and UE placement.

Lengths are centimetres and angles degrees unless a name says otherwise.
The origin is the luminaire centre projected onto the floor; the LED and PD
squares both have their edges aligned with the x/y axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from flim.errors import AngleListMismatch, DomainError, ValidationError

__all__ = [
    "Vec3",
    "LedElement",
    "PdElement",
    "SceneConfig",
    "Scene",
    "PAPER_PERTURBATION_DEG",
    "orientation_vector",
    "corner_offsets",
    "build_scene",
    "cell_radius",
]

#: Per-PD (polar, azimuth) tilts of the square-perturbed receiver, degrees.
PAPER_PERTURBATION_DEG: tuple[tuple[float, float], ...] = (
    (-5.0, 6.0),
    (-8.0, 1.0),
    (-10.0, 2.0),
    (15.0, 1.0),
)


class Vec3(NamedTuple):
    x: float
    y: float
    z: float

    @property
    def array(self) -> np.ndarray:
        return np.array(self, dtype=float)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


def orientation_vector(polar_deg: float, azimuth_deg: float) -> Vec3:
    """Unit vector with the given polar angle from +z and azimuth from +x.

    >>> orientation_vector(90, 0)
    Vec3(x=1.0, y=0.0, z=6.123233995736766e-17)
    """
    g = math.radians(polar_deg)
    b = math.radians(azimuth_deg)
    return Vec3(math.sin(g) * math.cos(b), math.sin(g) * math.sin(b), math.cos(g))


@dataclass(frozen=True)
class LedElement:
    position: Vec3
    semi_angle_deg: float
    orientation: Vec3 = Vec3(0.0, 0.0, -1.0)

    def __post_init__(self):
        if not 0.0 < self.semi_angle_deg < 90.0:
            raise DomainError(f"LED semi-angle must lie in (0, 90) deg, got {self.semi_angle_deg}")
        if tuple(self.orientation) != (0.0, 0.0, -1.0):
            raise DomainError("LEDs face straight down; orientation is fixed to (0, 0, -1)")


@dataclass(frozen=True)
class PdElement:
    rel_position: Vec3
    polar_deg: float = 0.0
    azimuth_deg: float = 0.0
    area_cm2: float = 1.0
    fov_half_deg: float = 85.0

    def __post_init__(self):
        if not self.area_cm2 > 0:
            raise DomainError(f"PD area must be positive, got {self.area_cm2}")
        if not 0.0 < self.fov_half_deg <= 90.0:
            raise DomainError(f"FoV half-angle must lie in (0, 90] deg, got {self.fov_half_deg}")

    @property
    def orientation(self) -> Vec3:
        return orientation_vector(self.polar_deg, self.azimuth_deg)


def cell_radius(h_lum_cm: float, h_ue_cm: float, m: float) -> float:
    """Attocell radius where the received optical power has halved.

    Parameters
    ----------
    h_lum_cm, h_ue_cm : float
        Luminaire and UE heights above the floor.
    m : float
        Lambertian mode number of the LEDs.
    """
    if not m > 0:
        raise DomainError(f"Lambertian mode must be positive, got {m}")
    if h_lum_cm < h_ue_cm:
        raise DomainError("luminaire must not be below the UE")
    return math.sqrt(4.0 ** (1.0 / (m + 3.0)) - 1.0) * (h_lum_cm - h_ue_cm)


def corner_offsets(n: int, spacing: float) -> np.ndarray:
    """In-plane (x, y) offsets of ``n`` elements laid out on a square.

    Four elements sit on the corners of a ``spacing``-side square, ordered
    counter-clockwise from the first quadrant. Other perfect squares ``k*k``
    form a row-major ``k x k`` grid with pitch ``spacing``.
    """
    if n == 4:
        return 0.5 * spacing * np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])
    k = math.isqrt(n)
    if n < 1 or k * k != n:
        raise DomainError(f"element count must be 4 or a perfect square, got {n}")
    ticks = (np.arange(k) - (k - 1) / 2.0) * spacing
    yy, xx = np.meshgrid(ticks[::-1], ticks, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])


@dataclass(frozen=True)
class SceneConfig:
    """Geometry and device parameters; defaults reproduce the reference setup."""

    n_t: int = 4
    n_r: int = 4
    led_separation_cm: float = 2.0
    pd_separation_cm: float = 2.0
    h_lum_cm: float = 300.0
    h_ue_cm: float = 144.0
    receiver_kind: str = "perturbed"
    perturbation_deg: tuple[tuple[float, float], ...] = PAPER_PERTURBATION_DEG
    semi_angle_deg: float = 60.0
    fov_half_deg: float = 85.0
    area_cm2: float = 1.0
    ue_radius_cm: float = 0.0
    ue_angle_rad: float = 0.0
    cell_radius_cm: float | None = field(default=None)

    def __post_init__(self):
        if self.n_t < 1 or self.n_r < 1:
            raise ValidationError("n_t and n_r must be positive")
        if self.receiver_kind not in ("square", "perturbed"):
            raise ValidationError(f"receiver_kind must be 'square' or 'perturbed', got {self.receiver_kind!r}")
        if not self.h_lum_cm > self.h_ue_cm:
            raise ValidationError("h_lum_cm must exceed h_ue_cm")
        if not 0.0 <= self.ue_angle_rad < 2 * math.pi:
            raise ValidationError("ue_angle_rad must lie in [0, 2*pi)")
        if self.ue_radius_cm < 0:
            raise ValidationError("ue_radius_cm must be non-negative")
        if self.ue_radius_cm > self.r_cell + 1e-9:
            raise ValidationError(f"ue_radius_cm {self.ue_radius_cm} exceeds the cell radius {self.r_cell:.2f}")

    @property
    def lambertian_m(self) -> float:
        from flim.channel import lambertian_mode

        return lambertian_mode(self.semi_angle_deg)

    @property
    def r_cell(self) -> float:
        if self.cell_radius_cm is not None:
            return self.cell_radius_cm
        return cell_radius(self.h_lum_cm, self.h_ue_cm, self.lambertian_m)

    def at(self, radius_cm: float, angle_rad: float) -> SceneConfig:
        """Copy of this config with the UE moved to polar position (r, w)."""
        from dataclasses import replace

        return replace(self, ue_radius_cm=radius_cm, ue_angle_rad=angle_rad % (2 * math.pi))


@dataclass(frozen=True)
class Scene:
    leds: tuple[LedElement, ...]
    pds: tuple[PdElement, ...]
    ue_position: Vec3
    m: float

    @property
    def n_t(self) -> int:
        return len(self.leds)

    @property
    def n_r(self) -> int:
        return len(self.pds)


def _pd_angles(config: SceneConfig) -> Sequence[tuple[float, float]]:
    if config.receiver_kind == "square":
        return [(0.0, 0.0)] * config.n_r
    if len(config.perturbation_deg) != config.n_r:
        raise AngleListMismatch(f"{len(config.perturbation_deg)} perturbation angle pairs given for {config.n_r} PDs")
    return config.perturbation_deg


def build_scene(config: SceneConfig) -> Scene:
    """Place LEDs, PDs and the UE for ``config``."""
    angles = _pd_angles(config)
    led_xy = corner_offsets(config.n_t, config.led_separation_cm)
    pd_xy = corner_offsets(config.n_r, config.pd_separation_cm)
    leds = tuple(LedElement(Vec3(float(x), float(y), float(config.h_lum_cm)), config.semi_angle_deg) for x, y in led_xy)
    pds = tuple(
        PdElement(
            Vec3(float(x), float(y), 0.0),
            polar_deg=float(g),
            azimuth_deg=float(b),
            area_cm2=config.area_cm2,
            fov_half_deg=config.fov_half_deg,
        )
        for (x, y), (g, b) in zip(pd_xy, angles)
    )
    r, w = config.ue_radius_cm, config.ue_angle_rad
    ue = Vec3(r * math.cos(w), r * math.sin(w), float(config.h_ue_cm))
    return Scene(leds, pds, ue, config.lambertian_m)
