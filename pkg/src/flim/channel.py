"""Line-of-sight DC gains, channel matrices and condition numbers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from flim.errors import DegenerateGeometry, DomainError
from flim.geometry import LedElement, PdElement, Scene, SceneConfig, Vec3, build_scene

__all__ = [
    "ChannelMatrix",
    "lambertian_mode",
    "los_gain",
    "channel_matrix",
    "channel_matrices",
    "condition_number_db",
]


def lambertian_mode(semi_angle_deg: float) -> float:
    """Lambertian order ``m = -1 / log2(cos(semi_angle))``."""
    if not 0.0 < semi_angle_deg < 90.0:
        raise DomainError(f"semi-angle must lie in (0, 90) deg, got {semi_angle_deg}")
    return -1.0 / math.log2(math.cos(math.radians(semi_angle_deg)))


def _gains(led_pos, pd_rel, pd_orient, ue, m, area, fov_deg):
    """Gain tensor of shape ``ue.shape[:-1] + (n_r, n_t)``.

    ``led_pos`` is (n_t, 3), ``pd_rel``/``pd_orient`` are (n_r, 3), ``ue`` is
    (..., 3). ``area`` and ``fov_deg`` broadcast over the PD axis.
    """
    ue = np.asarray(ue, dtype=float)
    d = led_pos[None, :, :] - pd_rel[:, None, :] - ue[..., None, None, :]
    dist = np.linalg.norm(d, axis=-1)
    if np.any(dist == 0):
        raise DegenerateGeometry("an LED coincides with a PD")
    facing = np.einsum("jk,...jik->...ji", pd_orient, d)
    cos_psi = facing / dist
    psi_deg = np.degrees(np.arccos(np.clip(cos_psi, -1.0, 1.0)))
    fov = np.asarray(fov_deg, dtype=float).reshape(-1, 1)
    visible = (facing > 0) & (psi_deg <= fov)
    area = np.asarray(area, dtype=float).reshape(-1, 1)
    # -n_z . d is the vertical drop from LED to PD
    drop = np.maximum(d[..., 2], 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = (m + 1) * area / (2 * np.pi * dist ** (m + 3)) * drop**m * facing
    return np.where(visible, gain, 0.0)


def los_gain(led: LedElement, pd: PdElement, ue_position: Vec3, m: float) -> float:
    """DC gain of the direct path from ``led`` to ``pd`` for a UE at ``ue_position``.

    Zero when the incidence angle exceeds the PD field of view or the PD faces
    away from the LED.
    """
    if not m > 0:
        raise DomainError(f"Lambertian mode must be positive, got {m}")
    g = _gains(
        led.position.array[None, :],
        pd.rel_position.array[None, :],
        pd.orientation.array[None, :],
        ue_position.array,
        m,
        pd.area_cm2,
        pd.fov_half_deg,
    )
    return float(g[0, 0])


@dataclass(frozen=True)
class ChannelMatrix:
    """``n_r x n_t`` matrix of unitless LoS DC gains; row j is PD j, column i LED i."""

    entries: np.ndarray
    ue_position: Vec3 | None = None

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        if e.ndim != 2:
            raise DomainError("channel matrix must be two-dimensional")
        if not np.all(np.isfinite(e)):
            raise DomainError("channel matrix has non-finite entries")
        if np.any(e < 0) or np.any(e > 1):
            raise DomainError("channel gains must lie in [0, 1]")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def n_r(self) -> int:
        return self.entries.shape[0]

    @property
    def n_t(self) -> int:
        return self.entries.shape[1]

    @classmethod
    def identity(cls, n: int) -> ChannelMatrix:
        return cls(np.eye(n))


def _scene_arrays(scene: Scene):
    led_pos = np.array([led.position for led in scene.leds], dtype=float)
    pd_rel = np.array([pd.rel_position for pd in scene.pds], dtype=float)
    pd_orient = np.array([pd.orientation for pd in scene.pds], dtype=float)
    area = np.array([pd.area_cm2 for pd in scene.pds])
    fov = np.array([pd.fov_half_deg for pd in scene.pds])
    return led_pos, pd_rel, pd_orient, area, fov


def channel_matrix(scene: Scene | SceneConfig) -> ChannelMatrix:
    """Assemble the channel matrix of a scene (or of the scene a config builds)."""
    if isinstance(scene, SceneConfig):
        scene = build_scene(scene)
    led_pos, pd_rel, pd_orient, area, fov = _scene_arrays(scene)
    h = _gains(led_pos, pd_rel, pd_orient, scene.ue_position.array, scene.m, area, fov)
    return ChannelMatrix(h, scene.ue_position)


def channel_matrices(config: SceneConfig, ue_xy: np.ndarray) -> np.ndarray:
    """Raw channel matrices for many UE positions at once, shape (G, n_r, n_t).

    ``ue_xy`` is a (G, 2) array of horizontal UE positions; the UE height is
    taken from ``config``.
    """
    scene = build_scene(config)
    led_pos, pd_rel, pd_orient, area, fov = _scene_arrays(scene)
    ue_xy = np.atleast_2d(np.asarray(ue_xy, dtype=float))
    ue = np.column_stack([ue_xy, np.full(len(ue_xy), config.h_ue_cm)])
    return _gains(led_pos, pd_rel, pd_orient, ue, scene.m, area, fov)


def condition_number_db(h) -> float | np.ndarray:
    """Condition number ``10*log10(s_max/s_min)`` from the singular values.

    Accepts a :class:`ChannelMatrix`, a single matrix, or a stack of matrices.
    Rank-deficient matrices map to ``+inf`` so sweeps keep going.
    """
    a = h.entries if isinstance(h, ChannelMatrix) else np.asarray(h, dtype=float)
    s = np.linalg.svd(a, compute_uv=False)
    s_max, s_min = s[..., 0], s[..., -1]
    # same rank tolerance as numpy.linalg.matrix_rank
    full_rank = s_min > s_max * max(a.shape[-2:]) * np.finfo(float).eps
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(full_rank, 10.0 * np.log10(s_max / np.where(full_rank, s_min, 1.0)), np.inf)
    return float(out) if np.ndim(out) == 0 else out
