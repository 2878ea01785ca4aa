"""Monte Carlo ABEP engine and condition-number sweeps.

Randomness is keyed, not sequential: symbols are processed in fixed-size
blocks and block ``b`` of SNR point ``k`` draws from a Philox generator
seeded with ``(seed, k, b)``. Results therefore do not depend on how blocks
are spread over workers, and a longer run with the same seed reproduces a
shorter one as its prefix.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from flim import analysis
from flim.channel import ChannelMatrix, channel_matrices, condition_number_db
from flim.codebook import Codebook
from flim.detect import elementwise_indices, ml_indices, mmse_filter
from flim.errors import ConfigMismatch, DomainError
from flim.geometry import SceneConfig

__all__ = [
    "DetectorSpec",
    "SimRun",
    "AbepPoint",
    "AbepCurve",
    "CnMap",
    "run_abep",
    "union_bound_curve",
    "snr_at_abep",
    "snr_gap_db",
    "sweep_cn",
    "polar_grid",
    "symbol_errors",
    "BLOCK_SIZE",
]

log = logging.getLogger(__name__)

BLOCK_SIZE = 8192


@dataclass(frozen=True)
class DetectorSpec:
    kind: str = "mmse"
    rs_variant: str = "raw"

    def __post_init__(self):
        if self.kind not in ("ml", "mmse"):
            raise DomainError(f"detector kind must be 'ml' or 'mmse', got {self.kind!r}")
        if self.rs_variant not in ("raw", "centered"):
            raise DomainError(f"rs_variant must be 'raw' or 'centered', got {self.rs_variant!r}")


@dataclass(frozen=True)
class SimRun:
    """One ABEP experiment: a codebook over a fixed channel at several SNRs.

    ``snr_convention`` selects whether Eb/N0 is referenced to the average
    transmit power (``transmit``) or the power after the channel
    (``received``). ``min_errors`` enables early termination of an SNR point
    once that many bit errors have accumulated.
    """

    codebook: Codebook
    channel: ChannelMatrix
    snr_grid_db: tuple[float, ...]
    n_symbols: int = 1_000_000
    seed: int = 0
    detector: DetectorSpec = field(default_factory=DetectorSpec)
    snr_convention: str = "transmit"
    min_errors: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(x) for x in self.snr_grid_db))
        if self.n_symbols < 1:
            raise DomainError("n_symbols must be >= 1")
        if any(b <= a for a, b in zip(self.snr_grid_db, self.snr_grid_db[1:])):
            raise DomainError("SNR grid must be strictly increasing")
        if self.snr_convention not in ("transmit", "received"):
            raise DomainError(f"unknown SNR convention {self.snr_convention!r}")
        if self.channel.n_t != self.codebook.n_t:
            raise ConfigMismatch(f"channel has {self.channel.n_t} LEDs, codebook {self.codebook.n_t}")

    @property
    def signal_power(self) -> float:
        if self.snr_convention == "transmit":
            return analysis.transmit_power(self.codebook)
        return analysis.empirical_received_power(self.channel, self.codebook)

    def noise_variance(self, eb_n0_db: float) -> float:
        return analysis.noise_variance(self.signal_power, self.codebook.n_bits, eb_n0_db)


@dataclass(frozen=True)
class AbepPoint:
    eb_n0_db: float
    abep: float
    bit_errors: int
    bits_sent: int
    repair_rate: float


@dataclass(frozen=True)
class AbepCurve:
    points: tuple[AbepPoint, ...]
    analytic: bool = False

    @property
    def eb_n0_db(self) -> np.ndarray:
        return np.array([p.eb_n0_db for p in self.points])

    @property
    def abep(self) -> np.ndarray:
        return np.array([p.abep for p in self.points])


def symbol_errors(run: SimRun, detector_state, sigma_n: float, snr_index: int, block_index: int):
    """Per-symbol bit errors and repair flags for one full block.

    The whole block is always drawn, so a shorter run sees an exact prefix
    of a longer one.
    """
    cb = run.codebook
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([run.seed, snr_index, block_index])))
    bits = rng.integers(0, 2, size=(BLOCK_SIZE, cb.n_bits), dtype=np.int64)
    noise = rng.standard_normal((BLOCK_SIZE, run.channel.n_r))

    weights = 1 << np.arange(cb.n_bits - 1, -1, -1, dtype=np.int64)
    label_to_index = np.empty(cb.size, dtype=np.int64)
    label_to_index[cb.label_ints] = np.arange(cb.size)
    sent = label_to_index[bits @ weights]
    y = cb.vectors[sent] @ run.channel.entries.T + sigma_n * noise

    if run.detector.kind == "ml":
        detected = ml_indices(y, run.channel, cb.vectors)
        repaired = np.zeros(BLOCK_SIZE, dtype=bool)
    else:
        detected, _, repaired = elementwise_indices(y, detector_state, cb)
    ints = cb.label_ints
    return np.bitwise_count(ints[sent] ^ ints[detected]).astype(np.int64), repaired


def _block(task):
    """Bit errors, repairs and symbols for the first ``n_valid`` symbols of a block."""
    run, detector_state, sigma_n, snr_index, block_index, n_valid = task
    errors, repaired = symbol_errors(run, detector_state, sigma_n, snr_index, block_index)
    return int(errors[:n_valid].sum()), int(repaired[:n_valid].sum()), n_valid


def _point_tasks(run, state, sigma_n, k, first_block, n_blocks):
    for b in range(first_block, first_block + n_blocks):
        start = b * BLOCK_SIZE
        if start >= run.n_symbols:
            return
        yield run, state, sigma_n, k, b, min(BLOCK_SIZE, run.n_symbols - start)


def run_abep(run: SimRun, workers: int = 1) -> AbepCurve:
    """Simulate bit error rate at every SNR of ``run``.

    Blocks are evaluated in waves; with early termination the point stops
    after the first block (in block order) at which the running error count
    reaches ``min_errors``, so the outcome is independent of ``workers``.
    """
    n_blocks_total = math.ceil(run.n_symbols / BLOCK_SIZE)
    wave = max(1, workers) * 4
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    points = []
    try:
        for k, eb_n0_db in enumerate(run.snr_grid_db):
            sigma2 = run.noise_variance(eb_n0_db)
            state = None
            if run.detector.kind == "mmse":
                state = mmse_filter(run.channel, run.codebook, sigma2, centered=run.detector.rs_variant == "centered")
            errors = repairs = symbols = 0
            for first in range(0, n_blocks_total, wave):
                tasks = list(_point_tasks(run, state, math.sqrt(sigma2), k, first, wave))
                results = pool.map(_block, tasks) if pool else map(_block, tasks)
                stop = False
                for e, r, n in results:
                    errors += e
                    repairs += r
                    symbols += n
                    if run.min_errors is not None and errors >= run.min_errors:
                        stop = True
                        break
                if stop:
                    break
            bits_sent = symbols * run.codebook.n_bits
            abep = errors / bits_sent
            if abep > 0.5:
                log.warning("ABEP %.3g above 0.5 at %.1f dB", abep, eb_n0_db)
            points.append(AbepPoint(eb_n0_db, abep, errors, bits_sent, repairs / symbols))
    finally:
        if pool is not None:
            pool.shutdown()
    return AbepCurve(tuple(points))


def union_bound_curve(run: SimRun) -> AbepCurve:
    """Analytic union bound evaluated on the SNR grid of ``run``."""
    pts = []
    for eb_n0_db in run.snr_grid_db:
        sigma_n = math.sqrt(run.noise_variance(eb_n0_db))
        pts.append(AbepPoint(eb_n0_db, analysis.union_bound_bep(run.channel, run.codebook, sigma_n), 0, 0, 0.0))
    return AbepCurve(tuple(pts), analytic=True)


def snr_at_abep(curve: AbepCurve, target: float) -> float | None:
    """Eb/N0 where the curve first crosses ``target``, by log-linear interpolation.

    Only points with a nonzero ABEP take part; returns ``None`` when no pair
    of consecutive such points brackets the target.
    """
    pts = [(p.eb_n0_db, p.abep) for p in curve.points if p.abep > 0]
    for (x0, p0), (x1, p1) in zip(pts, pts[1:]):
        if p0 >= target >= p1 and p0 > p1:
            t = (math.log10(p0) - math.log10(target)) / (math.log10(p0) - math.log10(p1))
            return x0 + t * (x1 - x0)
    return None


def snr_gap_db(worse: AbepCurve, better: AbepCurve, target: float = 1e-3) -> float | None:
    """How many dB ``better`` is ahead of ``worse`` at ABEP ``target``."""
    a, b = snr_at_abep(worse, target), snr_at_abep(better, target)
    if a is None or b is None:
        return None
    return a - b


@dataclass(frozen=True)
class CnMap:
    grid: np.ndarray
    radial_step_cm: float
    angular_step_deg: float
    mean_db: float
    std_db: float
    n_rank_deficient: int

    def rows(self):
        for r, w, cn in self.grid:
            yield float(r), float(w), float(cn)


def polar_grid(r_max_cm: float, radial_step_cm: float, angular_step_deg: float) -> tuple[np.ndarray, np.ndarray]:
    """Radii ``0, step, ...`` up to ``r_max`` and angles ``0 <= w < 360``."""
    if not radial_step_cm > 0 or not angular_step_deg > 0:
        raise DomainError("grid steps must be positive")
    radii = np.arange(0.0, r_max_cm + 1e-9, radial_step_cm)
    angles = np.arange(0.0, 360.0 - 1e-9, angular_step_deg)
    return radii, angles


def sweep_cn(config: SceneConfig, radial_step_cm: float = 2.5, angular_step_deg: float = 1.0) -> CnMap:
    """Condition number of the channel at every point of a polar grid over the cell."""
    radii, angles = polar_grid(config.r_cell, radial_step_cm, angular_step_deg)
    rr, ww = np.meshgrid(radii, angles, indexing="ij")
    w_rad = np.deg2rad(ww.ravel())
    xy = np.column_stack([rr.ravel() * np.cos(w_rad), rr.ravel() * np.sin(w_rad)])
    cn = np.asarray(condition_number_db(channel_matrices(config, xy)))
    finite = np.isfinite(cn)
    grid = np.column_stack([rr.ravel(), ww.ravel(), cn])
    return CnMap(
        grid=grid,
        radial_step_cm=radial_step_cm,
        angular_step_deg=angular_step_deg,
        mean_db=float(cn[finite].mean()) if finite.any() else math.inf,
        std_db=float(cn[finite].std()) if finite.any() else math.nan,
        n_rank_deficient=int((~finite).sum()),
    )
