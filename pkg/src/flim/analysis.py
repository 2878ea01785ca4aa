"""Power, SNR-per-bit and error-probability bounds.

Signal powers are in mA^2 (electrical units with unity E/O, O/E and
converter gains), so an ``n0`` given in the same units yields unitless
ratios.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from flim.codebook import Codebook
from flim.errors import ConfigMismatch, DomainError

__all__ = [
    "PowerReport",
    "qfunc",
    "symbol_second_moment",
    "received_electrical_power",
    "empirical_received_power",
    "transmit_power",
    "snr_per_bit",
    "to_db",
    "noise_variance",
    "power_report",
    "pairwise_error_probability",
    "union_bound_bep",
]

log = logging.getLogger(__name__)


def qfunc(x):
    """Gaussian tail probability ``Q(x) = P(N(0,1) > x)``."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def _h(h) -> np.ndarray:
    return np.asarray(getattr(h, "entries", h), dtype=float)


def symbol_second_moment(nu_i: float, M: int, i_lower: float, i_upper: float) -> float:
    """Closed-form ``E[s^2]`` of one LED whose active levels are uniform over M-PAM.

    ``nu_i`` is the probability that the LED is off.
    """
    if not 0.0 <= nu_i <= 1.0:
        raise DomainError(f"nu must lie in [0, 1], got {nu_i}")
    if M < 2:
        raise DomainError("closed form needs M >= 2; use the empirical moment for M = 1")
    span = i_upper - i_lower
    active = i_lower**2 + i_lower * span + (2 * M - 1) / (6 * (M - 1)) * span**2
    return (1.0 - nu_i) * active


def received_electrical_power(h, codebook: Codebook) -> float:
    """Received electrical power assuming independent LED currents.

    Uses per-LED ``E[s^2]`` and ``E[s]`` taken from the codebook. The
    cross terms ``E[s_k] E[s_l]`` are exact only when coordinates are
    independent, as for SMX or the full FLIM universe; otherwise the value
    differs from :func:`empirical_received_power` and the gap is logged.
    """
    h = _h(h)
    s = codebook.vectors
    if h.shape[1] != s.shape[1]:
        raise ConfigMismatch(f"H has {h.shape[1]} columns, codewords have {s.shape[1]} entries")
    m1 = s.mean(axis=0)
    m2 = (s**2).mean(axis=0)
    diagonal = np.sum(h**2 @ m2)
    row = h @ m1
    cross = np.sum(row**2 - (h**2) @ (m1**2))
    value = float(diagonal + cross)
    exact = empirical_received_power(h, codebook)
    if exact > 0 and abs(value - exact) > 1e-9 * exact:
        log.info("independent-coordinate power %.6g differs from the exact average %.6g", value, exact)
    return value


def empirical_received_power(h, codebook: Codebook) -> float:
    """Exact average of ``||H s||^2`` over equiprobable codewords."""
    rx = codebook.vectors @ _h(h).T
    return float(np.mean(np.sum(rx**2, axis=1)))


def transmit_power(codebook: Codebook) -> float:
    """Average ``||s||^2`` over the codebook."""
    return float(np.mean(np.sum(codebook.vectors**2, axis=1)))


def snr_per_bit(power: float, eta_bpcu: float, n0: float) -> float:
    """Linear ``Eb/N0 = P / (eta N0)``; use :func:`to_db` for decibels."""
    if not eta_bpcu > 0:
        raise DomainError(f"spectral efficiency must be positive, got {eta_bpcu}")
    if not n0 > 0:
        raise DomainError(f"N0 must be positive, got {n0}")
    return power / (eta_bpcu * n0)


def noise_variance(power: float, eta_bpcu: float, eb_n0_db: float) -> float:
    """Per-PD noise variance ``sigma_n^2 = N0`` (unit bandwidth) for a target Eb/N0."""
    if not eta_bpcu > 0:
        raise DomainError(f"spectral efficiency must be positive, got {eta_bpcu}")
    return power / (eta_bpcu * 10.0 ** (eb_n0_db / 10.0))


@dataclass(frozen=True)
class PowerReport:
    p_elec_received: float
    p_elec_transmit: float
    eta_bpcu: float
    eb_n0_db_received: float
    eb_n0_db_transmit: float
    p_elec_received_independent: float

    @property
    def path_loss_db(self) -> float:
        return self.eb_n0_db_received - self.eb_n0_db_transmit


def power_report(h, codebook: Codebook, n0: float) -> PowerReport:
    eta = float(codebook.n_bits)
    p_rx = empirical_received_power(h, codebook)
    p_tx = transmit_power(codebook)
    return PowerReport(
        p_elec_received=p_rx,
        p_elec_transmit=p_tx,
        eta_bpcu=eta,
        eb_n0_db_received=to_db(snr_per_bit(p_rx, eta, n0)),
        eb_n0_db_transmit=to_db(snr_per_bit(p_tx, eta, n0)),
        p_elec_received_independent=received_electrical_power(h, codebook),
    )


def pairwise_error_probability(h, s_i, s_j, sigma_n: float) -> float:
    """Probability that ML prefers ``s_j`` when ``s_i`` was sent, ignoring other codewords."""
    diff = _h(h) @ (np.asarray(s_i, dtype=float) - np.asarray(s_j, dtype=float))
    return float(qfunc(np.linalg.norm(diff) / (2.0 * sigma_n)))


def union_bound_bep(h, codebook: Codebook, sigma_n: float) -> float:
    """Union bound on the ML bit error probability.

    Sum over ordered codeword pairs of label Hamming distance times PEP,
    normalised by ``C log2 C``.
    """
    if not sigma_n > 0:
        raise DomainError(f"sigma_n must be positive, got {sigma_n}")
    rx = codebook.vectors @ _h(h).T
    diff = rx[:, None, :] - rx[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    ints = codebook.label_ints
    ham = np.bitwise_count(np.bitwise_xor.outer(ints, ints))
    c = codebook.size
    return float(np.sum(ham * qfunc(dist / (2.0 * sigma_n))) / (c * math.log2(c)))
