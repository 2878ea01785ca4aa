"""Joint ML detection and the linear MMSE + element-wise detector.

Batch functions (``*_indices``) work on ``(N, n_r)`` arrays of received
vectors and return codebook indices; the single-vector wrappers return a
:class:`Decision`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from flim.codebook import Codebook
from flim.errors import ConfigMismatch, SingularSystem

__all__ = [
    "Decision",
    "MmseFilter",
    "ml_indices",
    "ml_detect",
    "signal_autocorrelation",
    "mmse_filter",
    "elementwise_indices",
    "elementwise_detect",
    "inverse_map",
]

_CHUNK = 4096


def _entries(h) -> np.ndarray:
    return np.asarray(getattr(h, "entries", h), dtype=float)


@dataclass(frozen=True)
class Decision:
    vector_index: int
    bits: str
    equalized: np.ndarray | None = None
    repaired: bool = False


def ml_indices(y: np.ndarray, h, vectors: np.ndarray) -> np.ndarray:
    """Index of the codeword minimising ``||y - H s||`` for every row of ``y``.

    Distances are formed explicitly (not via the expanded quadratic) so exact
    ties resolve to the lowest index.
    """
    h = _entries(h)
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if y.shape[1] != h.shape[0] or np.shape(vectors)[1] != h.shape[1]:
        raise ConfigMismatch(f"y has {y.shape[1]} rows, H is {h.shape}, codewords have {np.shape(vectors)[1]} entries")
    rx = np.asarray(vectors, dtype=float) @ h.T
    out = np.empty(len(y), dtype=np.int64)
    step = max(1, _CHUNK * 64 // max(1, len(rx)))
    for start in range(0, len(y), step):
        block = y[start : start + step]
        diff = block[:, None, :] - rx[None, :, :]
        out[start : start + step] = np.argmin(np.einsum("nck,nck->nc", diff, diff), axis=1)
    return out


def ml_detect(y: np.ndarray, h, codebook: Codebook) -> Decision:
    t = int(ml_indices(y, h, codebook.vectors)[0])
    return Decision(t, codebook.labels[t])


def signal_autocorrelation(codebook: Codebook, centered: bool = False) -> np.ndarray:
    """``E[s s^T]`` over equiprobable codewords, or the covariance if ``centered``."""
    s = codebook.vectors
    if centered:
        s = s - s.mean(axis=0)
    return s.T @ s / len(s)


@dataclass(frozen=True)
class MmseFilter:
    f: np.ndarray
    r_s: np.ndarray
    sigma_w2: float
    mean: np.ndarray | None = None
    h: np.ndarray | None = None

    def apply(self, y: np.ndarray) -> np.ndarray:
        """Equalised estimates ``F y`` (plus the mean correction when centred)."""
        y = np.atleast_2d(y)
        if self.mean is None:
            return y @ self.f.T
        return self.mean + (y - self.h @ self.mean) @ self.f.T


def mmse_filter(h, codebook: Codebook, sigma_n2: float, centered: bool = False) -> MmseFilter:
    """Feed-forward MMSE filter ``F = R_s H^T (H R_s H^T + sigma^2 I)^-1``.

    The post-filter noise variance is identified with the channel noise
    variance ``sigma_n2``. With ``centered=True`` the covariance replaces the
    raw autocorrelation and the estimate becomes affine,
    ``mu + F (y - H mu)``.
    """
    h = _entries(h)
    if h.shape[1] != codebook.n_t:
        raise ConfigMismatch(f"H has {h.shape[1]} columns but codewords have {codebook.n_t} entries")
    if sigma_n2 < 0:
        raise ValueError("noise variance must be non-negative")
    r_s = signal_autocorrelation(codebook, centered)
    # With R_s = L L^T and H L = U S V^T the filter is L V S (S^2 + sigma^2)^-1 U^T.
    # Working with S rather than S^2 keeps channels with a 1e7 singular-value
    # spread inside double precision.
    w, q = np.linalg.eigh(r_s)
    root = q * np.sqrt(np.clip(w, 0.0, None))
    try:
        u, s, vt = np.linalg.svd(h @ root, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if sigma_n2 == 0:
        if len(s) < h.shape[0] or s[-1] <= s[0] * max(h.shape) * np.finfo(float).eps:
            raise SingularSystem("H R_s H^T is rank deficient and there is no noise term")
    k = len(s)
    f = root @ vt[:k].T @ np.diag(s / (s**2 + sigma_n2)) @ u[:, :k].T
    mean = codebook.vectors.mean(axis=0) if centered else None
    return MmseFilter(f, r_s, float(sigma_n2), mean, h if centered else None)


def _quantize(values: np.ndarray, alphabet: np.ndarray) -> np.ndarray:
    """Index of the nearest alphabet entry (sorted ascending); midpoints go down."""
    mids = (alphabet[1:] + alphabet[:-1]) / 2
    return np.searchsorted(mids, values, side="left")


def elementwise_indices(
    y: np.ndarray, mmse: MmseFilter, codebook: Codebook
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Element-wise decisions for a batch.

    Returns ``(indices, equalized, repaired)``. Each equalised coordinate is
    snapped to the nearest per-LED current; vectors that are not codewords
    are repaired to the nearest codeword in Euclidean distance.
    """
    if mmse.f.shape != (codebook.n_t, np.shape(y)[-1]):
        raise ConfigMismatch(f"filter shape {mmse.f.shape} does not fit y and the codebook")
    alphabet, radix, table = codebook.digit_table
    y_hat = mmse.apply(y)
    digits = _quantize(y_hat, alphabet)
    idx = table[digits @ radix]
    repaired = idx < 0
    if repaired.any():
        hard = alphabet[digits[repaired]]
        diff = hard[:, None, :] - codebook.vectors[None, :, :]
        idx[repaired] = np.argmin(np.einsum("nck,nck->nc", diff, diff), axis=1)
    return idx, y_hat, repaired


def elementwise_detect(y: np.ndarray, mmse: MmseFilter, codebook: Codebook) -> Decision:
    idx, y_hat, repaired = elementwise_indices(np.atleast_2d(y), mmse, codebook)
    t = int(idx[0])
    return Decision(t, codebook.labels[t], y_hat[0], bool(repaired[0]))


def inverse_map(decision: Decision, codebook: Codebook) -> str:
    """Bit string carried by the detected codeword."""
    return codebook.labels[decision.vector_index]
