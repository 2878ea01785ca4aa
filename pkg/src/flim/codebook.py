"""Transmit symbol sets, subset selection and bit labelling.

Currents are in milliamps throughout. A codebook is the ordered list of the
``C = 2**floor(log2 K)`` transmit vectors actually used, together with the
one-to-one map from ``log2 C``-bit labels onto them.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import erfc
from scipy.stats import norm

from flim.errors import BadRange, DomainError, SubsetInfeasible

__all__ = [
    "SCHEMES",
    "PamAlphabet",
    "Codebook",
    "ActivationPmf",
    "pam_alphabet",
    "build_universe",
    "select_subset",
    "assign_labels",
    "optimize_design",
    "build_codebook",
    "spectral_efficiency",
    "activation_pmf",
]

SCHEMES = ("smx", "sm", "gsm2", "flim")

_SUBSET_STRATEGIES = ("all", "maxmin", "union_bound")
_LABEL_STRATEGIES = ("gray", "min_dist_max_hamming", "union_bound")

# exhaustive union-bound subset search gives up beyond this many candidates
MAX_EXHAUSTIVE_SUBSETS = 5000


@dataclass(frozen=True)
class PamAlphabet:
    order: int
    i_lower_ma: float
    i_upper_ma: float
    levels: tuple[float, ...]


def pam_alphabet(M: int, i_lower_ma: float, i_upper_ma: float) -> PamAlphabet:
    """Unipolar M-PAM drive currents evenly spaced on ``[i_lower, i_upper]``.

    ``M = 1`` yields the single level ``i_lower``.
    """
    if M < 1:
        raise DomainError(f"PAM order must be >= 1, got {M}")
    if not 0 < i_lower_ma < i_upper_ma:
        raise BadRange(f"need 0 < I_L < I_U, got I_L={i_lower_ma}, I_U={i_upper_ma}")
    if M == 1:
        levels = (float(i_lower_ma),)
    else:
        step = (i_upper_ma - i_lower_ma) / (M - 1)
        levels = tuple(float(i_lower_ma + k * step) for k in range(M - 1)) + (float(i_upper_ma),)
    return PamAlphabet(M, float(i_lower_ma), float(i_upper_ma), levels)


def _check_scheme(scheme: str, n_t: int, n_active: int | None) -> None:
    if scheme not in SCHEMES:
        raise DomainError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if scheme == "gsm2":
        if n_active is None:
            raise DomainError("gsm2 needs n_active")
        if not 1 <= n_active <= n_t:
            raise DomainError(f"n_active must lie in [1, {n_t}], got {n_active}")


def build_universe(
    scheme: str,
    n_t: int,
    alphabet: PamAlphabet,
    n_active: int | None = None,
    zero_level_ma: float = 0.0,
) -> np.ndarray:
    """All transmit vectors a scheme can emit, shape ``(K, n_t)``.

    Vectors are grouped by activation pattern (patterns in lexicographic
    order of their active LED indices) and, within a pattern, ordered
    lexicographically by level. FLIM is the full Cartesian power of
    ``{I_0} + levels``, which makes the all-off vector first.
    """
    if n_t < 1:
        raise DomainError("n_t must be positive")
    _check_scheme(scheme, n_t, n_active)
    levels = alphabet.levels
    if scheme == "flim":
        ext = (float(zero_level_ma),) + levels
        return np.array(list(itertools.product(ext, repeat=n_t)), dtype=float)
    n_a = {"smx": n_t, "sm": 1, "gsm2": n_active}[scheme]
    rows = []
    for active in itertools.combinations(range(n_t), n_a):
        for values in itertools.product(levels, repeat=n_a):
            v = [float(zero_level_ma)] * n_t
            for i, x in zip(active, values):
                v[i] = x
            rows.append(v)
    return np.array(rows, dtype=float)


def _pairwise_distances(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _project(vectors: np.ndarray, h) -> np.ndarray:
    if h is None:
        return vectors
    h = getattr(h, "entries", h)
    return vectors @ np.asarray(h, dtype=float).T


def _greedy_maxmin(points: np.ndarray, size: int) -> np.ndarray:
    """Farthest-point insertion from index 0; ties go to the lowest index."""
    dist = _pairwise_distances(points)
    chosen = [0]
    nearest = dist[0].copy()
    nearest[0] = -np.inf
    for _ in range(size - 1):
        k = int(np.argmax(nearest))
        chosen.append(k)
        nearest = np.minimum(nearest, dist[k])
        nearest[chosen] = -np.inf
    return np.sort(np.array(chosen))


def _reference_sigma(points: np.ndarray, target_pep: float = 1e-3) -> float:
    """Noise level at which the closest pair of ``points`` has PEP ``target_pep``."""
    d = _pairwise_distances(points)
    d_min = d[np.triu_indices(len(points), 1)].min()
    return float(d_min / (2 * norm.isf(target_pep)))


def _pep_matrix(points: np.ndarray, sigma_n: float) -> np.ndarray:
    return 0.5 * erfc(_pairwise_distances(points) / (2 * sigma_n) / math.sqrt(2))


def _label_ints(labels) -> np.ndarray:
    return np.array([int(b, 2) for b in labels], dtype=np.int64)


def _hamming_matrix(ints: np.ndarray) -> np.ndarray:
    return np.bitwise_count(np.bitwise_xor.outer(ints, ints)).astype(float)


def _union_bound_value(points: np.ndarray, label_ints: np.ndarray, sigma_n: float) -> float:
    c = len(points)
    total = np.sum(_hamming_matrix(label_ints) * _pep_matrix(points, sigma_n))
    return float(total / (c * math.log2(c)))


def select_subset(
    universe: np.ndarray,
    size: int,
    strategy: str = "maxmin",
    *,
    h=None,
    sigma_n: float | None = None,
) -> np.ndarray:
    """Pick ``size`` vectors from ``universe``; returned in universe order.

    ``maxmin`` greedily maximises the minimum pairwise distance, measured in
    transmit space or, when ``h`` is given, after the channel. ``union_bound``
    exhaustively searches subsets (labelled by ``min_dist_max_hamming``) for
    the smallest union bound, which is only tractable for tiny universes.
    """
    universe = np.asarray(universe, dtype=float)
    k = len(universe)
    if size > k:
        raise SubsetInfeasible(f"cannot choose {size} vectors from a universe of {k}")
    if size < 1 or size & (size - 1):
        raise DomainError(f"codebook size must be a power of two, got {size}")
    if strategy not in _SUBSET_STRATEGIES:
        raise DomainError(f"unknown subset strategy {strategy!r}")
    if strategy == "all" or size == k:
        if size != k:
            raise DomainError("strategy 'all' needs size equal to the universe size")
        return universe.copy()
    points = _project(universe, h)
    if strategy == "maxmin":
        return universe[_greedy_maxmin(points, size)]

    n_candidates = math.comb(k, size)
    if n_candidates > MAX_EXHAUSTIVE_SUBSETS:
        raise DomainError(
            f"exhaustive search over {n_candidates} subsets exceeds the limit of {MAX_EXHAUSTIVE_SUBSETS}; "
            "use labels='union_bound', which searches subsets locally"
        )
    sigma = sigma_n if sigma_n is not None else _reference_sigma(points)
    best, best_value = None, math.inf
    for combo in itertools.combinations(range(k), size):
        idx = np.array(combo)
        labels = _min_dist_max_hamming(universe[idx], h)
        value = _union_bound_value(points[idx], _label_ints(labels), sigma)
        if value < best_value - 1e-15:
            best, best_value = idx, value
    return universe[best]


def _bits(value: int, width: int) -> str:
    return format(value, f"0{width}b") if width else ""


def _gray_per_led(vectors: np.ndarray) -> list[str]:
    per_led = np.unique(vectors)
    a = len(per_led)
    n_t = vectors.shape[1]
    width = int(math.log2(a)) if a > 1 else 0
    if (1 << width) != a or len(vectors) != a**n_t or len({tuple(v) for v in vectors}) != len(vectors):
        raise DomainError("Gray labelling needs the full Cartesian product of a power-of-two per-LED alphabet")
    idx = np.searchsorted(per_led, vectors)
    gray = idx ^ (idx >> 1)
    return ["".join(_bits(int(g), width) for g in row) for row in gray]


def _min_dist_max_hamming(vectors: np.ndarray, h=None) -> list[str]:
    """Closest vector pairs receive the most different labels.

    Pairs are visited by increasing distance (ties by lexicographic order of
    the vectors). An unlabelled pair takes the available label pair with the
    largest Hamming distance; a half-labelled pair gives its unlabelled member
    the available label farthest from its partner's.
    """
    c = len(vectors)
    n_bits = int(math.log2(c))
    points = _project(vectors, h)
    rank = np.empty(c, dtype=np.int64)
    rank[np.lexsort(vectors.T[::-1])] = np.arange(c)
    dist = _pairwise_distances(points)
    iu, ju = np.triu_indices(c, 1)
    lo = np.minimum(rank[iu], rank[ju])
    hi = np.maximum(rank[iu], rank[ju])
    order = np.lexsort((hi, lo, dist[iu, ju]))

    ham = _hamming_matrix(np.arange(c))
    free = np.ones(c, dtype=bool)
    label = np.full(c, -1, dtype=np.int64)
    for p in order:
        i, j = int(iu[p]), int(ju[p])
        if rank[i] > rank[j]:
            i, j = j, i
        if label[i] >= 0 and label[j] >= 0:
            continue
        if label[i] < 0 and label[j] < 0:
            masked = np.where(np.outer(free, free), ham, -1.0)
            np.fill_diagonal(masked, -1.0)
            a, b = np.unravel_index(int(np.argmax(masked)), masked.shape)
            label[i], label[j] = a, b
            free[[a, b]] = False
        else:
            known, todo = (i, j) if label[i] >= 0 else (j, i)
            b = int(np.argmax(np.where(free, ham[label[known]], -1.0)))
            label[todo] = b
            free[b] = False
        if not free.any():
            break
    return [_bits(int(v), n_bits) for v in label]


def optimize_design(
    universe: np.ndarray,
    size: int,
    *,
    h=None,
    sigma_n: float | None = None,
    budget: int = 1000,
    seed: int = 0,
    search_subset: bool = True,
    initial: np.ndarray | None = None,
) -> tuple[np.ndarray, list[str]]:
    """Local search over subset membership and label permutation.

    Starts from the greedy max-min subset (or ``initial``) labelled by
    ``min_dist_max_hamming`` and spends ``budget`` random moves, keeping
    only those that lower the union bound at noise level ``sigma_n``. A move
    either swaps the labels of two codewords or, when ``search_subset`` is
    set and the universe is larger than ``size``, replaces a codeword by an
    unused vector that inherits its label.
    """
    universe = np.asarray(universe, dtype=float)
    k = len(universe)
    if size > k:
        raise SubsetInfeasible(f"cannot choose {size} vectors from a universe of {k}")
    points = _project(universe, h)
    if initial is None:
        sel = _greedy_maxmin(points, size) if size < k else np.arange(k)
    else:
        lookup = {tuple(v): n for n, v in enumerate(universe)}
        sel = np.array([lookup[tuple(v)] for v in np.asarray(initial, dtype=float)])
    sigma = sigma_n if sigma_n is not None else _reference_sigma(points[sel])
    pep_all = _pep_matrix(points, sigma)
    labels = _label_ints(_min_dist_max_hamming(universe[sel], h))

    rng = np.random.default_rng(seed)
    in_use = np.zeros(k, dtype=bool)
    in_use[sel] = True
    pep = pep_all[np.ix_(sel, sel)]
    ham = _hamming_matrix(labels)
    can_swap_subset = search_subset and size < k
    for _ in range(budget):
        if can_swap_subset and rng.random() < 0.5:
            p = int(rng.integers(size))
            unused = np.flatnonzero(~in_use)
            u = int(unused[rng.integers(len(unused))])
            new_row = pep_all[u, sel]
            new_row[p] = pep_all[u, u]
            delta = 2 * np.dot(ham[p], new_row - pep[p])
            if delta < -1e-18:
                in_use[sel[p]] = False
                in_use[u] = True
                sel[p] = u
                pep[p, :] = new_row
                pep[:, p] = new_row
        else:
            a, b = rng.choice(size, 2, replace=False)
            mask = np.ones(size, dtype=bool)
            mask[[a, b]] = False
            delta = 2 * np.dot((ham[b] - ham[a])[mask], (pep[a] - pep[b])[mask])
            if delta < -1e-18:
                labels[[a, b]] = labels[[b, a]]
                ham[[a, b], :] = ham[[b, a], :]
                ham[:, [a, b]] = ham[:, [b, a]]
    order = np.argsort(sel, kind="stable")
    n_bits = int(math.log2(size))
    return universe[sel[order]], [_bits(int(v), n_bits) for v in labels[order]]


def assign_labels(
    vectors: np.ndarray,
    strategy: str,
    *,
    h=None,
    sigma_n: float | None = None,
    budget: int = 1000,
    seed: int = 0,
) -> list[str]:
    """Bit labels for ``vectors`` (a power-of-two count), one per vector.

    ``gray`` Gray-codes each LED's level index and concatenates, LED 0 first;
    it needs the vectors to form a full Cartesian product.
    ``min_dist_max_hamming`` is the greedy pairing rule described in
    :func:`_min_dist_max_hamming`. ``union_bound`` refines that with a label
    permutation search (see :func:`optimize_design`).
    """
    vectors = np.asarray(vectors, dtype=float)
    c = len(vectors)
    if c < 2 or c & (c - 1):
        raise DomainError(f"need a power-of-two number of vectors, got {c}")
    if strategy == "gray":
        return _gray_per_led(vectors)
    if strategy == "min_dist_max_hamming":
        return _min_dist_max_hamming(vectors, h)
    if strategy == "union_bound":
        _, labels = optimize_design(
            vectors, c, h=h, sigma_n=sigma_n, budget=budget, seed=seed, search_subset=False, initial=vectors
        )
        return labels
    raise DomainError(f"unknown label strategy {strategy!r}")


@dataclass(frozen=True)
class Codebook:
    """Selected transmit vectors with their bit labels.

    ``vectors[t]`` is sent for the bit string ``labels[t]``. ``led_alphabet``
    is the set of currents an element-wise detector decides between.
    """

    scheme: str
    vectors: np.ndarray
    labels: tuple[str, ...]
    alphabet: PamAlphabet
    universe_size: int
    n_active: int | None = None
    zero_level_ma: float = 0.0
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        v = np.array(self.vectors, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "labels", tuple(self.labels))
        c = len(v)
        if c < 2 or c & (c - 1):
            raise DomainError(f"codebook size must be a power of two >= 2, got {c}")
        if c != 2 ** int(math.floor(math.log2(self.universe_size))):
            raise DomainError(f"codebook size {c} does not match universe size {self.universe_size}")
        if len(self.labels) != c:
            raise DomainError("one label per vector required")
        n_bits = self.n_bits
        if any(len(b) != n_bits or set(b) - {"0", "1"} for b in self.labels):
            raise DomainError(f"labels must be {n_bits}-bit strings")
        if len(set(self.labels)) != c:
            raise DomainError("labels must be distinct")
        allowed = set(self.alphabet.levels) | {self.zero_level_ma}
        if not set(np.unique(v)) <= allowed:
            raise DomainError("vector entries must be PAM levels or the zero level")
        self._index.update({b: t for t, b in enumerate(self.labels)})

    @property
    def size(self) -> int:
        return len(self.vectors)

    @property
    def n_t(self) -> int:
        return self.vectors.shape[1]

    @property
    def n_bits(self) -> int:
        return int(math.log2(len(self.vectors)))

    @property
    def order(self) -> int:
        return self.alphabet.order

    @property
    def led_alphabet(self) -> np.ndarray:
        if self.scheme == "smx":
            return np.array(self.alphabet.levels)
        return np.array((self.zero_level_ma,) + self.alphabet.levels)

    @cached_property
    def digit_table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Mixed-radix lookup from per-LED level indices to codeword index.

        Returns ``(alphabet, radix, table)``; ``table[digits @ radix]`` is the
        codeword index, or -1 when the digit vector is not a codeword.
        """
        alphabet = np.sort(self.led_alphabet)
        a = len(alphabet)
        radix = a ** np.arange(self.n_t - 1, -1, -1)
        table = np.full(a**self.n_t, -1, dtype=np.int64)
        table[np.searchsorted(alphabet, self.vectors) @ radix] = np.arange(self.size)
        return alphabet, radix, table

    @property
    def label_ints(self) -> np.ndarray:
        return _label_ints(self.labels)

    @property
    def label_bits(self) -> np.ndarray:
        """``(C, n_bits)`` 0/1 array of the labels."""
        return np.array([[int(ch) for ch in b] for b in self.labels], dtype=np.uint8)

    def index_of_label(self, bits: str) -> int:
        return self._index[bits]

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "n_t": self.n_t,
            "M": self.alphabet.order,
            "n_active": self.n_active,
            "i_lower_ma": self.alphabet.i_lower_ma,
            "i_upper_ma": self.alphabet.i_upper_ma,
            "zero_level_ma": self.zero_level_ma,
            "universe_size": self.universe_size,
            "vectors": self.vectors.tolist(),
            "labels": list(self.labels),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, doc: dict) -> Codebook:
        alphabet = pam_alphabet(int(doc["M"]), doc["i_lower_ma"], doc["i_upper_ma"])
        return cls(
            scheme=doc["scheme"],
            vectors=np.array(doc["vectors"], dtype=float),
            labels=tuple(doc["labels"]),
            alphabet=alphabet,
            universe_size=int(doc["universe_size"]),
            n_active=doc.get("n_active"),
            zero_level_ma=float(doc.get("zero_level_ma", 0.0)),
        )

    @classmethod
    def from_json(cls, text: str) -> Codebook:
        return cls.from_dict(json.loads(text))

    def content_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


_DEFAULT_LABELS = {"smx": "gray", "flim": "min_dist_max_hamming", "gsm2": "union_bound", "sm": "union_bound"}


def build_codebook(
    scheme: str,
    n_t: int,
    M: int,
    *,
    n_active: int | None = None,
    i_lower_ma: float = 500.0,
    i_upper_ma: float = 800.0,
    zero_level_ma: float = 0.0,
    subset: str = "maxmin",
    labels: str = "auto",
    h=None,
    sigma_n: float | None = None,
    budget: int = 1000,
    seed: int = 0,
) -> Codebook:
    """Universe, subset and labels in one step.

    ``labels='auto'`` picks Gray for SMX, the min-distance/max-Hamming rule
    for FLIM and union-bound search for GSM-II and SM. For ``union_bound``
    labelling on a universe larger than the codebook, the subset is searched
    jointly with the labels and ``subset`` only seeds the search.
    """
    alphabet = pam_alphabet(M, i_lower_ma, i_upper_ma)
    universe = build_universe(scheme, n_t, alphabet, n_active, zero_level_ma)
    k = len(universe)
    c = 2 ** int(math.floor(math.log2(k)))
    if c < 2:
        raise DomainError(f"{scheme} with n_t={n_t}, M={M} carries no bits")
    strategy = _DEFAULT_LABELS[scheme] if labels == "auto" else labels
    if strategy not in _LABEL_STRATEGIES:
        raise DomainError(f"unknown label strategy {strategy!r}")
    vectors = select_subset(universe, c, "all" if c == k else subset, h=h, sigma_n=sigma_n)
    if strategy == "union_bound":
        vectors, bits = optimize_design(
            universe, c, h=h, sigma_n=sigma_n, budget=budget, seed=seed, search_subset=c < k, initial=vectors
        )
    else:
        bits = assign_labels(vectors, strategy, h=h)
    return Codebook(scheme, vectors, tuple(bits), alphabet, k, n_active if scheme == "gsm2" else None, zero_level_ma)


def _log2_at_least_one(x: float, what: str) -> float:
    if x < 1:
        raise DomainError(f"log2 argument {what} = {x} is below 1")
    return math.log2(x)


def spectral_efficiency(scheme: str, n_t: int, n_a: int | None = None, M: int | None = None) -> float:
    """Bits per channel use of a spatial-modulation-family scheme.

    Supported names: ``ssk, sm, gssk, gsm, gsm2, smx, flim, gssk2``.
    """
    scheme = scheme.lower().replace("-", "").replace("_", "")
    scheme = {"gsmii": "gsm2", "gsskii": "gssk2"}.get(scheme, scheme)
    if scheme in ("gssk", "gsm", "gsm2"):
        if n_a is None or not 1 <= n_a <= n_t:
            raise DomainError(f"{scheme} needs 1 <= n_a <= n_t")
    if scheme in ("sm", "gsm", "gsm2", "smx", "flim") and (M is None or M < 1):
        raise DomainError(f"{scheme} needs a PAM order M >= 1")
    if scheme == "ssk":
        return _log2_at_least_one(n_t, "n_t")
    if scheme == "sm":
        return _log2_at_least_one(n_t, "n_t") + math.log2(M)
    if scheme == "gssk":
        return float(math.floor(_log2_at_least_one(math.comb(n_t, n_a), "C(n_t, n_a)")))
    if scheme == "gsm":
        return float(math.floor(_log2_at_least_one(math.comb(n_t, n_a), "C(n_t, n_a)"))) + math.log2(M)
    if scheme == "gsm2":
        return float(math.floor(_log2_at_least_one(math.comb(n_t, n_a) * M**n_a, "C(n_t, n_a) M^n_a")))
    if scheme == "smx":
        return n_t * _log2_at_least_one(M, "M")
    if scheme == "flim":
        return float(math.floor(n_t * math.log2(M + 1)))
    if scheme == "gssk2":
        return float(n_t)
    raise DomainError(f"unknown scheme {scheme!r}")


@dataclass(frozen=True)
class ActivationPmf:
    nu: np.ndarray


def activation_pmf(codebook: Codebook) -> ActivationPmf:
    """Per-LED fraction of codewords in which that LED is off."""
    off = codebook.vectors == codebook.zero_level_ma
    return ActivationPmf(off.mean(axis=0))
