import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flim.codebook import (
    Codebook,
    activation_pmf,
    assign_labels,
    build_codebook,
    build_universe,
    optimize_design,
    pam_alphabet,
    select_subset,
    spectral_efficiency,
)
from flim.codebook import _pairwise_distances, _union_bound_value, _reference_sigma, _label_ints
from flim.errors import BadRange, DomainError, SubsetInfeasible


def test_pam_alphabet():
    assert pam_alphabet(2, 500, 800).levels == (500, 800)
    assert pam_alphabet(3, 500, 800).levels == (500, 650, 800)
    assert pam_alphabet(1, 500, 800).levels == (500,)
    with pytest.raises(BadRange):
        pam_alphabet(2, 800, 500)


@given(st.integers(2, 64), st.floats(1, 1000), st.floats(1, 1000))
def test_pam_levels_increase_within_range(M, lo, span):
    levels = pam_alphabet(M, lo, lo + span).levels
    assert len(levels) == M
    assert levels[0] == lo and levels[-1] == lo + span
    assert all(a < b for a, b in zip(levels, levels[1:]))


@pytest.mark.parametrize("n_t", range(2, 6))
@pytest.mark.parametrize("M", range(1, 9))
def test_universe_sizes(n_t, M):
    alpha = pam_alphabet(M, 500, 800)
    assert len(build_universe("flim", n_t, alpha)) == (M + 1) ** n_t
    assert len(build_universe("smx", n_t, alpha)) == M**n_t
    assert len(build_universe("sm", n_t, alpha)) == n_t * M
    for n_a in range(1, n_t + 1):
        assert len(build_universe("gsm2", n_t, alpha, n_a)) == math.comb(n_t, n_a) * M**n_a


def test_flim_small_universes():
    assert len(build_universe("flim", 3, pam_alphabet(2, 500, 800))) == 27
    u = build_universe("flim", 4, pam_alphabet(1, 500, 800))
    assert u.shape == (16, 4)
    assert set(np.unique(u)) == {0.0, 500.0}


def test_gsm2_activation_patterns():
    u = build_universe("gsm2", 3, pam_alphabet(1, 500, 800), 2)
    patterns = [tuple(np.flatnonzero(v)) for v in u]
    assert patterns == [(0, 1), (0, 2), (1, 2)]


def _rows(a):
    return {tuple(r) for r in a}


@pytest.mark.parametrize("n_t,M", [(3, 2), (4, 1), (4, 2), (3, 3)])
def test_flim_is_union_of_baselines(n_t, M):
    alpha = pam_alphabet(M, 500, 800)
    flim = _rows(build_universe("flim", n_t, alpha))
    parts = [{(0.0,) * n_t}, _rows(build_universe("sm", n_t, alpha)), _rows(build_universe("smx", n_t, alpha))]
    parts += [_rows(build_universe("gsm2", n_t, alpha, n_a)) for n_a in range(2, n_t)]
    assert sum(len(p) for p in parts) == len(flim)
    assert set().union(*parts) == flim
    ext = (0.0,) + alpha.levels
    assert flim == set(itertools.product(ext, repeat=n_t))


def test_entry_counts_per_scheme():
    alpha = pam_alphabet(2, 500, 800)
    assert (build_universe("smx", 4, alpha) > 0).all()
    assert ((build_universe("sm", 4, alpha) == 0).sum(axis=1) == 3).all()
    assert ((build_universe("gsm2", 4, alpha, 2) == 0).sum(axis=1) == 2).all()


def test_select_all_is_identity():
    u = build_universe("flim", 4, pam_alphabet(1, 500, 800))
    assert np.array_equal(select_subset(u, 16, "all"), u)


def test_maxmin_beats_random_subsets():
    u = build_universe("flim", 3, pam_alphabet(2, 500, 800))
    chosen = select_subset(u, 16, "maxmin")
    assert len(chosen) == 16 and len(_rows(chosen)) == 16

    def min_dist(points):
        d = _pairwise_distances(points)
        return d[np.triu_indices(len(points), 1)].min()

    ours = min_dist(chosen)
    draws = np.random.default_rng(0)
    for _ in range(1000):
        assert ours >= min_dist(u[draws.choice(len(u), 16, replace=False)])


def test_gsm2_codebook_size():
    book = build_codebook("gsm2", 4, 2, n_active=2)
    assert book.universe_size == 24
    assert book.size == 16 and book.n_bits == 4


def test_subset_errors():
    u = build_universe("sm", 2, pam_alphabet(1, 500, 800))
    with pytest.raises(SubsetInfeasible):
        select_subset(u, 4)
    with pytest.raises(DomainError):
        select_subset(build_universe("flim", 2, pam_alphabet(1, 500, 800)), 3)


def test_gray_smx_labels():
    book = build_codebook("smx", 2, 4)
    levels = pam_alphabet(4, 500, 800).levels
    for k, want in enumerate(["00", "01", "11", "10"]):
        assert book.labels[book.vectors.tolist().index([levels[k], levels[0]])] == want + "00"
    assert book.labels[book.vectors.tolist().index([levels[2], levels[0]])] == "1100"


@pytest.mark.parametrize(
    "scheme,n_t,M,n_a",
    [
        ("smx", 4, 2, None),
        ("smx", 2, 4, None),
        ("sm", 4, 2, None),
        ("gsm2", 4, 2, 2),
        ("flim", 4, 1, None),
        ("flim", 3, 2, None),
    ],
)
def test_labels_bijective(scheme, n_t, M, n_a):
    book = build_codebook(scheme, n_t, M, n_active=n_a)
    assert sorted(book.label_ints.tolist()) == list(range(book.size))
    assert all(len(b) == book.n_bits for b in book.labels)
    for i, bits in enumerate(book.labels):
        assert book.index_of_label(bits) == i


@pytest.mark.parametrize("strategy", ["min_dist_max_hamming", "union_bound"])
def test_assign_labels_any_strategy_bijective(strategy):
    vectors = build_universe("flim", 3, pam_alphabet(1, 500, 800))
    labels = assign_labels(vectors, strategy)
    assert sorted(labels) == [format(i, "03b") for i in range(8)]


def test_flim_zero_vector_labels_far_from_unit_weight():
    # regression pin of the greedy rule's own output
    book = build_codebook("flim", 4, 1)
    ints = book.label_ints
    zero = int(np.flatnonzero((book.vectors == 0).all(axis=1))[0])
    unit = np.flatnonzero((book.vectors > 0).sum(axis=1) == 1)
    assert len(unit) == 4
    for i in unit:
        assert bin(int(ints[zero] ^ ints[i])).count("1") >= 3


def test_union_bound_search_improves_its_start():
    u = build_universe("gsm2", 4, pam_alphabet(2, 500, 800), 2)
    start = select_subset(u, 16, "maxmin")
    start_labels = _label_ints(assign_labels(start, "min_dist_max_hamming"))
    sigma = _reference_sigma(start)
    vectors, labels = optimize_design(u, 16, h=None, sigma_n=sigma, budget=1000, seed=0, initial=start)
    assert _union_bound_value(vectors, _label_ints(labels), sigma) <= _union_bound_value(start, start_labels, sigma)


def test_gsm2_design_is_deterministic():
    a = build_codebook("gsm2", 4, 2, n_active=2)
    b = build_codebook("gsm2", 4, 2, n_active=2)
    assert a.content_hash() == b.content_hash()


@pytest.mark.parametrize(
    "scheme,n_t,n_a,M,eta",
    [
        ("flim", 4, None, 1, 4),
        ("flim", 4, None, 3, 8),
        ("gsm2", 4, 2, 2, 4),
        ("gsm2", 4, 2, 8, 8),
        ("smx", 4, None, 2, 4),
        ("smx", 4, None, 4, 8),
        ("ssk", 8, None, None, 3),
        ("sm", 4, None, 4, 4),
        ("gssk", 5, 2, None, 3),
        ("gsm", 5, 2, 4, 5),
        ("gssk2", 6, None, None, 6),
    ],
)
def test_spectral_efficiency(scheme, n_t, n_a, M, eta):
    assert spectral_efficiency(scheme, n_t, n_a, M) == eta


def test_spectral_efficiency_matches_codebook_bits():
    for scheme, n_t, M, n_a in [("flim", 4, 1, None), ("flim", 3, 2, None), ("gsm2", 4, 2, 2), ("smx", 3, 2, None)]:
        assert build_codebook(scheme, n_t, M, n_active=n_a).n_bits == spectral_efficiency(scheme, n_t, n_a, M)


def test_spectral_efficiency_domain():
    with pytest.raises(DomainError):
        spectral_efficiency("ssk", 0)
    with pytest.raises(DomainError):
        spectral_efficiency("gsm2", 4, 5, 2)
    with pytest.raises(DomainError):
        spectral_efficiency("nope", 4, None, 2)


def test_activation_pmf():
    assert activation_pmf(build_codebook("smx", 4, 2)).nu.tolist() == [0, 0, 0, 0]
    assert activation_pmf(build_codebook("sm", 4, 2)).nu == pytest.approx([0.75] * 4)
    assert activation_pmf(build_codebook("flim", 4, 1)).nu == pytest.approx([0.5] * 4)


def test_json_round_trip():
    book = build_codebook("gsm2", 4, 2, n_active=2)
    again = Codebook.from_json(book.to_json())
    assert np.array_equal(again.vectors, book.vectors)
    assert again.labels == book.labels
    assert again.content_hash() == book.content_hash()


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.integers(1, 3))
def test_flim_codebook_entries_legal(n_t, M):
    book = build_codebook("flim", n_t, M)
    allowed = {0.0, *pam_alphabet(M, 500, 800).levels}
    assert set(np.unique(book.vectors)) <= allowed
    assert book.size == 2 ** math.floor(n_t * math.log2(M + 1))


def _bound_oracle(points, labels, sigma):
    from scipy.special import erfc

    c = len(points)
    total = 0.0
    for i in range(c):
        for j in range(c):
            d = math.dist(points[i], points[j])
            total += bin(int(labels[i], 2) ^ int(labels[j], 2)).count("1") * 0.5 * erfc(d / (2 * sigma) / math.sqrt(2))
    return total / (c * math.log2(c))


def test_exhaustive_union_bound_subset_is_optimal():
    u = build_universe("gsm2", 3, pam_alphabet(2, 500, 800), 2)  # K = 12, C = 8: 495 subsets
    sigma = _reference_sigma(u)
    chosen = select_subset(u, 8, "union_bound", sigma_n=sigma)
    best = _bound_oracle(chosen, assign_labels(chosen, "min_dist_max_hamming"), sigma)
    for combo in itertools.combinations(range(len(u)), 8):
        sub = u[list(combo)]
        assert best <= _bound_oracle(sub, assign_labels(sub, "min_dist_max_hamming"), sigma) * (1 + 1e-9)
    with pytest.raises(DomainError, match="limit"):
        select_subset(build_universe("flim", 3, pam_alphabet(2, 500, 800)), 16, "union_bound")
