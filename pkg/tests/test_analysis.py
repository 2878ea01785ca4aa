import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flim import analysis
from flim.codebook import Codebook, activation_pmf, build_codebook, pam_alphabet
from flim.errors import DomainError


def test_qfunc_values():
    assert analysis.qfunc(0.0) == 0.5
    assert analysis.qfunc(1.0) == pytest.approx(0.158655253931457, rel=1e-12)


def test_second_moment_examples():
    assert analysis.symbol_second_moment(0.0, 2, 0.5, 0.8) == pytest.approx((0.5**2 + 0.8**2) / 2)
    assert analysis.symbol_second_moment(0.0, 2, 0.5, 0.8) == pytest.approx(0.445)
    assert analysis.symbol_second_moment(1.0, 7, 0.5, 0.8) == 0.0
    lo, span = 0.5, 0.3
    limit = lo**2 + lo * span + span**2 / 3
    assert analysis.symbol_second_moment(0.0, 10_000, lo, lo + span) == pytest.approx(limit, rel=1e-3)


def test_second_moment_domain():
    with pytest.raises(DomainError):
        analysis.symbol_second_moment(0.2, 1, 500, 800)
    with pytest.raises(DomainError):
        analysis.symbol_second_moment(1.5, 2, 500, 800)


@pytest.mark.parametrize(
    "scheme,n_t,M",
    # FLIM cases keep the whole (M+1)^n_t universe, so every coordinate is uniform
    [
        ("smx", 4, 2),
        ("smx", 2, 4),
        ("smx", 3, 8),
        ("sm", 4, 2),
        ("sm", 2, 4),
        ("flim", 2, 3),
        ("flim", 4, 3),
        ("flim", 1, 3),
    ],
)
def test_closed_form_matches_column_moments(scheme, n_t, M):
    book = build_codebook(scheme, n_t, M)
    assert book.size == book.universe_size
    nu = activation_pmf(book).nu
    empirical = (book.vectors**2).mean(axis=0)
    for i in range(n_t):
        closed = analysis.symbol_second_moment(nu[i], M, 500.0, 800.0)
        assert closed == pytest.approx(empirical[i], rel=1e-9)


def test_flim_m1_moment_is_half_of_il_squared():
    book = build_codebook("flim", 4, 1)
    assert (book.vectors**2).mean(axis=0) == pytest.approx([0.5 * 500.0**2] * 4)


def test_received_power_independent_coordinates(centre_channel):
    book = build_codebook("flim", 4, 1)
    eq7 = analysis.received_electrical_power(centre_channel, book)
    assert eq7 == pytest.approx(analysis.empirical_received_power(centre_channel, book), rel=1e-9)


def test_received_power_trivial_cases():
    one = build_codebook("smx", 1, 2)
    assert analysis.received_electrical_power(np.eye(1), one) == pytest.approx(0.445e6)
    zero = Codebook("flim", np.zeros((2, 1)) + [[0.0], [500.0]], ("0", "1"), pam_alphabet(1, 500, 800), 2)
    assert analysis.received_electrical_power(np.zeros((1, 1)), zero) == 0.0


def test_received_power_logs_gap_for_correlated_subsets(centre_channel, caplog):
    book = build_codebook("gsm2", 4, 2, n_active=2)
    with caplog.at_level("INFO", logger="flim.analysis"):
        analysis.received_electrical_power(centre_channel, book)
    assert "differs" in caplog.text


def test_snr_per_bit():
    assert analysis.snr_per_bit(1.0, 1, 1.0) == 1.0
    assert analysis.to_db(analysis.snr_per_bit(1.0, 1, 1.0)) == 0.0
    assert analysis.snr_per_bit(3.0, 4, 2.0) == pytest.approx(analysis.snr_per_bit(3.0, 2, 2.0) / 2)
    for args in ((1.0, 0, 1.0), (1.0, 1, 0.0), (1.0, -1, 1.0)):
        with pytest.raises(DomainError):
            analysis.snr_per_bit(*args)


def test_noise_variance_inverts_snr():
    sigma2 = analysis.noise_variance(1e5, 4, 30.0)
    assert analysis.to_db(analysis.snr_per_bit(1e5, 4, sigma2)) == pytest.approx(30.0)


def test_path_loss_at_centre(centre_channel):
    report = analysis.power_report(centre_channel, build_codebook("flim", 4, 1), 1.0)
    assert report.path_loss_db == pytest.approx(analysis.to_db(report.p_elec_received / report.p_elec_transmit))
    # entries of order 1e-5 put the electrical loss near -80 to -100 dB
    assert -100.0 < report.path_loss_db < -80.0


def test_pep():
    s = np.array([500.0, 0.0])
    assert analysis.pairwise_error_probability(np.eye(2), s, s, 1.0) == 0.5
    t = np.array([500.0, 2.0])
    assert analysis.pairwise_error_probability(np.eye(2), s, t, 1.0) == pytest.approx(0.158655253931457)
    assert analysis.pairwise_error_probability(np.eye(2), s, t, 1e-6) == 0.0


@given(
    st.floats(0.01, 1e3),
    st.lists(st.floats(0, 1000), min_size=2, max_size=2),
    st.lists(st.floats(0, 1000), min_size=2, max_size=2),
)
def test_pep_symmetric(sigma, a, b):
    h = np.array([[0.9, 0.2], [0.1, 0.7]])
    assert analysis.pairwise_error_probability(h, a, b, sigma) == analysis.pairwise_error_probability(h, b, a, sigma)


def test_union_bound_two_codewords_is_exact():
    book = build_codebook("smx", 1, 2)
    sigma = 100.0
    exact = analysis.qfunc(300.0 / (2 * sigma))
    assert analysis.union_bound_bep(np.eye(1), book, sigma) == pytest.approx(float(exact))


def test_union_bound_large_noise_limit():
    book = build_codebook("smx", 2, 2)
    # all PEPs 1/2: sum of Hamming distances over ordered pairs is 16 for 2-bit labels
    assert analysis.union_bound_bep(np.eye(2), book, 1e12) == pytest.approx(16 * 0.5 / (4 * 2))
    assert analysis.union_bound_bep(np.eye(2), book, 1e12) == pytest.approx(1.0)


def test_union_bound_monotone_in_snr(centre_channel):
    book = build_codebook("gsm2", 4, 2, n_active=2)
    sigmas = np.logspace(-8, -3, 30)[::-1]
    values = [analysis.union_bound_bep(centre_channel, book, s) for s in sigmas]
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_union_bound_rejects_zero_noise():
    with pytest.raises(DomainError):
        analysis.union_bound_bep(np.eye(1), build_codebook("smx", 1, 2), 0.0)
