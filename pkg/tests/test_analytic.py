import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catrepeater import analytic as an
from catrepeater.analytic import LinkParams, MixedLinkState

unit = st.floats(0.0, 1.0)


def large_link(alpha_sq, product=0.05, **kw):
    return LinkParams(alpha_sq, product / alpha_sq, **kw)


# -- parameters ----------------------------------------------------------------


def test_params_validation():
    with pytest.raises(ValueError):
        LinkParams(0.0, 0.1)
    with pytest.raises(ValueError):
        LinkParams(1.0, 1.0)
    with pytest.raises(ValueError):
        LinkParams(1.0, 0.1, eta_d=1.1)
    with pytest.raises(ValueError):
        LinkParams(1.0, 0.1, L0=-1)


def test_normalizations_are_consistent():
    p = LinkParams(0.7, 0.2)
    n = an.Normalizations.from_params(p)
    assert n.n_plus == pytest.approx(2 * (1 + math.exp(-1.4)))
    assert n.n_minus == pytest.approx(2 * (1 - math.exp(-1.4)))
    assert n.m_minus == pytest.approx(2 * (1 - math.exp(-2.8)))
    assert n.m_plus_theta == pytest.approx(2 * (1 + math.exp(-4 * 0.7 * 0.8)))
    assert n.m_minus_theta == pytest.approx(2 * (1 - math.exp(-4 * 0.7 * 0.8)))


def test_mixed_state_weights():
    s = MixedLinkState(0.8)
    assert s.f_plus == pytest.approx(0.2)
    with pytest.raises(ValueError):
        MixedLinkState(0.8, 0.3)
    with pytest.raises(ValueError):
        MixedLinkState(1.2)


# -- elementary link -------------------------------------------------------------


def test_eta_t():
    assert an.eta_t(LinkParams(1, 0.1, L0=0)) == 1.0
    assert an.eta_t(LinkParams(1, 0.1, L0=2 * 22 * math.log(2))) == pytest.approx(0.5)
    assert an.eta_t(LinkParams(1, 0.1, L0=100)) == pytest.approx(0.10303, abs=1e-5)


def test_link_probability_zero_detector():
    assert an.link_success_probability(LinkParams(1, 0.1, eta_d=0.0)) == 0.0


def test_link_probability_large_alpha_form():
    p = LinkParams(4.0, 0.0125, L0=100, eta_d=0.9)
    x = p.alpha_sq * p.tap
    approx = x * math.exp(-2 * x) * (2 + 4 * x) * an.eta_t(p) * p.eta_d
    assert an.link_success_probability(p) == pytest.approx(approx, rel=0.01)


def test_link_operating_point():
    p = large_link(2.0, L0=100, eta_d=0.9)
    assert an.link_time(p) == pytest.approx(0.054, rel=0.10)
    assert an.link_fidelity(p) == pytest.approx(1 / 1.1, abs=0.005)


def test_link_fidelity_limits():
    assert an.link_fidelity(LinkParams(1.0, 1e-9)) == pytest.approx(1.0, abs=1e-8)
    fids = [an.link_fidelity(large_link(a)) for a in (2.0, 4.0, 8.0)]
    assert max(fids) - min(fids) < 0.005


def test_link_time_scaling():
    p = LinkParams(1.0, 0.05, L0=100, eta_d=0.45)
    assert an.link_time(p.with_(eta_d=0.9)) == pytest.approx(an.link_time(p) / 2)
    with pytest.raises(ValueError):
        an.link_time(p.with_(L0=0.0))


def test_link_time_grows_beyond_optimal_tap():
    taps = np.linspace(0.01, 0.99, 99)
    times = np.array([an.link_time(LinkParams(1.0, t, L0=100)) for t in taps])
    best = int(np.argmin(times))
    assert np.all(np.diff(times[best:]) > 0)


def test_exact_link_forms_reduce_to_leading_order():
    for a, s in ((0.5, 0.05), (2.0, 0.1)):
        p = LinkParams(a, s)
        assert an.link_fidelity_exact(p, 1e-9) == pytest.approx(an.link_fidelity(p), abs=3 * (a * s) ** 2)
        ratio = an.link_success_probability_exact(p, 1e-9) / 1e-9
        assert ratio == pytest.approx(an.link_prefactor(p), rel=3 * (a * s) ** 2)


# -- swapping --------------------------------------------------------------------


def test_ideal_swap_is_perfect():
    p = LinkParams(1.0, 0.05, eta_d=1.0, eta_m=1.0)
    s = MixedLinkState(1.0)
    assert an.swap_numerator_odd(s, p) == pytest.approx(1.0)
    assert an.swap_denominator_odd(s, p) == pytest.approx(1.0)


def test_swap_numerator_frozen_value():
    # cosh/sinh form evaluated independently at F- = 0.9, |alpha|^2 = 1, tap 1e-6, eta = 0.81
    p = LinkParams(1.0, 1e-6, eta_d=0.9, eta_m=0.9)
    s = MixedLinkState(0.9)
    b2 = 1.0 * (1 - 1e-6)
    r = (1 - math.exp(-4 * b2)) / (1 + math.exp(-4 * b2))
    x = 2 * 0.19 * b2
    expected = (0.81 + (0.1 * r) ** 2) * math.cosh(x) + 2 * 0.9 * 0.1 * r * math.sinh(x)
    assert an.swap_numerator_odd(s, p) == pytest.approx(expected, rel=1e-12)


def test_even_terms_follow_from_exchange():
    p = LinkParams(0.8, 0.1)
    s = MixedLinkState(0.85)
    swapped = MixedLinkState(0.15)
    # exchanging the sector weights and the two normalizations maps odd onto even
    n = an.Normalizations.from_params(p)
    r = n.m_minus_theta / n.m_plus_theta
    x = 2 * (1 - p.eta) * p.beta_sq
    fm, fp = swapped.f_plus, swapped.f_minus
    expected = (fp**2 + (fm / r) ** 2) * math.cosh(x) + 2 * fp * fm / r * math.sinh(x)
    assert an.swap_numerator(s, p, "even") == pytest.approx(expected, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    a=st.floats(0.01, 6.0),
    tap=st.floats(0.001, 0.5),
    fm=unit,
    eta_d=st.floats(0.05, 1.0),
    eta_m=st.floats(0.05, 1.0),
)
def test_swap_fidelities_are_probabilities(a, tap, fm, eta_d, eta_m):
    p = LinkParams(a, tap, eta_d=eta_d, eta_m=eta_m)
    s = MixedLinkState(fm)
    for parity in ("odd", "even"):
        num, den = an.swap_numerator(s, p, parity), an.swap_denominator(s, p, parity)
        assert den >= num * (1 - 1e-12)
        assert 0.0 <= num / den <= 1.0 + 1e-12
    out = an.swap(s, p)
    assert out.state_after.f_minus + out.state_after.f_plus == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(0.01, 2.0), tap=st.floats(0.001, 0.3), eta=st.floats(0.3, 1.0))
def test_nested_fidelities_stay_in_range(a, tap, eta):
    p = LinkParams(a, tap, eta_d=eta, eta_m=1.0)
    for s in an.nested_states(p, 3):
        assert 0.0 <= s.f_minus <= 1.0
        assert 0.0 <= an.swap_fidelity(s, p, "even") <= 1.0


def test_small_alpha_swap_limits():
    p = LinkParams(1e-6, 1e-6, eta_d=0.9, eta_m=0.9)
    s = an.link_state(p)
    assert an.swap_fidelity(s, p) == pytest.approx(1 / (2 - 0.81), abs=1e-4)
    assert an.swap_success_probability(s, p) == pytest.approx(0.81 * (2 - 0.81) / 2, abs=1e-4)


def test_large_alpha_swap_limit():
    for a in (4.0, 6.0):
        p = LinkParams(a, 1e-4, eta_d=0.9, eta_m=0.9)
        s = MixedLinkState(1.0 - 1e-3)
        assert abs(an.swap_fidelity(s, p) - an.large_alpha_fidelity(p)) < 0.01
    p = LinkParams(2.0, 1e-9, eta_d=0.9, eta_m=0.9)
    assert an.large_alpha_fidelity(p) == pytest.approx(1 / (1 + math.tanh(0.76)), abs=1e-6)
    assert an.large_alpha_fidelity(p) < 0.7


def test_efficiency_threshold_at_large_alpha():
    good = LinkParams(2.0, 1e-9, eta_d=0.99, eta_m=0.99)
    bad = LinkParams(2.0, 1e-9, eta_d=0.98, eta_m=0.98)
    s = MixedLinkState(1.0)
    assert an.swap_fidelity(s, good) == pytest.approx(0.926, abs=0.001)
    assert an.swap_fidelity(s, bad) < 0.9


def test_count_probabilities():
    p = LinkParams(1.0, 0.05, eta_d=0.0)
    s = MixedLinkState(0.9)
    assert all(an.swap_probability_n(s, p, n) == 0.0 for n in range(1, 6))
    with pytest.raises(ValueError):
        an.swap_probability_n(s, LinkParams(1.0, 0.05), 0)
    with pytest.raises(ValueError):
        an.swap_probability_n(s, LinkParams(1.0, 0.05), 2, "odd")


def test_series_sum_identity():
    p = LinkParams(6.0, 1e-12, eta_d=0.9, eta_m=0.9)
    s = MixedLinkState(1.0)
    total = math.fsum(an.swap_probability_n(s, p, n) for n in range(1, 200))
    assert total == pytest.approx(1 - math.exp(-2 * p.eta * p.beta_sq), abs=1e-10)


def test_series_matches_class_totals():
    p = LinkParams(0.7, 0.1)
    s = MixedLinkState(0.8)
    odd = math.fsum(an.swap_probability_n(s, p, n) for n in range(1, 80, 2))
    even = math.fsum(an.swap_probability_n(s, p, n) for n in range(2, 80, 2))
    assert odd == pytest.approx(an.swap_class_probability(s, p, "odd"), rel=1e-12)
    assert even == pytest.approx(an.swap_class_probability(s, p, "even"), rel=1e-12)


def test_counts_use_log_space():
    p = LinkParams(4.0, 0.01)
    assert an.swap_probability_n(MixedLinkState(1.0), p, 150) >= 0.0


# -- postselection and chain --------------------------------------------------------


def test_postselection_probability():
    assert an.postselection_probability(1.0, LinkParams(0.1, 0.1, eta_d=1, eta_m=1)) == 0.5
    assert an.postselection_probability(0.8, LinkParams(0.1, 0.1, eta_d=0.9, eta_m=0.9)) == pytest.approx(0.209952)
    with pytest.raises(ValueError):
        an.postselection_probability(1.2, LinkParams(0.1, 0.1))


@settings(max_examples=100, deadline=None)
@given(f1=unit, f2=unit, e1=unit, e2=unit)
def test_postselection_probability_is_monotone(f1, f2, e1, e2):
    lo_f, hi_f = sorted((f1, f2))
    lo_e, hi_e = sorted((e1, e2))
    p_lo = LinkParams(0.1, 0.1, eta_d=lo_e, eta_m=1.0)
    p_hi = LinkParams(0.1, 0.1, eta_d=hi_e, eta_m=1.0)
    assert an.postselection_probability(lo_f, p_lo) <= an.postselection_probability(hi_f, p_lo)
    assert an.postselection_probability(lo_f, p_lo) <= an.postselection_probability(lo_f, p_hi)


def test_postselected_fidelity_limits():
    p = LinkParams(1e-6, 0.05, eta_d=0.9, eta_m=0.9)
    assert an.postselected_fidelity(MixedLinkState(0.84), p) == pytest.approx(1.0, abs=1e-5)
    ideal = LinkParams(1e-6, 1e-3, eta_d=1.0, eta_m=1.0)
    assert an.postselection_probability_exact(MixedLinkState(1.0), ideal) == pytest.approx(0.5, abs=1e-5)


def test_chain_report_at_operating_point():
    r = an.chain_time_four_links(LinkParams(0.13, 0.16, L0=150))
    assert r.p0 == pytest.approx(0.0095707, rel=1e-4)
    assert r.swap_probabilities == pytest.approx((0.44993, 0.38610), rel=1e-4)
    assert r.p_ps == pytest.approx(0.061132, rel=1e-4)
    assert r.postselected_fidelity == pytest.approx(0.90672, abs=1e-5)
    assert r.total_time == pytest.approx(23.0, rel=0.15)
    assert r.single_chain_time == pytest.approx(r.total_time / 1.5)


def test_chain_ideal_endpoint():
    p = LinkParams(1e-7, 1e-7, L0=150, eta_d=1.0, eta_m=1.0)
    r = an.chain_time(p, 4)
    assert r.swap_probabilities == pytest.approx((0.5, 0.5), abs=1e-5)
    assert r.p_ps == pytest.approx(0.5, abs=1e-5)


def test_chain_time_decreases_with_detector_efficiency():
    times = [an.chain_time(LinkParams(0.13, 0.16, L0=150, eta_d=e), 4).total_time for e in np.linspace(0.5, 1.0, 11)]
    assert np.all(np.diff(times) < 0)


def test_chain_rejects_bad_link_count():
    with pytest.raises(ValueError):
        an.chain_time(LinkParams(0.1, 0.1), 3)


# -- purification, baseline, discriminator --------------------------------------


def test_purification_map():
    assert an.purification_map(1.0) == 1.0
    assert an.purification_map(0.5) == 0.5
    assert an.purification_map(0.7) == pytest.approx(0.49 / 0.58)
    f = 0.69
    once = an.purification_map(f)
    assert once < 0.9 <= an.purification_map(once)
    assert an.purification_map(0.7, printed=True) == pytest.approx(0.49)
    with pytest.raises(ValueError):
        an.purification_map(0.0)


def test_direct_transmission():
    assert an.direct_transmission_time(0, 1e10) == pytest.approx(1e-10)
    assert an.direct_transmission_time(600, 1e10) == pytest.approx(math.exp(600 / 22) / 1e10)
    t22 = an.direct_transmission_time(600, 1.0, 22.0)
    assert an.direct_transmission_time(600, 1.0, 44.0) == pytest.approx(math.sqrt(t22))


def test_parity_leakage_sums_to_one():
    for a, eta in ((0.5, 1.0), (2.0, 0.9), (1.0, 0.3)):
        leak = an.parity_leakage(a, eta)
        assert sum(leak.values()) == pytest.approx(1.0, abs=1e-12)
    assert an.parity_leakage(2.0, 1.0)["even"] == pytest.approx(0.0, abs=1e-15)
