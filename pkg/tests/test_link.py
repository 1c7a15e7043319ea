"""Line model: ASE and NLI accumulation, filter penalties, power budget,
ground-truth GSNR and measurement simulation, checked against independent
stepwise oracles."""

import math

import numpy as np
import pytest
from scipy.integrate import simpson

from chanprobe.catalog import (
    ber_from_q,
    default_catalog,
    gosnr_from_gsnr,
    gosnr_from_q,
    gsnr_from_gosnr,
    q_from_ber,
)
from chanprobe.errors import PowerBudgetError
from chanprobe.link import (
    Amplifier,
    ConstantPower,
    ConstantPsd,
    Dcf,
    Dcg,
    FilterElement,
    LinkSpec,
    NoiseModel,
    ProbeStimulus,
    Span,
    ase_noise_power,
    filter_penalty,
    fixture,
    fixtures,
    ground_truth_gsnr,
    launch_power,
    legacy_psd,
    link_from_dict,
    link_to_dict,
    load_link,
    nli_noise_power,
    save_link,
    simulate_measurement,
)
from tests.conftest import make_curves

PLANCK = 6.62607015e-34


def _config(rs=34.7):
    return next(c for c in default_catalog() if c.symbol_rate_gbaud == rs)


def _plain_link(n_spans=2, length=80.0, gamma=1.3, filters=0, name="t"):
    elements = []
    for _ in range(n_spans):
        span = Span(length_km=length, gamma_1_w_km=gamma)
        elements.append(span)
        elements.append(Amplifier(gain_db=span.loss_db))
    for _ in range(filters):
        elements.append(FilterElement(bandwidth_3db_ghz=80.0))
    return LinkSpec(name=name, elements=tuple(elements), loopback=False)


# ---------------------------------------------------------------------------
# stimuli


def test_constant_power_passthrough():
    for cfg in default_catalog():
        assert launch_power(ProbeStimulus(cfg, ConstantPower(0.0))) == 0.0


def test_constant_psd_scales_with_bandwidth():
    wide = _config(69.4)
    narrow = _config(34.7)
    psd = ConstantPsd(1.0 / wide.occupied_bandwidth_ghz)  # 0 dBm on the wide one
    p_wide = launch_power(ProbeStimulus(wide, psd))
    p_narrow = launch_power(ProbeStimulus(narrow, psd))
    assert p_wide == pytest.approx(0.0, abs=1e-12)
    assert p_narrow - p_wide == pytest.approx(10.0 * math.log10(34.7 / 69.4), abs=1e-9)


def test_constant_psd_direct_evaluation():
    cfg = default_catalog()[0]
    psd = ConstantPsd(0.01)
    bw = cfg.occupied_bandwidth_ghz
    assert launch_power(ProbeStimulus(cfg, psd)) == pytest.approx(
        10.0 * math.log10(0.01 * bw), abs=1e-12
    )


def test_legacy_psd():
    assert legacy_psd(0.0, 50.0) == pytest.approx(0.02, rel=1e-12)
    assert legacy_psd(10.0 * math.log10(2.0), 50.0) == pytest.approx(0.04, rel=1e-12)
    assert legacy_psd(0.0, 25.0) == pytest.approx(0.04, rel=1e-12)


# ---------------------------------------------------------------------------
# ASE


def test_ase_single_amplifier_example():
    span = Span(length_km=100.0)  # 20 dB loss
    link = LinkSpec(
        name="one",
        elements=(span, Amplifier(noise_figure_db=5.0, gain_db=20.0)),
        loopback=False,
    )
    got_mw = ase_noise_power(link)
    want_w = PLANCK * 193.4e12 * 10 ** (5.0 / 10.0) * 10 ** (20.0 / 10.0) * 12.5e9
    assert got_mw == pytest.approx(want_w * 1e3, rel=1e-9)
    assert 10.0 * math.log10(got_mw) == pytest.approx(-32.95, abs=0.01)


def test_ase_two_amps_additive():
    span = Span(length_km=100.0)
    single = LinkSpec(
        name="one",
        elements=(span, Amplifier(gain_db=20.0)),
        loopback=False,
    )
    double = LinkSpec(
        name="two",
        elements=(span, Amplifier(gain_db=20.0), span, Amplifier(gain_db=20.0)),
        loopback=False,
    )
    # the second stage re-amplifies the first stage's ASE back to transparency
    assert ase_noise_power(double) == pytest.approx(
        2.0 * ase_noise_power(single), rel=1e-9
    )


def test_ase_stepwise_oracle_on_fixture():
    link = fixture("LH_SAL")
    # independent walk: each amplifier contributes h*nu*F*G*B scaled by the
    # net transfer of everything downstream of it
    elements = link.effective_elements()
    total_w = 0.0
    for i, el in enumerate(elements):
        if not isinstance(el, Amplifier):
            continue
        contrib = (
            PLANCK
            * link.center_frequency_thz
            * 1e12
            * 10 ** (el.noise_figure_db / 10.0)
            * 10 ** (el.gain_db / 10.0)
            * 12.5e9
        )
        trans = 1.0
        for later in elements[i + 1 :]:
            if isinstance(later, Span):
                trans *= 10 ** (-later.loss_db / 10.0)
            elif isinstance(later, Amplifier):
                trans *= 10 ** (later.gain_db / 10.0)
            elif isinstance(later, FilterElement):
                trans *= 1.0  # flat at center
        total_w += contrib * trans
    assert ase_noise_power(link) == pytest.approx(total_w * 1e3, rel=1e-9)


def test_ase_scales_with_bandwidth():
    link = _plain_link()
    ref = ase_noise_power(link)
    wide = ase_noise_power(link, in_ref_bandwidth=False, signal_bandwidth_ghz=25.0)
    assert wide == pytest.approx(2.0 * ref, rel=1e-9)


def test_amplifier_nf_floor():
    with pytest.raises(Exception):
        Amplifier(noise_figure_db=2.0, gain_db=10.0)


def test_link_requires_trailing_amplifier():
    span = Span(length_km=80.0)
    with pytest.raises(Exception):
        LinkSpec(name="bad", elements=(span,), loopback=False)


# ---------------------------------------------------------------------------
# NLI


def test_nli_zero_for_linear_fiber():
    link = _plain_link(gamma=0.0)
    stim = ProbeStimulus(_config(), ConstantPsd(0.01))
    assert nli_noise_power(link, stim) == 0.0


def test_nli_cubic_in_psd():
    link = _plain_link()
    cfg = _config()
    base = nli_noise_power(link, ProbeStimulus(cfg, ConstantPsd(0.01)))
    up = nli_noise_power(
        link, ProbeStimulus(cfg, ConstantPsd(0.01 * 10 ** (1.0 / 10.0)))
    )
    assert 10.0 * math.log10(up / base) == pytest.approx(3.0, abs=1e-9)


def test_nli_doubles_with_span_count():
    cfg = _config()
    stim = ProbeStimulus(cfg, ConstantPsd(0.01))
    single = nli_noise_power(_plain_link(n_spans=4), stim)
    double = nli_noise_power(_plain_link(n_spans=8), stim)
    assert double == pytest.approx(2.0 * single, rel=1e-9)


def test_nli_cubic_law_random_links():
    rng = np.random.default_rng(3)
    cfgs = default_catalog()
    for _ in range(200):
        n = int(rng.integers(1, 6))
        length = float(rng.uniform(40.0, 120.0))
        gamma = float(rng.uniform(0.8, 2.0))
        link = _plain_link(n_spans=n, length=length, gamma=gamma)
        cfg = cfgs[int(rng.integers(0, len(cfgs)))]
        psd = float(rng.uniform(0.001, 0.02))
        step = float(rng.uniform(0.5, 3.0))
        lo = nli_noise_power(link, ProbeStimulus(cfg, ConstantPsd(psd)))
        hi = nli_noise_power(
            link, ProbeStimulus(cfg, ConstantPsd(psd * 10 ** (step / 10.0)))
        )
        assert 10.0 * math.log10(hi / lo) == pytest.approx(3.0 * step, abs=1e-9)


def test_nli_independent_oracle_uncompensated():
    """Incoherent single-channel GN accumulation, evaluated from scratch."""
    link = _plain_link(n_spans=3, length=90.0, gamma=1.5)
    cfg = _config(46.3)
    psd_mw_ghz = 0.008
    stim = ProbeStimulus(cfg, ConstantPsd(psd_mw_ghz))
    bw = cfg.occupied_bandwidth_ghz * 1e9
    g = psd_mw_ghz * cfg.occupied_bandwidth_ghz * 1e-3 / bw  # W/Hz
    alpha = 0.2 * math.log(10.0) / 10.0  # 1/km
    l_eff = (1.0 - math.exp(-alpha * 90.0)) / alpha
    l_asym = 1.0 / alpha
    c = 299792458.0
    lam = 1550e-9
    beta2 = 16.7 * 1e-6 * lam**2 / (2.0 * math.pi * c) * 1e3  # s^2/km
    arg = (math.pi**2 / 2.0) * beta2 * l_asym * bw**2
    g_nli = (
        (8.0 / 27.0)
        * 1.5**2
        * g**3
        * l_eff**2
        * math.asinh(arg)
        / (math.pi * beta2 * l_asym)
    )
    want_mw = 3.0 * g_nli * bw * 1e3  # transparent spans: net-unity transfer
    assert nli_noise_power(link, stim) == pytest.approx(want_mw, rel=1e-9)


def test_nli_dcf_reduces_accumulation_vs_uncompensated():
    cfg = _config()
    stim = ProbeStimulus(cfg, ConstantPsd(0.01))

    def build(dcm):
        span = Span(length_km=80.0, dcm=dcm)
        return LinkSpec(
            name="t",
            elements=(span, Amplifier(gain_db=span.loss_db)),
            loopback=False,
        )

    plain = nli_noise_power(build(None), stim)
    dcf = nli_noise_power(build(Dcf()), stim)
    # residual dispersion shrinks the asinh argument, raising per-span NLI,
    # and the dispersion-managed enhancement multiplies it again
    assert dcf > plain


def test_nli_dcg_uses_small_argument_limit():
    cfg = _config()
    stim = ProbeStimulus(cfg, ConstantPsd(0.01))
    span = Span(length_km=80.0, dcm=Dcg())
    link = LinkSpec(
        name="t",
        elements=(span, Amplifier(gain_db=span.loss_db)),
        loopback=False,
    )
    bw = cfg.occupied_bandwidth_ghz * 1e9
    g = 0.01 * cfg.occupied_bandwidth_ghz * 1e-3 / bw
    alpha = 0.2 * math.log(10.0) / 10.0
    l_eff = (1.0 - math.exp(-alpha * 80.0)) / alpha
    want = (
        (8.0 / 27.0)
        * 1.3**2
        * g**3
        * l_eff**2
        * (math.pi / 2.0)
        * bw**2
        * 1.8  # dispersion-managed enhancement
        * bw
        * 1e3
    )
    assert nli_noise_power(link, stim) == pytest.approx(want, rel=1e-9)


# ---------------------------------------------------------------------------
# filter penalty


def test_filter_penalty_empty_cascade():
    link = _plain_link(filters=0)
    assert filter_penalty(link, _config()) == 0.0


def test_filter_penalty_single_wide_filter_negligible():
    link = _plain_link(filters=1)  # one 80 GHz order-3 filter
    assert 0.0 <= filter_penalty(link, _config(31.5)) < 0.1


def test_filter_penalty_matches_independent_integration():
    link = _plain_link(filters=3)
    cfg = _config(55.6)
    rs = cfg.symbol_rate_gbaud
    beta = cfg.occupied_bandwidth_ghz / rs - 1.0
    half = cfg.occupied_bandwidth_ghz / 2.0
    f = np.linspace(-half, half, 20001)
    fa = np.abs(f)
    f1 = (1.0 - beta) * rs / 2.0
    f2 = (1.0 + beta) * rs / 2.0
    s = np.where(
        fa <= f1,
        1.0,
        np.where(
            fa <= f2,
            0.5 * (1.0 + np.cos(np.pi / (beta * rs) * (fa - f1))),
            0.0,
        ),
    )
    h2 = np.exp(-math.log(2.0) * np.abs(2.0 * f / 80.0) ** 6) ** 3
    want = 10.0 * math.log10(simpson(s / h2, x=f) / simpson(s, x=f))
    assert filter_penalty(link, cfg) == pytest.approx(want, abs=1e-3)


def test_filter_penalty_monotone_in_cascade_length():
    cfg = _config(69.4)
    pens = [filter_penalty(_plain_link(filters=n), cfg) for n in range(6)]
    assert all(b > a for a, b in zip(pens, pens[1:]))


def test_filter_penalty_spread_on_narrow_cascade():
    """Twelve 60 GHz filters: the widest probe pays much more than 46.3 GBd."""
    elements = [Span(length_km=80.0), Amplifier(gain_db=16.0)]
    elements += [FilterElement(bandwidth_3db_ghz=60.0) for _ in range(12)]
    link = LinkSpec(name="t", elements=tuple(elements), loopback=False)
    p69 = filter_penalty(link, _config(69.4))
    p46 = filter_penalty(link, _config(46.3))
    assert p69 - p46 > 2.0


def test_dcg_counts_as_filtering():
    span_plain = Span(length_km=80.0)
    span_dcg = Span(length_km=80.0, dcm=Dcg())
    plain = LinkSpec(
        name="a",
        elements=(span_plain, Amplifier(gain_db=span_plain.loss_db)),
        loopback=False,
    )
    dcg = LinkSpec(
        name="b",
        elements=(span_dcg, Amplifier(gain_db=span_dcg.loss_db)),
        loopback=False,
    )
    cfg = _config(55.6)
    assert filter_penalty(plain, cfg) == 0.0
    assert filter_penalty(dcg, cfg) > 0.0


# ---------------------------------------------------------------------------
# ground truth


def test_equal_psd_symmetry_linear_link():
    link = _plain_link(gamma=0.0)
    values = [
        ground_truth_gsnr(link, ProbeStimulus(cfg, ConstantPsd(0.01)))
        for cfg in default_catalog()
    ]
    assert max(values) - min(values) < 1e-9


def test_gsnr_drops_3db_when_link_doubles():
    cfg = _config()
    stim = ProbeStimulus(cfg, ConstantPsd(0.01))
    single = ground_truth_gsnr(_plain_link(n_spans=3, gamma=0.0), stim)
    double = ground_truth_gsnr(_plain_link(n_spans=6, gamma=0.0), stim)
    assert single - double == pytest.approx(10.0 * math.log10(2.0), abs=1e-9)


def test_ground_truth_frozen_regression():
    """R_VIL at 0.0015 mW/GHz with the 34.7 GBd 200G probe; value computed
    once by an independent stepwise evaluation of the ASE/NLI formulas."""
    link = fixture("R_VIL")
    cfg = next(c for c in default_catalog() if c.id == "200G-16QAM-34.7")
    got = ground_truth_gsnr(link, ProbeStimulus(cfg, ConstantPsd(0.0015)))
    assert got == pytest.approx(12.071820193329879, abs=1e-6)


def test_power_budget_enforced():
    span = Span(length_km=80.0)
    link = LinkSpec(
        name="hot",
        elements=(span, Amplifier(gain_db=span.loss_db, max_total_output_power_dbm=5.0)),
        loopback=False,
    )
    cfg = _config()
    ground_truth_gsnr(link, ProbeStimulus(cfg, ConstantPower(4.0)))  # fits
    with pytest.raises(PowerBudgetError):
        ground_truth_gsnr(link, ProbeStimulus(cfg, ConstantPower(10.0)))


# ---------------------------------------------------------------------------
# measurement simulation


def _curve_for(cfg):
    return make_curves(default_catalog())[cfg.id]


def test_simulate_measurement_noiseless_round_trip():
    link = fixture("R_RAP")
    cfg = _config()
    curve = _curve_for(cfg)
    stim = ProbeStimulus(cfg, ConstantPsd(0.0015))
    ber = simulate_measurement(link, stim, curve, NoiseModel())
    q = q_from_ber(ber)
    gsnr = gsnr_from_gosnr(gosnr_from_q(curve, q), cfg.symbol_rate_gbaud)
    assert gsnr == pytest.approx(ground_truth_gsnr(link, stim), abs=1e-6)


def test_simulate_measurement_deterministic():
    link = fixture("R_RAP")
    cfg = _config()
    curve = _curve_for(cfg)
    stim = ProbeStimulus(cfg, ConstantPsd(0.0015))
    noise = NoiseModel(ber_readout_sigma_db=0.3, seed=42)
    a = simulate_measurement(link, stim, curve, noise, call_index=5)
    b = simulate_measurement(link, stim, curve, noise, call_index=5)
    c = simulate_measurement(link, stim, curve, noise, call_index=6)
    assert a == b
    assert a != c


def test_simulate_measurement_noise_statistics():
    link = fixture("R_RAP")
    cfg = _config()
    curve = _curve_for(cfg)
    stim = ProbeStimulus(cfg, ConstantPsd(0.0015))
    noise = NoiseModel(ber_readout_sigma_db=0.3, seed=1)
    truth = ground_truth_gsnr(link, stim)
    estimates = []
    for i in range(1000):
        ber = simulate_measurement(link, stim, curve, noise, call_index=i)
        q = q_from_ber(ber)
        estimates.append(
            gsnr_from_gosnr(gosnr_from_q(curve, q, clamp=True), cfg.symbol_rate_gbaud)
        )
    spread = float(np.std(estimates))
    # the quadratic curve slightly rescales the injected Q noise
    assert 0.2 < spread < 0.45
    assert float(np.mean(estimates)) == pytest.approx(truth, abs=0.05)


# ---------------------------------------------------------------------------
# fixtures and persistence


def test_fixture_inventory():
    names = {lk.name for lk in fixtures()}
    assert names == {
        "LH_SAL",
        "LH_KRUIO",
        "LH_WAR",
        "LH_POZ",
        "LH_FRA",
        "R_SOL",
        "R_TM",
        "R_RAP",
        "R_PAI",
        "R_VIL",
        "R_TSIR",
        "R_PYS",
        "R_ILM",
    }


@pytest.mark.parametrize(
    "name,length_km,spans",
    [
        ("LH_SAL", 1016.0, 14),
        ("LH_KRUIO", 1792.0, 24),
        ("LH_WAR", 2943.0, 36),
        ("LH_POZ", 3751.0, 48),
        ("LH_FRA", 5738.0, 74),
        ("R_SOL", 3.0, 2),
        ("R_TM", 70.0, 4),
        ("R_RAP", 144.0, 4),
        ("R_PAI", 241.0, 6),
        ("R_VIL", 382.0, 8),
        ("R_TSIR", 675.0, 12),
        ("R_PYS", 485.0, 8),
        ("R_ILM", 822.0, 12),
    ],
)
def test_fixture_lengths_and_span_counts(name, length_km, spans):
    link = fixture(name)
    effective = link.effective_elements()
    n_spans = sum(1 for e in effective if isinstance(e, Span))
    total = sum(e.length_km for e in effective if isinstance(e, Span))
    assert n_spans == spans
    assert total == pytest.approx(length_km, rel=0.02)


def test_regional_fixtures_are_loopbacks_with_dcm():
    for name in ("R_TM", "R_RAP", "R_PAI", "R_VIL", "R_TSIR"):
        link = fixture(name)
        assert link.loopback
        assert all(
            isinstance(e.dcm, Dcf)
            for e in link.elements
            if isinstance(e, Span)
        )
    for name in ("R_PYS", "R_ILM"):
        kinds = {
            type(e.dcm)
            for e in fixture(name).elements
            if isinstance(e, Span)
        }
        assert kinds == {Dcf, Dcg}


def test_long_haul_fixtures_uncompensated():
    for name in ("LH_SAL", "LH_KRUIO", "LH_WAR", "LH_POZ", "LH_FRA"):
        link = fixture(name)
        assert link.loopback
        assert all(e.dcm is None for e in link.elements if isinstance(e, Span))


def test_loopback_doubles_elements():
    link = fixture("R_VIL")
    assert len(link.effective_elements()) == 2 * len(link.elements)


def test_unknown_fixture():
    with pytest.raises(Exception):
        fixture("NOPE")


def test_link_json_round_trip(tmp_path):
    for link in fixtures():
        path = tmp_path / f"{link.name}.json"
        save_link(link, path)
        assert load_link(path) == link


def test_link_dict_round_trip():
    for link in fixtures():
        assert link_from_dict(link_to_dict(link)) == link


def test_link_from_dict_reports_bad_element_path():
    doc = link_to_dict(fixture("R_SOL"))
    doc["elements"][1]["type"] = "mystery"
    with pytest.raises(ValueError, match="/elements/1"):
        link_from_dict(doc)
