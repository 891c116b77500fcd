import math

import pytest

import qkdlink as q


def test_version():
    assert q.__version__ == "0.1.0"


def test_receiver_budget():
    assert q.total_insertion_loss(q.default_receiver_budget()) == pytest.approx(8.02)
    assert q.total_insertion_loss([]) == 0.0
    kinds = [c.kind for c in q.default_receiver_budget()]
    assert kinds.count("fibre_sin_facet") == 2


def test_transmittance_and_background():
    assert q.channel_transmittance(q.ChannelSpec.emulated(10)) == pytest.approx(0.1)
    assert q.channel_transmittance(q.ChannelSpec.fiber(50)) == pytest.approx(10 ** -0.88)
    assert q.background_click_prob(q.LinkModel.unidirectional(q.ChannelSpec.emulated(0))) == pytest.approx(3e-8)


def test_click_probabilities_add_up():
    link = q.LinkModel.unidirectional(q.ChannelSpec.emulated(0))
    p0, p1 = q.click_probabilities(0.0, 0.5, link)
    assert 0 <= p1 < p0 <= 1


def test_analytic_point_and_key_rate():
    p = q.ProtocolParams()
    link = q.LinkModel.bidirectional(q.ChannelSpec.emulated(10))
    t = q.run_analytic(p, link, 1.0)
    assert t.conserved(1e-12)
    s = q.sifted_from_tallies(t)
    assert 0.005 < s.qber_majority < 0.012
    r = q.evaluate_key_rate(t, p)
    assert r.skr_asymptotic_bps == pytest.approx(q.asymptotic_skr(t, p))
    assert r.asymptotic_status == q.KeyStatus.Ok
    assert 0 < r.skr_asymptotic_bps < r.raw_bps


def test_montecarlo_matches_analytic_and_is_seeded():
    p = q.ProtocolParams()
    link = q.LinkModel.unidirectional(q.ChannelSpec.emulated(5))
    a = q.run_montecarlo(p, link, 2_000_000, 7)
    b = q.run_montecarlo(p, link, 2_000_000, 7)
    cell = a.cell(q.Intensity.Signal, q.Basis.X, q.Basis.X)
    assert cell == b.cell(q.Intensity.Signal, q.Basis.X, q.Basis.X)
    an = q.run_analytic(p, link, a.duration_s).cell(q.Intensity.Signal, q.Basis.X, q.Basis.X)
    expect = an["clicks"] / an["sent"]
    sigma = math.sqrt(expect * (1 - expect) / cell["sent"])
    assert abs(cell["clicks"] / cell["sent"] - expect) < 5 * sigma


def test_binary_entropy():
    assert q.binary_entropy(0.5) == 1.0
    assert q.binary_entropy(0.0389) == pytest.approx(0.23722579789754486, rel=1e-12)
    with pytest.raises(ValueError):
        q.binary_entropy(1.5)


def test_calibration_and_finite_key():
    p = q.ProtocolParams()
    base = q.LinkModel.unidirectional(q.ChannelSpec.emulated(0))
    link = q.calibrate_to_measurement(p, base, 1120.0, 0.0389)
    s = q.sifted_from_tallies(q.run_analytic(p, link, 1.0))
    assert s.raw_bit_rate == pytest.approx(1120.0)
    assert s.qber_majority == pytest.approx(0.0389)
    t = q.tallies_for_block(p, link, 1.04e7)
    bits = q.finite_key_length(t, p)
    assert 0 < bits < q.asymptotic_skr(t, p) * t.duration_s


def test_invalid_arguments_raise():
    p = q.ProtocolParams()
    p.nu = 0.9
    with pytest.raises(ValueError):
        p.validate()
    with pytest.raises(ValueError):
        q.ChannelSpec.emulated(-1)
