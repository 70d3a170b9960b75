import math

import numpy as np
import pytest

from nrris import crack as ck
from nrris import multiport as mp
from nrris.errors import RankDeficientChannelError


def _small(**kw):
    base = dict(M=4, K=2, N=16, trials=60, seed=3)
    base.update(kw)
    return ck.CrackScenario(**base)


def test_scenario_validation():
    for bad in (dict(N=7), dict(K=0), dict(trials=0), dict(ris_mode="x"),
                dict(phase_profile="x"), dict(estimation_noise=-1.0), dict(snr_db=math.nan)):
        with pytest.raises(ValueError):
            _small(**bad)
    assert _small(snr_db=20).snr_linear == pytest.approx(100.0)


def test_identity_surface_gives_equal_directions():
    rng = np.random.default_rng(0)
    H, G = rng.standard_normal((6, 3)), rng.standard_normal((6, 2))
    I = np.eye(6)
    np.testing.assert_array_equal(ck.cascaded_channel(I, H, G, "UL"), ck.cascaded_channel(I, H, G, "DL"))


def test_crack_surface_is_asymmetric_and_blocks_match_circuit():
    phi2 = np.array([0.3, -1.2, 2.5])
    p12, p21 = ck.crack_blocks(-phi2, phi2)
    np.testing.assert_allclose(np.angle(p12), -phi2, atol=1e-12)
    np.testing.assert_allclose(np.angle(p21), phi2, atol=1e-12)
    np.testing.assert_allclose(np.abs(p12), 1.0, atol=1e-12)
    for a, b in zip(-phi2, phi2):
        X = mp.reactance_for_phase_difference(a - b, ck.Z0_FREE_SPACE)
        S = mp.terminated_circulator_group(b / 2, X, ck.Z0_FREE_SPACE).S
        i = list(phi2).index(b)
        assert S[0, 1] == pytest.approx(p12[i], abs=1e-12)
        assert S[1, 0] == pytest.approx(p21[i], abs=1e-12)
    S = ck.surface_matrix(p12, p21)
    assert np.max(np.abs(S - S.T)) > 0.1


def test_equal_phases_use_open_termination():
    p12, p21 = ck.crack_blocks([0.7, 0.0], [0.7, 0.0])
    np.testing.assert_allclose(p12, p21, atol=1e-15)


def test_cascade_validation():
    with pytest.raises(ValueError):
        ck.cascaded_channel(np.eye(4), np.ones((3, 2)), np.ones((4, 1)), "DL")
    with pytest.raises(ValueError):
        ck.cascaded_channel(np.eye(4), np.ones((4, 2)), np.ones((4, 1)), "both")


def test_golden_small_system_against_dense_sums():
    sc = ck.CrackScenario(M=2, K=1, N=4, snr_db=10, trials=1, seed=11)
    ch = ck.draw_channels(sc, 0)
    p12, p21 = ck.crack_blocks(ch.phi1, ch.phi2)
    Phi = np.zeros((4, 4), complex)
    Phi[0, 1], Phi[1, 0], Phi[2, 3], Phi[3, 2] = p12[0], p21[0], p12[1], p21[1]
    dl = np.zeros(2, complex)
    ul = np.zeros(2, complex)
    for m in range(2):
        for i in range(4):
            for j in range(4):
                dl[m] += ch.G[i, 0] * Phi[i, j] * ch.H[j, m]
                ul[m] += ch.G[i, 0] * Phi[j, i] * ch.H[j, m]
    w = ul.conj() / np.linalg.norm(ul)
    rate = math.log2(1 + abs(dl @ w) ** 2 * sc.snr_linear)
    got = ck.ergodic_rates(sc, "mrt")
    assert got.rates[0] == pytest.approx(rate, rel=1e-12)
    base = ck.ergodic_rates(ck.with_mode(sc, "reciprocal-baseline"), "mrt").rates[0]
    assert base == pytest.approx(math.log2(1 + np.linalg.norm(dl) ** 2 * sc.snr_linear), rel=1e-12)


def test_precoder_properties():
    rng = np.random.default_rng(1)
    H = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
    W = ck.zf_precoder(H)
    np.testing.assert_allclose(np.linalg.norm(W, axis=0), 1.0)
    HW = H @ W
    np.testing.assert_allclose(HW - np.diag(np.diag(HW)), 0.0, atol=1e-12)
    M = ck.mrt_precoder(H)
    np.testing.assert_allclose(np.linalg.norm(M, axis=0), 1.0)
    np.testing.assert_allclose(np.diag(H @ M), np.linalg.norm(H, axis=1), atol=1e-12)
    with pytest.raises(RankDeficientChannelError):
        ck.zf_precoder(np.ones((2, 3)))
    with pytest.raises(RankDeficientChannelError):
        ck.zf_precoder(np.ones((4, 3)))
    with pytest.raises(RankDeficientChannelError):
        ck.mrt_precoder(np.zeros((1, 3)))


def test_single_user_zf_equals_mrt():
    sc = _small(K=1, trials=20)
    a = ck.ergodic_rates(sc, "mrt").rates
    b = ck.ergodic_rates(sc, "zf").rates
    np.testing.assert_allclose(a, b, rtol=1e-10)


def test_symmetric_profile_shows_no_attack():
    sc = _small(phase_profile="symmetric")
    a = ck.ergodic_rates(sc, "zf")
    b = ck.ergodic_rates(ck.with_mode(sc, "reciprocal-baseline"), "zf")
    np.testing.assert_allclose(a.rates, b.rates, rtol=1e-10)


def test_attack_degrades_rates():
    sc = _small(trials=200)
    for pre in ck.PRECODERS:
        att = ck.ergodic_rates(sc, pre)
        base = ck.ergodic_rates(ck.with_mode(sc, "reciprocal-baseline"), pre)
        s = ck.summarize(base, att)
        assert s["gap"] > 5 * s["gap_stderr"]
        lo, hi = ck.bootstrap_gap(base, att, resamples=500)
        assert 0 < lo <= s["gap"] <= hi


def test_determinism_and_threads():
    sc = _small()
    a = ck.ergodic_rates(sc, "mrt")
    b = ck.ergodic_rates(sc, "mrt", threads=4)
    np.testing.assert_array_equal(a.rates, b.rates)
    c = ck.ergodic_rates(ck.CrackScenario(**{**sc.__dict__, "seed": 4}), "mrt")
    assert not np.array_equal(a.rates, c.rates)


def test_estimation_noise_lowers_baseline():
    sc = _small(ris_mode="reciprocal-baseline", trials=200)
    clean = ck.ergodic_rates(sc, "zf").mean
    noisy = ck.ergodic_rates(ck.CrackScenario(**{**sc.__dict__, "estimation_noise": 1.0}), "zf").mean
    assert noisy < clean


def test_rank_deficient_draws_are_resampled(monkeypatch):
    calls = {"n": 0}
    real = ck.zf_precoder

    def flaky(H):
        calls["n"] += 1
        if calls["n"] % 2 == 1:
            raise RankDeficientChannelError("forced")
        return real(H)

    monkeypatch.setitem(ck._PRECODER_FN, "zf", flaky)
    r = ck.ergodic_rates(_small(trials=5), "zf")
    assert r.resampled == 5 and r.resampled_trials == list(range(5))


def test_bootstrap_rejects_unpaired():
    with pytest.raises(ValueError):
        ck.bootstrap_gap(np.ones(3), np.ones(4))
