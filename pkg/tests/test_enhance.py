import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bridgekit.enhance import (
    DEFAULT_LAMBDAS,
    PairedSignal,
    istft,
    make_predictor,
    si_snr_db,
    spectral_terms,
    stft,
    synth_pair,
    total_loss,
)
from bridgekit.io import read_wav, write_wav


class TestSynth:
    def test_zero_db(self):
        p = synth_pair(snr_db=0.0, seed=1)
        assert np.sum(p.s**2) == pytest.approx(np.sum((p.y - p.s) ** 2), rel=1e-9)
        assert np.sqrt(np.mean(p.s**2)) == pytest.approx(1.0)

    @pytest.mark.parametrize("snr, kind", [(-5.0, "white"), (12.5, "pink")])
    def test_achieved_snr(self, snr, kind):
        p = synth_pair(snr_db=snr, noise_kind=kind, seed=2)
        achieved = 10 * math.log10(np.sum(p.s**2) / np.sum((p.y - p.s) ** 2))
        assert p.snr_db == pytest.approx(snr, abs=1e-9)
        assert achieved == pytest.approx(p.snr_db, abs=1e-9)

    def test_deterministic(self):
        a, b = synth_pair(seed=5), synth_pair(seed=5)
        np.testing.assert_array_equal(a.s, b.s)
        np.testing.assert_array_equal(a.y, b.y)

    @pytest.mark.parametrize("kwargs", [{"snr_db": math.inf}, {"duration_s": 0.0}, {"duration_s": 0.01}, {"noise_kind": "brown"}])
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            synth_pair(**kwargs)


class TestSTFT:
    def test_configuration(self):
        X = stft(np.zeros(16000))
        assert X.window.length == 512 and X.window.hop == 256 and X.window.n_fft == 512
        assert X.bins.shape[0] == 257
        assert not np.any(X.bins)

    def test_round_trip(self):
        x = np.random.default_rng(0).standard_normal(16000)
        r = istft(stft(x))
        interior = slice(512, -512)
        assert np.linalg.norm(r[interior] - x[interior]) / np.linalg.norm(x[interior]) <= 1e-10

    def test_tone_at_bin_centre(self):
        # oracle: a cosine at bin m windowed by w has X[m] = (W(0) + W(2m)) / 2,
        # W(0) = cot(pi / 2N) for the sqrt-Hann (sine) window
        m, n = 40, 512
        x = np.cos(2 * np.pi * m * np.arange(16000) / n)
        X = stft(x)
        mags = np.abs(X.bins[:, 4:-4])
        assert np.all(np.argmax(mags, axis=0) == m)
        k = np.arange(n)
        w = np.sin(np.pi * k / n)
        w2m = np.sum(w * np.exp(-2j * np.pi * 2 * m * k / n))
        expected = abs(1 / math.tan(math.pi / (2 * n)) + w2m) / 2
        np.testing.assert_allclose(mags[m], expected, rtol=1e-9)
        # sine-window main lobe spans the neighbouring bins
        assert np.sum(mags[m - 1 : m + 2] ** 2) / np.sum(mags**2) > 0.99

    def test_too_short(self):
        with pytest.raises(ValueError):
            stft(np.zeros(100))


class TestSISNR:
    def test_projection_example(self):
        assert si_snr_db([1.0, 1.0], [1.0, 0.0]) == pytest.approx(0.0, abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), alpha=st.floats(1e-3, 1e3))
    def test_scale_invariance(self, seed, alpha):
        rng = np.random.default_rng(seed)
        x, xh = rng.standard_normal((2, 64))
        assert abs(si_snr_db(alpha * xh, x) - si_snr_db(xh, x)) <= 1e-9

    def test_orthogonal_noise(self):
        rng = np.random.default_rng(1)
        x, n = rng.standard_normal((2, 4096))
        n -= (n @ x) / (x @ x) * x
        n *= math.sqrt((x @ x) / 100 / (n @ n))
        assert si_snr_db(x + n, x) == pytest.approx(20.0, abs=1e-6)

    def test_zero_reference(self):
        with pytest.raises(ValueError):
            si_snr_db([1.0, 2.0], [0.0, 0.0])


class TestLoss:
    def test_identity(self):
        x = synth_pair(seed=0).s
        lb = total_loss(x, x)
        assert lb.mag_term == 0.0 and lb.ri_term == 0.0
        assert lb.sisnr_term == pytest.approx(-10.0)
        assert lb.lambdas == DEFAULT_LAMBDAS
        l1, l2, l3 = lb.lambdas
        assert lb.total == l1 * lb.sisnr_term + l2 * lb.mag_term + l3 * lb.ri_term

    def test_single_bin(self):
        mag, ri = spectral_terms(np.array([[1.0 + 0j]]), np.array([[0.0 + 0j]]))
        assert mag == 1.0
        assert ri == pytest.approx(1.0)

    def test_terms_non_negative(self):
        p = synth_pair(seed=3)
        lb = total_loss(p.y, p.s)
        assert lb.mag_term > 0 and lb.ri_term > 0
        assert lb.sisnr_term == pytest.approx(-math.log10(10 ** (si_snr_db(p.y, p.s) / 10)))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            total_loss(np.zeros(1024), np.ones(1000))


class TestPredictors:
    def setup_method(self):
        self.pair = synth_pair(seed=9)

    def test_oracle(self):
        f = make_predictor("oracle", reference=self.pair)
        np.testing.assert_array_equal(f(self.pair.y, self.pair.y, 0.5), self.pair.s)

    def test_blend_endpoints(self):
        one = make_predictor("blend", {"beta": 1.0}, self.pair)
        zero = make_predictor("blend", {"beta": 0.0}, self.pair)
        np.testing.assert_array_equal(one(None, self.pair.y, 0.3), self.pair.s)
        np.testing.assert_array_equal(zero(None, self.pair.y, 0.3), self.pair.y)

    def test_blend_range(self):
        with pytest.raises(ValueError):
            make_predictor("blend", {"beta": 1.5}, self.pair)

    def test_unknown(self):
        with pytest.raises(ValueError):
            make_predictor("unet", reference=self.pair)

    def test_wiener_noiseless(self):
        clean = PairedSignal(self.pair.s, self.pair.s.copy(), 16000, math.inf)
        f = make_predictor("wiener", reference=clean)
        np.testing.assert_allclose(f(None, clean.y, 0.5), clean.s, atol=1e-10)

    def test_wiener_improves(self):
        f = make_predictor("wiener", reference=self.pair)
        assert si_snr_db(f(None, self.pair.y, 0.5), self.pair.s) > si_snr_db(self.pair.y, self.pair.s) + 5


def test_wav_round_trip(tmp_path):
    x = synth_pair(seed=1).s / 4
    path = tmp_path / "a.wav"
    write_wav(path, x, 16000)
    back, rate = read_wav(path)
    assert rate == 16000
    np.testing.assert_array_equal(back, x.astype(np.float32))
    assert path.read_bytes()[:4] == b"RIFF"
