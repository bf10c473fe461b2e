import json
import math

import numpy as np
import pytest

import subthz


def test_version():
    assert subthz.__version__ == "0.1.0"


def test_rrc_taps_unit_energy_and_symmetry():
    taps = subthz.rrc_taps(0.22, 16, 4)
    assert np.isclose(np.sum(taps**2), 1.0)
    assert np.allclose(taps, taps[::-1])
    assert subthz.rrc_impulse(0.0, 0.22) == pytest.approx(1 - 0.22 + 4 * 0.22 / math.pi)


def test_dft_is_unitary():
    rng = np.random.default_rng(1)
    x = rng.normal(size=64) + 1j * rng.normal(size=64)
    X = subthz.dft(x)
    assert np.allclose(X, np.fft.fft(x) / 8.0)
    assert np.allclose(subthz.idft(X), x)


def test_mapping_roundtrip():
    rng = np.random.default_rng(2)
    bits = rng.integers(0, 2, size=6 * 50).astype(np.uint8)
    sym = subthz.map_bits(bits, "64qam")
    llr = subthz.demap_llr(sym, "64qam", 0.01)
    assert np.array_equal((llr < 0).astype(np.uint8), bits)
    points, labels = subthz.constellation("16apsk")
    assert len(points) == 16 and sorted(labels) == list(range(16))


def test_waveform_papr_ordering_on_a_few_blocks():
    fmt = subthz.BlockFormat()
    fmt.oversampling = 4
    rng = np.random.default_rng(3)

    def qpsk(n):
        return subthz.map_bits(rng.integers(0, 2, size=2 * n).astype(np.uint8), "qpsk")

    ofdm = [subthz.papr_db(subthz.ofdm_modulate(qpsk(fmt.n_alloc), fmt)) for _ in range(20)]
    dfts = [subthz.papr_db(subthz.dfts_ofdm_modulate(qpsk(fmt.n_alloc), fmt)) for _ in range(20)]
    assert np.median(ofdm) > np.median(dfts)


def test_pa_backoff_and_noise():
    rng = np.random.default_rng(4)
    x = rng.normal(size=4096) + 1j * rng.normal(size=4096)
    pa = subthz.PaModel()
    scaled, scale, achieved = subthz.set_opbo(x, pa, 6.0)
    assert abs(achieved - 6.0) < 0.01
    assert scale > 0
    y = subthz.pa_apply(scaled, pa)
    assert np.all(np.abs(y) <= pa.a_sat + 1e-12)
    noisy = subthz.awgn(x, 10.0, 7)
    assert np.array_equal(noisy, subthz.awgn(x, 10.0, 7))
    phi = subthz.pn_generate(1e9, 1024, 3)
    assert phi.shape == (1024,)


def test_viterbi_decodes_clean_codeword():
    rng = np.random.default_rng(5)
    bits = rng.integers(0, 2, size=60).astype(np.uint8)
    for rate in ("1/2", "3/4"):
        code = subthz.conv_encode(bits, rate)
        llr = 1.0 - 2.0 * code.astype(float)
        assert np.array_equal(subthz.viterbi_decode(llr, rate), bits)
    with pytest.raises(ValueError):
        subthz.conv_encode(bits, "0.8")


def test_zxm_rate_and_roundtrip():
    assert subthz.zxm_rate(3, 3) > 1.0
    assert subthz.rl_count(10, 2) == 34
    assert subthz.rl_count(120, 1) == 2**119
    k = subthz.rl_payload_bits(10, 2)
    bits = np.array([1, 0, 1, 1, 0][:k], dtype=np.uint8)
    symbols, signal = subthz.zxm_construct(bits, 10, 2, 2)
    assert set(np.unique(symbols)) <= {-1, 1}
    signs = np.where(signal > 0, 1.0, -1.0)
    assert np.array_equal(subthz.zxm_detect(signs, 10, 2, 2), bits)


def test_planner():
    row = subthz.numerology(480)
    assert row["t_block_us"] == pytest.approx(2.23, abs=0.005)
    lo, hi = subthz.alpha_interval(3840, 2, 1, 100.0)
    assert lo == 0.0 and 0.0 < hi < 1.0
    assert subthz.user_plane_latency(480, 14, 1.0, 0) > 100.0
    assert subthz.pn_floor_snr(subthz.pn_floor_scale(-145, 10e9, 150e9), 10e9) == pytest.approx(21, abs=0.5)


def test_link_and_config_errors():
    text = (
        "experiment = bler_sweep\nlink.block.n_fft = 256\nlink.block.n_cp = 32\nlink.pulse.span = 8\n"
        "link.block.n_alloc = 152\nlink.snr_db = 30\nlink.blocks_min = 10\nlink.block_errors_min = 10\n"
    )
    recs = subthz.run_link(text)
    assert len(recs) == 1 and recs[0]["errors"] == 0 and recs[0]["blocks"] == 10
    assert subthz.config_digest(text) == subthz.config_digest(subthz.normalize_config(text))
    with pytest.raises(subthz.ConfigError) as err:
        subthz.normalize_config("experiment = bler_sweep\nlink.no_such_key = 1\n")
    assert "no_such_key" in str(err.value)


def test_run_experiment_writes_manifest(tmp_path):
    manifest = json.loads(subthz.run_experiment("experiment = numerology\n", str(tmp_path)))
    assert manifest["experiment"] == "numerology"
    lines = (tmp_path / "numerology.csv").read_text().splitlines()
    assert lines[0] == "scs_khz,ts_ns,t_block_us,t_slot2_us,t_slot14_us,bw_ghz"
    assert lines[-1].startswith("# manifest=manifest.json")
