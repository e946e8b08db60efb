import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stablewave.config import ConfigError, ExperimentConfig, parse_config, serialize_config
from stablewave.field import evaluate_U
from stablewave.io import NoiseFileError, NoiseIntegrityError, load_noise, noise_to_text, save_noise
from stablewave.stable_measure import Rectangle, StableParams, lepage_constant, measure_of_set, sample_series
from stablewave.wave_kernel import WaveKernelParams, kernel_G, sigma_const


@pytest.mark.parametrize("alpha,density", [(1.5, "cauchy"), (0.75, "gaussian")])
def test_noise_round_trip(tmp_path, alpha, density):
    s = sample_series(StableParams(alpha, density), 77, 2000)
    path = save_noise(s, tmp_path / "n.txt")
    back = load_noise(path)
    assert back == s
    region = Rectangle(-1, 1, -1, 1)
    assert measure_of_set(back, region) == measure_of_set(s, region)


def test_noise_round_trip_printed_normalization(tmp_path):
    s = sample_series(StableParams(1.5, normalization="printed"), 1, 10)
    assert load_noise(save_noise(s, tmp_path / "n.txt")).params.normalization == "printed"


def test_noise_header_layout():
    lines = noise_to_text(sample_series(StableParams(1.5), 5, 2)).splitlines()
    assert lines[:4] == ["alpha=1.5", "seed=5", "K=2", "density=cauchy"]
    assert lines[5] == "k,gamma,xi1,xi2,g"
    assert lines[6].startswith("1,")


def test_truncated_file_is_integrity_error(tmp_path):
    text = noise_to_text(sample_series(StableParams(1.5), 5, 10))
    path = tmp_path / "cut.txt"
    path.write_text("\n".join(text.splitlines()[:-3]) + "\n")
    with pytest.raises(NoiseIntegrityError, match="K=10"):
        load_noise(path)


def test_malformed_row_reports_line(tmp_path):
    lines = noise_to_text(sample_series(StableParams(1.5), 5, 4)).splitlines()
    lines[7] = "2,abc,0,0,1"
    path = tmp_path / "bad.txt"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(NoiseFileError, match=":8:"):
        load_noise(path)


def test_alpha_header_mismatch(tmp_path):
    text = noise_to_text(sample_series(StableParams(1.5), 5, 4)).replace("alpha=1.5", "alpha=1.0")
    path = tmp_path / "a.txt"
    path.write_text(text)
    with pytest.raises(NoiseIntegrityError):
        load_noise(path)


def test_row_order_and_gamma_order(tmp_path):
    lines = noise_to_text(sample_series(StableParams(1.5), 5, 4)).splitlines()
    swapped = lines[:6] + [lines[7], lines[6]] + lines[8:]
    path = tmp_path / "s.txt"
    path.write_text("\n".join(swapped) + "\n")
    with pytest.raises(NoiseIntegrityError):
        load_noise(path)
    bad = lines[:6] + ["1,2.0,0,0,1", "2,1.0,0,0,1", "3,3.0,0,0,1", "4,4.0,0,0,1"]
    path.write_text("\n".join(bad) + "\n")
    with pytest.raises(NoiseIntegrityError):
        load_noise(path)


def test_hand_written_two_atom_file(tmp_path):
    path = tmp_path / "hand.txt"
    path.write_text(
        "alpha=1.5\nseed=0\nK=2\ndensity=cauchy\nk,gamma,xi1,xi2,g\n"
        "1,0.5,0.1,0.0,1.0\n"
        "2,1.5,-0.2,0.3,-0.5\n"
    )
    s = load_noise(path)
    params = WaveKernelParams(1.0, 1e-8)
    x, t = np.array([0.05, 0.1]), 1.0
    c = 1.0 / lepage_constant(1.5)
    expect = 0.0
    for gamma, xi, g in ((0.5, (0.1, 0.0), 1.0), (1.5, (-0.2, 0.3), -0.5)):
        phi = (1 + xi[0] ** 2 + xi[1] ** 2) ** -1.5 / (2 * math.pi)
        expect += c * gamma ** (-1 / 1.5) * phi ** (-1 / 1.5) * g * kernel_G(x, xi, t, sigma_const(1.0), params)
    assert evaluate_U(s, x, t, sigma_const(1.0), params) == pytest.approx(expect, rel=1e-13)


# -- config --------------------------------------------------------------------


def test_defaults():
    cfg = ExperimentConfig()
    assert (cfg.alpha, cfg.a, cfg.K, cfg.quad_tol, cfg.sigma) == (1.5, 1.0, 10**4, 1e-6, "const:1")


def test_parse_with_comments():
    cfg = parse_config("# experiment\nalpha = 0.75  # heavy tails\nK=100\nsigma = holder:0.5\n\n")
    assert cfg.alpha == 0.75 and cfg.K == 100 and cfg.sigma == "holder:0.5"
    assert parse_config("K = 1e4").K == 10**4


@pytest.mark.parametrize(
    "text,field",
    [
        ("alpha = 1", "alpha"),
        ("alpha = 2.5", "alpha"),
        ("K = -3", "K"),
        ("K = 2.5", "K"),
        ("quad_tol = 0", "quad_tol"),
        ("sigma = wiggly:1", "sigma"),
        ("grid_x1 = 0:1", "grid_x1"),
        ("n_levels = 2", "n_levels"),
        ("bogus = 1", "bogus"),
        ("a = fast", "a"),
    ],
)
def test_invalid_config_names_field(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == field
    assert field in str(info.value)


@given(
    st.floats(0.01, 1.99).filter(lambda a: a != 1.0),
    st.floats(1e-3, 1e3),
    st.integers(0, 2**63 - 1),
    st.integers(0, 10**6),
    st.floats(1e-14, 1.0),
    st.sampled_from(["const:1", "const:-2.5", "holder:0.3", "zero"]),
    st.text("abcdefgh/_-.", min_size=1, max_size=12),
)
def test_config_round_trip(alpha, a, seed, K, tol, sigma, out):
    cfg = ExperimentConfig(alpha=alpha, a=a, seed=seed, K=K, quad_tol=tol, sigma=sigma, out=out)
    assert parse_config(serialize_config(cfg)) == cfg


def test_grid_views():
    cfg = parse_config("grid_x1 = 0:1:3\ngrid_x2 = 5:5:1\ntimes = 0.5, 1")
    assert cfg.grid_points().tolist() == [[0.0, 5.0], [0.5, 5.0], [1.0, 5.0]]
    assert cfg.time_list() == [0.5, 1.0]
