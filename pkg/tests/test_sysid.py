import numpy as np
import pytest

from pitchstab.errors import InsufficientExcitationError, ValidationError
from pitchstab.statespace import StateSpaceModel, TimeSeries, simulate
from pitchstab.sysid import build_regression, identify, load_timeseries_csv, prbs, vaf


def random_stable_model(rng, n=2, radius=0.85):
    a = rng.normal(size=(n, n))
    a *= radius / np.abs(np.linalg.eigvals(a)).max()
    return StateSpaceModel(a=a, b=rng.normal(size=(n, 1)), c=np.eye(n), sample_rate=41.664)


def test_build_regression_two_samples_one_row():
    ts = TimeSeries(sample_rate=10.0, inputs=np.zeros((2, 1)), outputs=np.eye(2))
    reg = build_regression(ts, 2)
    assert reg.psi.shape == (1, 3)
    assert reg.y.shape == (1, 2)


def test_build_regression_layout_matches_true_parameters():
    rng = np.random.default_rng(0)
    model = random_stable_model(rng)
    u = prbs(60, rng)
    ts = simulate(model, rng.normal(size=2), u)
    reg = build_regression(ts, 2)
    theta = np.vstack([model.a.T, model.b.T])
    assert np.allclose(reg.y, reg.psi @ theta, atol=1e-12)


def test_build_regression_too_short():
    ts = TimeSeries(sample_rate=10.0, inputs=np.zeros((3, 1)), outputs=np.zeros((3, 2)))
    with pytest.raises(ValidationError):
        build_regression(ts, 3)


def test_identify_roundtrip_noise_free():
    rng = np.random.default_rng(42)
    model = random_stable_model(rng)
    ts = simulate(model, rng.normal(size=2), prbs(500, rng))
    result = identify(ts, 2)
    assert np.allclose(result.model.a, model.a, atol=1e-8)
    assert np.allclose(result.model.b, model.b, atol=1e-8)
    assert np.allclose(result.model.c, np.eye(2))
    assert result.model.sample_rate == ts.sample_rate
    assert np.all(result.residual_rms < 1e-10)


def test_identify_roundtrip_with_output_noise():
    rng = np.random.default_rng(11)
    model = random_stable_model(rng)
    ts = simulate(model, rng.normal(size=2), prbs(500, rng))
    noisy = TimeSeries(sample_rate=ts.sample_rate, inputs=ts.inputs,
                       outputs=ts.outputs + rng.normal(0.0, 1e-3, ts.outputs.shape))
    result = identify(noisy, 2)
    assert np.allclose(result.model.a, model.a, atol=1e-2)
    assert np.allclose(result.model.b, model.b, atol=1e-2)


def test_identify_all_zero_data_raises():
    ts = TimeSeries(sample_rate=10.0, inputs=np.zeros((100, 1)), outputs=np.zeros((100, 2)))
    with pytest.raises(InsufficientExcitationError):
        identify(ts, 2)


def test_identify_constant_series_raises():
    ts = TimeSeries(sample_rate=10.0, inputs=np.ones((100, 1)),
                    outputs=np.tile([1.5, -0.5], (100, 1)))
    with pytest.raises(InsufficientExcitationError):
        identify(ts, 2)


def test_identify_minimizes_residual():
    rng = np.random.default_rng(5)
    model = random_stable_model(rng)
    ts = simulate(model, rng.normal(size=2), prbs(300, rng))
    noisy = TimeSeries(sample_rate=ts.sample_rate, inputs=ts.inputs,
                       outputs=ts.outputs + rng.normal(0.0, 0.01, ts.outputs.shape))
    reg = build_regression(noisy, 2)
    theta, *_ = np.linalg.lstsq(reg.psi, reg.y, rcond=None)
    base = np.sum((reg.y - reg.psi @ theta) ** 2)
    for _ in range(50):
        perturbed = theta + rng.normal(0.0, 1e-4, theta.shape)
        assert np.sum((reg.y - reg.psi @ perturbed) ** 2) >= base


def test_vaf_perfect_and_zero_predictor():
    y = np.array([[1.0, 2.0], [0.5, -1.0], [2.0, 0.1]])
    assert vaf(y, y) == pytest.approx(100.0)
    assert vaf(y, np.zeros_like(y)) == pytest.approx(0.0)


def test_vaf_hand_arithmetic():
    assert vaf([1.0, 1.0], [0.9, 1.1]) == pytest.approx(99.0)


def test_vaf_is_scale_sensitive_not_mean_removed():
    y = np.array([1.0, -2.0, 0.5])
    assert vaf(y, 2.0 * y) == pytest.approx(0.0)


def test_vaf_zero_measured_rejected():
    with pytest.raises(ValidationError):
        vaf([0.0, 0.0], [0.1, 0.2])


def test_vaf_length_mismatch():
    with pytest.raises(ValidationError):
        vaf([1.0, 2.0], [1.0])


def test_prbs_levels_and_shape():
    rng = np.random.default_rng(0)
    u = prbs(200, rng)
    assert u.shape == (200, 1)
    assert set(np.unique(u)) <= {-1.0, 1.0}
    assert 0.2 < np.mean(u == 1.0) < 0.8


def _write_csv(path, rows):
    path.write_text("t,u,theta,theta_dot\n" + "\n".join(
        ",".join(repr(v) for v in row) for row in rows) + "\n")


def test_csv_loader_round_trip(tmp_path):
    dt = 1.0 / 41.664
    rows = [(k * dt, 0.5 * (-1) ** k, 0.1 * k, -0.2 * k) for k in range(40)]
    path = tmp_path / "log.csv"
    _write_csv(path, rows)
    ts = load_timeseries_csv(path)
    assert ts.sample_rate == pytest.approx(41.664, rel=1e-9)
    assert ts.inputs.shape == (40, 1)
    assert ts.outputs.shape == (40, 2)
    assert ts.outputs[3, 0] == pytest.approx(0.3)


def test_csv_loader_rejects_jitter(tmp_path):
    rows = [(0.0, 0, 0, 0), (0.024, 0, 0, 0), (0.06, 0, 0, 0), (0.084, 0, 0, 0)]
    path = tmp_path / "jitter.csv"
    _write_csv(path, rows)
    with pytest.raises(ValidationError, match="jitter"):
        load_timeseries_csv(path)


def test_csv_loader_rejects_nonmonotone(tmp_path):
    rows = [(0.0, 0, 0, 0), (0.024, 0, 0, 0), (0.020, 0, 0, 0)]
    path = tmp_path / "back.csv"
    _write_csv(path, rows)
    with pytest.raises(ValidationError, match="increasing"):
        load_timeseries_csv(path)


def test_csv_loader_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time,u,theta,omega\n0,0,0,0\n1,0,0,0\n")
    with pytest.raises(ValidationError, match="header"):
        load_timeseries_csv(path)
