import pytest
import numpy as np

from taxelsim.calibration import (
    CalibrationMap,
    CalibrationSample,
    JointCalibration,
    build_calibration_map,
    fit_affine,
    fit_linear,
    load_calibration,
    normalize_current,
    normalize_torque,
    normalize_torques,
    read_samples_csv,
    samples_from_frame,
    save_calibration,
    synthetic_frame,
)
from taxelsim.errors import ConfigError, DegenerateFitError


def samples(pairs, joint_id=0, domain="sim"):
    return [CalibrationSample(s, f, joint_id, domain) for s, f in pairs]


def test_exact_line():
    fit = fit_linear(samples([(0.0, 0.0), (1.0, 2.0), (2.0, 4.0)]))
    assert fit.slope == 2.0
    assert fit.rms_residual == 0.0

def test_least_squares_slope():
    fit = fit_linear(samples([(1.0, 2.0), (2.0, 4.1)]))
    assert fit.slope == pytest.approx(10.2 / 5.0)
    assert fit.rms_residual > 0.0

def test_repeated_signal_is_degenerate():
    with pytest.raises(DegenerateFitError):
        fit_linear(samples([(1.0, 2.0), (1.0, 2.5), (1.0, 1.9)]))
    with pytest.raises(DegenerateFitError):
        fit_linear(samples([(1.0, 2.0)]))

def test_affine_fit_recovers_intercept():
    fit = fit_affine(samples([(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]))
    assert fit.slope == pytest.approx(2.0)
    assert fit.intercept == pytest.approx(1.0)

def test_synthetic_slopes_are_recovered(rng):
    frame = synthetic_frame(3.5, 0.7, joint_ids=range(12), n_per_joint=40, rng=rng)
    cal = build_calibration_map(samples_from_frame(frame))
    assert sorted(cal.joints) == list(range(12))
    for entry in cal.joints.values():
        assert entry.alpha == pytest.approx(3.5, abs=1e-12)
        assert entry.beta == pytest.approx(0.7, abs=1e-12)

def test_noisy_slope_within_three_standard_errors(rng):
    sigma, n = 0.05, 500
    frame = synthetic_frame(3.5, 0.7, joint_ids=[0], n_per_joint=n, rng=rng, noise=sigma, drive_range=(2.0, 3.0))
    entry = build_calibration_map(samples_from_frame(frame)).for_joint(0)
    assert abs(entry.alpha - 3.5) < 3 * sigma / np.sqrt(n)
    assert abs(entry.beta - 0.7) < 3 * sigma / np.sqrt(n)
    assert entry.rms_sim == pytest.approx(sigma, rel=0.2)

@pytest.mark.slow
def test_noisy_slopes_stay_within_three_standard_errors_across_seeds():
    sigma, n = 0.05, 500
    bound = 3 * sigma / np.sqrt(n)
    for seed in range(100):
        frame = synthetic_frame(
            3.5, 0.7, joint_ids=[0], n_per_joint=n, rng=np.random.default_rng(seed), noise=sigma, drive_range=(2.0, 3.0)
        )
        entry = build_calibration_map(samples_from_frame(frame)).for_joint(0)
        assert abs(entry.alpha - 3.5) < bound, seed
        assert abs(entry.beta - 0.7) < bound, seed

def test_shared_map(rng):
    frame = synthetic_frame(2.0, 4.0, joint_ids=[0, 1, 2], n_per_joint=10, rng=rng)
    cal = build_calibration_map(samples_from_frame(frame), shared=True)
    assert cal.for_joint(0) is cal.for_joint(11)
    assert cal.for_joint(5).alpha == pytest.approx(2.0, abs=1e-12)

def test_missing_domain_leaves_fields_unset():
    cal = build_calibration_map(samples([(1.0, 2.0), (2.0, 4.0)], domain="real"))
    entry = cal.for_joint(0)
    assert entry.alpha == pytest.approx(2.0)
    assert entry.beta is None and entry.tau_max is None
    with pytest.raises(ConfigError):
        normalize_torque(cal, 0.5, 0)

def test_unknown_domain():
    with pytest.raises(ConfigError):
        build_calibration_map(samples([(1.0, 2.0), (2.0, 4.0)], domain="lab"))

def test_normalization():
    cal = CalibrationMap(joints={3: JointCalibration(i_max=2.0, tau_max=0.5)})
    assert normalize_current(cal, 2.0, 3) == 1.0
    assert normalize_current(cal, 0.0, 3) == 0.0
    assert normalize_current(cal, 1.0, 3) == 0.5
    assert normalize_current(cal, 5.0, 3) == 1.0
    assert normalize_torque(cal, 0.5, 3) == 1.0
    assert normalize_torque(cal, 0.0, 3) == 0.0
    with pytest.raises(ConfigError):
        normalize_torque(cal, 0.1, 4)

def test_vectorized_torque_normalization():
    limits = CalibrationMap.from_torque_limits(2.0, n_joints=12).torque_limits(12)
    out = normalize_torques(np.array([[-1.0] + [1.0] * 10 + [3.0]]), limits)
    np.testing.assert_array_equal(out[0, [0, 1, 11]], [0.0, 0.5, 1.0])

def test_csv_round_trip(tmp_path, rng):
    path = tmp_path / "cal.csv"
    synthetic_frame(1.5, 2.5, joint_ids=[0, 1], n_per_joint=5, rng=rng).to_csv(path, index=False)
    cal = build_calibration_map(read_samples_csv(path))
    out = tmp_path / "cal.json"
    save_calibration(cal, out)
    assert load_calibration(out) == cal

def test_empty_csv(tmp_path):
    header_only = tmp_path / "header.csv"
    header_only.write_text("joint_id,drive_signal,contact_force,domain\n")
    with pytest.raises(ConfigError):
        read_samples_csv(header_only)
    blank = tmp_path / "blank.csv"
    blank.write_text("")
    with pytest.raises(ConfigError):
        read_samples_csv(blank)

def test_missing_column(tmp_path):
    path = tmp_path / "cal.csv"
    path.write_text("joint_id,drive_signal,domain\n0,1.0,sim\n")
    with pytest.raises(ConfigError) as e:
        read_samples_csv(path)
    assert e.value.path == "contact_force"
