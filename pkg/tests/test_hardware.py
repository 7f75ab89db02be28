import numpy as np
import pytest

from meshwalk.hardware import (
    HardwareModel,
    apply_insertion_loss,
    bias_to_phase,
    calibrate_coupler_sigma,
    default_phase_table,
    directional_coupler,
    imperfect_cell_unitary,
    phase_to_bias,
    sample_coupler_errors,
    visibility,
)
from meshwalk.lattice import RbsSetting, cell_unitary
from oracles import analytic_visibility
from test_lattice import assert_up_to_global_phase


class TestImperfectCellUnitary:
    def test_ideal_couplers_reduce_to_cell_unitary(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            setting = RbsSetting(rng.uniform(-np.pi, np.pi), rng.uniform(-np.pi, np.pi))
            u = imperfect_cell_unitary(setting, (0.0, 0.0))
            ideal = cell_unitary(setting)
            assert_up_to_global_phase(u.ravel(), ideal.ravel())

    def test_ideal_wire_is_bar(self):
        u = imperfect_cell_unitary(RbsSetting(np.pi, 0.0), (0.0, 0.0))
        assert abs(u[0, 1]) < 1e-12
        assert abs(u[1, 0]) < 1e-12

    def test_always_unitary(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            setting = RbsSetting(rng.uniform(-np.pi, np.pi), rng.uniform(-np.pi, np.pi))
            deltas = tuple(rng.uniform(-0.3, 0.3, 2))
            u = imperfect_cell_unitary(setting, deltas)
            assert np.abs(u.conj().T @ u - np.eye(2)).max() < 1e-12

    def test_reflectivity_out_of_range(self):
        with pytest.raises(ValueError):
            directional_coupler(0.6)
        with pytest.raises(ValueError):
            imperfect_cell_unitary(RbsSetting(0, 0), (0.0, -0.7))


class TestVisibility:
    def test_ideal_cell_reaches_unity(self):
        assert abs(visibility((0.0, 0.0)) - 1.0) < 1e-12

    def test_matches_analytic_value(self):
        for deltas in ((0.01, 0.01), (0.02, -0.03), (0.25, 0.25)):
            swept = visibility(deltas)
            exact = analytic_visibility(*deltas)
            assert abs(swept - exact) < 1e-9

    def test_extreme_error_degrades_visibility(self):
        assert visibility((0.25, 0.25)) < 0.9

    def test_invariant_under_global_cell_phase(self):
        # adding any external phase never changes the transmission sweep
        d = (0.015, -0.02)
        base = visibility(d)
        thetas = np.linspace(0, 2 * np.pi, 512, endpoint=False)
        trans = [
            abs(imperfect_cell_unitary(RbsSetting(th, 1.1), d)[0, 0]) ** 2
            for th in thetas
        ]
        shifted = (max(trans) - min(trans)) / (max(trans) + min(trans))
        assert abs(shifted - base) < 1e-9


class TestCalibration:
    def test_sigma_reproduces_target_mean_visibility(self):
        sigma = calibrate_coupler_sigma(0.9993)
        model = HardwareModel(coupler_sigma=sigma)
        cells = sample_coupler_errors(model, 56, seed=2023)
        mean_v = np.mean([visibility(tuple(pair), sweep_points=512) for pair in cells])
        assert abs(mean_v - 0.9993) < 3e-4

    def test_sigma_magnitude_is_small(self):
        sigma = calibrate_coupler_sigma(0.9993)
        assert 0.001 < sigma < 0.05


class TestPhaseResponse:
    def test_zero_bias_gives_zero_phase(self):
        model = HardwareModel()
        assert bias_to_phase(model, 0.0) == 0.0

    def test_full_bias_exceeds_two_pi(self):
        model = HardwareModel()
        assert bias_to_phase(model, model.max_bias) > 2 * np.pi

    def test_inverse_within_table_resolution(self):
        model = HardwareModel()
        table = model.phase_table
        step = float(np.sqrt(table[-1, 0]) - np.sqrt(table[-2, 0]))
        for v in np.linspace(0.5, model.max_bias, 17):
            phase = bias_to_phase(model, v)
            back = phase_to_bias(model, phase)
            assert abs(back - v) <= step + 1e-9

    def test_out_of_domain_bias(self):
        model = HardwareModel()
        with pytest.raises(ValueError):
            bias_to_phase(model, model.max_bias * 1.5)
        with pytest.raises(ValueError):
            bias_to_phase(model, -1.0)

    def test_monotone_table_required(self):
        bad = np.array([[0.0, 0.0], [1.0, 1.0], [0.5, 2.0]])
        with pytest.raises(ValueError):
            HardwareModel(phase_table=bad)

    def test_default_table_shape(self):
        table = default_phase_table()
        assert (np.diff(table[:, 0]) > 0).all()
        assert (np.diff(table[:, 1]) >= 0).all()
        assert table[-1, 1] > 2 * np.pi


class TestInsertionLoss:
    def test_uniform_scaling_keeps_normalized_shape(self):
        model = HardwareModel(insertion_loss_db=2.0)
        dist = np.array([0.2, 0.3, 0.5])
        lossy = apply_insertion_loss(model, dist)
        assert abs(lossy.sum() - dist.sum() * 10 ** (-0.2)) < 1e-12
        assert np.abs(lossy / lossy.sum() - dist).max() < 1e-12

    def test_negative_loss_rejected(self):
        with pytest.raises(ValueError):
            HardwareModel(insertion_loss_db=-0.1)


class TestModelIo:
    def test_roundtrip(self, tmp_path):
        model = HardwareModel(coupler_sigma=0.012, visibility_floor=0.999,
                              insertion_loss_db=2.0)
        path = tmp_path / "model.json"
        model.save(str(path))
        loaded = HardwareModel.load(str(path))
        assert loaded.coupler_sigma == model.coupler_sigma
        assert loaded.visibility_floor == model.visibility_floor
        assert loaded.insertion_loss_db == model.insertion_loss_db
        assert np.array_equal(loaded.phase_table, model.phase_table)
