import numpy as np
import pytest

from meshwalk import (
    HADAMARD,
    INPUT_SPLITTER,
    WIRE,
    DisorderRealization,
    DisorderSpec,
    MeshSpec,
    SeedProvenance,
    SymmetryPolicy,
    apply_disorder,
    build_symmetric_qw,
    build_tomography_program,
    intensities,
    mode_signs,
    propagate,
    sample_realization,
)
from oracles import ks_uniform_statistic


class TestBuildSymmetricQw:
    def test_settings_layout(self, spec14, qw_program):
        assert len(qw_program.cell_settings) == 28
        splitters = [c for c, s in qw_program.cell_settings.items() if s == INPUT_SPLITTER]
        hadamards = [c for c, s in qw_program.cell_settings.items() if s == HADAMARD]
        assert len(splitters) == 1 and splitters[0].layer == 1
        assert len(hadamards) == 27
        assert not qw_program.phase_screens.any()

    def test_distribution_symmetric_about_injection_pair(self, spec14, qw_program):
        dist = intensities(propagate(spec14, qw_program))
        assert np.abs(dist - dist[::-1]).max() < 1e-12

    def test_two_layer_toy_mesh_is_uniform(self):
        # 4 modes, 2 layers: hand-multiplying the three cells gives 1/4 per mode.
        spec = MeshSpec(num_modes=4, depth=2)
        dist = intensities(propagate(spec, build_symmetric_qw(spec)))
        assert np.abs(dist - 0.25).max() < 1e-12


class TestDisorderSpec:
    @pytest.mark.parametrize("bad", [(-0.1, 0.0), (0.0, 1.2), (2.0, 2.0)])
    def test_rejects_out_of_range(self, bad):
        with pytest.raises(ValueError):
            DisorderSpec(*bad)


class TestSampleRealization:
    def test_deterministic_bit_identical(self, spec14):
        level = DisorderSpec(0.7, 0.3)
        prov = SeedProvenance(123456789, 4, 71)
        a = sample_realization(spec14, level, prov)
        b = sample_realization(spec14, level, prov)
        assert np.array_equal(a.static_phases, b.static_phases)
        assert np.array_equal(a.dynamic_phases, b.dynamic_phases)

    def test_different_indices_differ(self, spec14):
        level = DisorderSpec(1.0, 1.0)
        a = sample_realization(spec14, level, SeedProvenance(1, 0, 0))
        b = sample_realization(spec14, level, SeedProvenance(1, 0, 1))
        assert not np.array_equal(a.static_phases, b.static_phases)

    def test_scaling_by_coefficients(self, spec14):
        prov = SeedProvenance(9, 0, 0)
        full = sample_realization(spec14, DisorderSpec(1.0, 1.0), prov)
        half = sample_realization(spec14, DisorderSpec(0.5, 0.25), prov)
        assert np.abs(half.static_phases - 0.5 * full.static_phases).max() < 1e-15
        assert np.abs(half.dynamic_phases - 0.25 * full.dynamic_phases).max() < 1e-15

    def test_marginal_is_uniform(self, spec14):
        # 1e5 pooled static draws at full strength vs U[-pi, pi].
        draws = []
        need = 100_000
        per = spec14.num_modes
        for r in range(need // per + 1):
            real = sample_realization(spec14, DisorderSpec(1.0, 0.0),
                                      SeedProvenance(2024, 0, r))
            draws.append(real.static_phases)
        samples = np.concatenate(draws)[:need]
        assert ks_uniform_statistic(samples, -np.pi, np.pi) < 0.01


class TestApplyDisorder:
    def test_zero_disorder_is_identity(self, spec14, qw_program):
        real = sample_realization(spec14, DisorderSpec(0.0, 0.0), SeedProvenance(5, 0, 0))
        out = apply_disorder(qw_program, real)
        assert np.array_equal(out.phase_screens, qw_program.phase_screens)
        assert out.cell_settings == qw_program.cell_settings

    def test_static_only_constant_across_layers(self, spec14, qw_program):
        real = sample_realization(spec14, DisorderSpec(1.0, 0.0), SeedProvenance(6, 0, 0))
        screens = apply_disorder(qw_program, real).phase_screens
        assert np.abs(screens - screens[:, :1]).max() < 1e-15

    def test_mirrored_sign_pattern(self, spec14, qw_program):
        signs = mode_signs(14, SymmetryPolicy.MIRRORED_SIGN)
        assert np.array_equal(signs, np.concatenate([np.ones(7), -np.ones(7)]))
        real = sample_realization(spec14, DisorderSpec(0.4, 0.0), SeedProvenance(7, 0, 0))
        mirrored = apply_disorder(qw_program, real).phase_screens
        uniform = apply_disorder(qw_program, real,
                                 policy=SymmetryPolicy.UNIFORM_SIGN).phase_screens
        assert np.abs(mirrored[:7] - uniform[:7]).max() < 1e-15
        assert np.abs(mirrored[7:] + uniform[7:]).max() < 1e-15

    def test_dimension_mismatch(self, qw_program):
        bad = DisorderRealization(np.zeros(10), np.zeros((10, 7)),
                                  SeedProvenance(0, 0, 0))
        with pytest.raises(ValueError):
            apply_disorder(qw_program, bad)

    def test_mirrored_realization_mirrors_output(self, spec14, qw_program):
        # Reflecting the disorder fields about the cone axis reflects the
        # output distribution exactly, realization by realization.
        level = DisorderSpec(0.8, 0.6)
        for r in range(10):
            real = sample_realization(spec14, level, SeedProvenance(33, 0, r))
            flipped = DisorderRealization(
                real.static_phases[::-1].copy(),
                real.dynamic_phases[::-1].copy(),
                real.seed_provenance,
            )
            dist = intensities(propagate(spec14, apply_disorder(qw_program, real)))
            dist_flipped = intensities(
                propagate(spec14, apply_disorder(qw_program, flipped))
            )
            assert np.abs(dist_flipped - dist[::-1]).max() < 1e-12

    def test_ensemble_mirror_symmetry(self, spec14, qw_program):
        # The disorder law is sign- and mirror-symmetric, so the ensemble
        # mean is mirror symmetric within Monte-Carlo error.
        from meshwalk import run_level

        mean, se = run_level(spec14, qw_program, DisorderSpec(0.6, 0.4), 2000, 2211)
        diff = np.abs(mean - mean[::-1])
        combined = np.hypot(se, se[::-1])
        assert (diff <= 4.0 * combined + 1e-12).all()


class TestTomographyProgram:
    def test_full_depth_read_is_identity(self, spec14, qw_program):
        out = build_tomography_program(qw_program, spec14.depth)
        assert out.cell_settings == qw_program.cell_settings
        assert np.array_equal(out.phase_screens, qw_program.phase_screens)

    def test_read_layer_one_gives_half_half(self, spec14, qw_program):
        routed = build_tomography_program(qw_program, 1)
        dist = intensities(propagate(spec14, routed))
        assert abs(dist[6] - 0.5) < 1e-12
        assert abs(dist[7] - 0.5) < 1e-12

    def test_wires_after_read_layer(self, spec14, qw_program):
        routed = build_tomography_program(qw_program, 3)
        for cell, setting in routed.cell_settings.items():
            if cell.layer > 3:
                assert setting == WIRE
            else:
                assert setting == qw_program.cell_settings[cell]
        assert not routed.phase_screens[:, 3:].any()

    def test_matches_direct_intermediate_readout(self, spec14, qw_program):
        level = DisorderSpec(0.9, 0.7)
        for r in range(5):
            real = sample_realization(spec14, level, SeedProvenance(44, 0, r))
            disordered = apply_disorder(qw_program, real)
            for layer in range(1, spec14.depth + 1):
                routed = build_tomography_program(disordered, layer)
                via_wires = intensities(propagate(spec14, routed))
                direct = intensities(propagate(spec14, disordered, up_to_layer=layer))
                assert np.abs(via_wires - direct).max() < 1e-12

    def test_read_layer_out_of_range(self, qw_program):
        with pytest.raises(ValueError):
            build_tomography_program(qw_program, 0)
        with pytest.raises(ValueError):
            build_tomography_program(qw_program, 8)
