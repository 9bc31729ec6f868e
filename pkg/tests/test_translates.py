import numpy as np
import pytest

from spectralhom import (
    GeneratorSpec,
    PatternMatrix,
    bracket_sum,
    bspline_rule,
    dirichlet_rule,
    dlvp_rule,
    frequency_set,
    fundamental_interpolant,
    make_rule,
    nodal_synthesis,
    orthonormalize,
    pattern,
    synthesize,
)
from spectralhom.errors import DegenerateGeneratorError, DomainError

from oracles import random_regular_matrix

M44 = PatternMatrix.from_any([[4, 1], [0, 4]])


class TestGeneratorSpec:
    @pytest.mark.parametrize(
        "doc",
        [
            {"kind": "dirichlet"},
            {"kind": "dlvp", "alpha": [0.4, 0.0]},
            {"kind": "bspline", "order": 2},
        ],
    )
    def test_json_round_trip(self, doc):
        spec = GeneratorSpec.from_json(doc)
        assert GeneratorSpec.from_json(spec.to_json()) == spec

    def test_rules_from_spec(self):
        for doc in ({"kind": "dirichlet"}, {"kind": "dlvp", "alpha": [0.2, 0.6]}, {"kind": "bspline", "order": 1}):
            rule = make_rule(GeneratorSpec.from_json(doc), M44)
            assert rule.coefficients(np.zeros((1, 2), dtype=np.int64)).shape == (1,)

    def test_unknown_kind_rejected(self):
        with pytest.raises(DomainError):
            GeneratorSpec.from_json({"kind": "sinc"})


class TestDirichletRule:
    def test_indicator_values(self):
        M = PatternMatrix.from_any([[2, 0], [0, 2]])
        rule = dirichlet_rule(M)
        assert rule.coefficients(np.array([0, 0])) == 1.0
        assert rule.coefficients(np.array([3, 0])) == 0.0

    def test_support_is_exactly_the_dual_set(self):
        M = PatternMatrix.from_any([[2, 1], [0, 2]])
        rule = dirichlet_rule(M)
        ks = np.array([[i, j] for i in range(-4, 5) for j in range(-4, 5)])
        vals = rule.coefficients(ks)
        assert int(vals.sum()) == 4  # exactly m frequencies carry weight 1
        dual = {tuple(h) for h in frequency_set(M).freqs}
        live = {tuple(k) for k, v in zip(ks, vals) if v == 1.0}
        assert live == dual


class TestDlvpRule:
    def test_zero_alpha_matches_dirichlet(self):
        rule0 = dlvp_rule(M44, [0.0, 0.0])
        ruled = dirichlet_rule(M44)
        ks = np.array([[i, j] for i in range(-6, 7) for j in range(-6, 7)])
        assert np.abs(np.sqrt(M44.m) * rule0.coefficients(ks) - ruled.coefficients(ks)).max() == 0.0

    def test_one_dimensional_hat_value(self):
        # alpha = 1 degenerates the trapezoid to the unit hat 1 - |xi|
        M = PatternMatrix.from_any([[4]])
        rule = dlvp_rule(M, [1.0])
        assert rule.coefficients(np.array([1])) == pytest.approx(0.5 * 0.75, abs=1e-15)

    def test_alpha_validation(self):
        with pytest.raises(DomainError):
            dlvp_rule(M44, [1.2, 0.0])
        with pytest.raises(DomainError):
            dlvp_rule(M44, [0.4])

    def test_support_bound(self):
        rule = dlvp_rule(M44, [0.4, 0.0])
        assert rule.support_periods == 1
        # outside (1+alpha)/2 per axis the coefficients vanish
        ks = np.array([[i, j] for i in range(-12, 13) for j in range(-12, 13)])
        vals = rule.coefficients(ks)
        adj = np.array(M44.transpose.adjugate, dtype=np.int64).T
        xi = (ks @ np.array(M44.adjugate, dtype=np.int64)) / M44.det
        live = np.abs(vals) > 0
        assert np.all(np.abs(xi[live, 0]) <= 0.7 + 1e-12)
        assert np.all(np.abs(xi[live, 1]) <= 0.5 + 1e-12)

    def test_continuity_toward_dirichlet_on_odd_pattern(self):
        # odd Smith factors leave no half-cell boundary frequencies
        M = PatternMatrix.from_any([[5, 2], [0, 5]])
        ks = np.concatenate([frequency_set(M).freqs, np.array([[7, 3], [-6, 2], [11, -9]])])
        small = np.sqrt(M.m) * dlvp_rule(M, [1e-3, 1e-3]).coefficients(ks)
        target = dirichlet_rule(M).coefficients(ks)
        assert np.abs(small - target).max() < 2e-3

    def test_boundary_weight_is_shared(self):
        # on an even pattern the cell boundary xi = -1/2 carries 1/2 for alpha > 0
        M = PatternMatrix.from_any([[4]])
        rule = dlvp_rule(M, [0.4])
        assert rule.coefficients(np.array([-2])) == pytest.approx(0.25, abs=1e-15)  # m^{-1/2} * 1/2
        assert rule.coefficients(np.array([2])) == pytest.approx(0.25, abs=1e-15)


class TestBsplineRule:
    def test_zero_frequency(self):
        rule = bspline_rule(M44, 1)
        assert rule.coefficients(np.array([0, 0])) == pytest.approx(1 / 4.0, abs=1e-15)

    def test_vanishes_on_transposed_lattice(self):
        M = PatternMatrix.from_any([[3, 0], [0, 3]])
        rule = bspline_rule(M, 1)
        k = M.array.T @ np.array([1, 2])
        assert rule.coefficients(k) == pytest.approx(0.0, abs=1e-15)

    def test_frozen_value_order_two(self):
        M = PatternMatrix.from_any([[2]])
        rule = bspline_rule(M, 2)
        expect = (1.0 / np.sqrt(2.0)) * (2.0 / np.pi) ** 2
        assert rule.coefficients(np.array([1])) == pytest.approx(expect, rel=1e-14)

    def test_order_validation(self):
        with pytest.raises(DomainError):
            bspline_rule(M44, 0)

    def test_conjugate_symmetry(self):
        rule = bspline_rule(M44, 3)
        ks = np.array([[i, j] for i in range(-9, 10) for j in range(-9, 10)])
        assert np.abs(rule.coefficients(ks) - rule.coefficients(-ks)).max() < 1e-15


class TestBracketSum:
    def test_delta_sequence(self):
        def delta(ks):
            return np.all(ks == 0, axis=1).astype(float)

        M = PatternMatrix.from_any([[3, 1], [0, 2]])
        assert bracket_sum(delta, M, (0, 0), 2) == 1.0
        h = frequency_set(M).freqs[1]
        assert bracket_sum(delta, M, h, 2) == 0.0

    def test_dirichlet_squared_is_one_per_class(self):
        M = PatternMatrix.from_any([[3, 1], [0, 2]])
        rule = dirichlet_rule(M)

        def sq(ks):
            return np.abs(rule.coefficients(ks)) ** 2

        for h in frequency_set(M).freqs:
            assert bracket_sum(sq, M, h, 2) == pytest.approx(1.0, abs=1e-15)

    def test_dlvp_truncation_is_exact(self):
        M = PatternMatrix.from_any([[4, 0], [0, 4]])
        rule = dlvp_rule(M, [1.0, 1.0])

        def sq(ks):
            return np.abs(rule.coefficients(ks)) ** 2

        val1 = bracket_sum(sq, M, (0, 0), 1)
        val3 = bracket_sum(sq, M, (0, 0), 3)
        assert val1 == pytest.approx(val3, abs=1e-16)
        assert val1 == pytest.approx(rule.gram_bracket()[0] / M.m, rel=1e-13)

    def test_bspline_closed_form_matches_truncated_sum(self):
        # |c|^2 summands are nonnegative, so truncated sums increase toward
        # the closed form; the tail at |z| > Z decays like Z^{1-2p} per axis
        M = PatternMatrix.from_any([[3, 1], [0, 2]])
        tails = {1: 2e-2, 2: 5e-8, 3: 2e-12}
        for order, tail in tails.items():
            rule = bspline_rule(M, order)

            def sq(ks):
                return np.abs(rule.coefficients(ks)) ** 2

            closed = rule.gram_bracket() / M.m
            for idx, h in enumerate(frequency_set(M).freqs):
                lo = bracket_sum(sq, M, h, 20).real
                hi = bracket_sum(sq, M, h, 40).real
                assert lo <= hi <= closed[idx] + 1e-14
                assert closed[idx] - hi < tail

    def test_bspline_integer_samples_match_convolution_quadrature(self):
        # the closed-form cosine weights are integer samples of the centred
        # cardinal B-spline; rebuild them by repeated numerical convolution
        from spectralhom.translates import _centred_bspline_samples

        h = 1e-4
        x = np.arange(-0.5 + h / 2, 0.5, h)
        box = np.ones(x.size)
        spline = box.copy()
        for order in range(2, 7):
            spline = np.convolve(spline, box) * h
            half_support = order / 2.0
            grid = np.arange(-(spline.size // 2), spline.size // 2 + 1) * h
            samples = _centred_bspline_samples(order)
            for j, val in enumerate(samples):
                idx = int(round(j / h)) + spline.size // 2
                if abs(j) < half_support:
                    assert abs(spline[idx] - val) < 5e-4

    def test_first_power_closed_form_bounds(self):
        # even-order summands are nonnegative; the truncated sum brackets the
        # closed form together with an integral tail bound
        M = PatternMatrix.from_any([[3]])
        rule = bspline_rule(M, 2)
        closed = rule.coeff_bracket() * np.sqrt(M.m)
        for idx, h in enumerate(frequency_set(M).freqs):
            for Z in (50, 200):
                approx = bracket_sum(
                    lambda ks: rule.coefficients(ks) * np.sqrt(M.m), M, h, Z
                ).real
                tail = 2.0 / (np.pi**2 * (Z - 0.5))
                assert approx - 1e-13 <= closed[idx] <= approx + tail


class TestOrthonormalize:
    @pytest.mark.parametrize(
        "factory",
        [
            lambda M: dirichlet_rule(M),
            lambda M: dlvp_rule(M, [0.4, 0.0]),
            lambda M: dlvp_rule(M, [1.0, 1.0]),
            lambda M: bspline_rule(M, 1),
            lambda M: bspline_rule(M, 2),
            lambda M: bspline_rule(M, 4),
        ],
    )
    def test_certificate(self, factory):
        rule = orthonormalize(factory(M44))
        assert np.abs(rule.gram_bracket() - 1.0).max() < 1e-12

    def test_certificate_random_matrices(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            M = PatternMatrix(tuple(map(tuple, random_regular_matrix(rng, 2, 128))))
            for rule in (dirichlet_rule(M), dlvp_rule(M, [0.7, 0.3]), bspline_rule(M, 2)):
                assert np.abs(orthonormalize(rule).gram_bracket() - 1.0).max() < 1e-12

    def test_dirichlet_becomes_uniform(self):
        rule = orthonormalize(dirichlet_rule(M44))
        vals = rule.coefficients(frequency_set(M44).freqs)
        assert np.abs(vals - 1.0 / np.sqrt(M44.m)).max() < 1e-15

    def test_idempotent(self):
        rule = orthonormalize(dlvp_rule(M44, [0.4, 0.6]))
        again = orthonormalize(rule)
        ks = np.array([[i, j] for i in range(-6, 7) for j in range(-6, 7)])
        assert np.abs(rule.coefficients(ks) - again.coefficients(ks)).max() < 1e-14

    def test_degenerate_generator_rejected(self):
        # zero out an entire congruence class by erasing every dlvp plateau:
        # a one-axis alpha of 1 with a pattern whose class hits only the tip
        class Broken:
            pass

        rule = dlvp_rule(M44, [1.0, 1.0])
        # monkey-light: scale one class to zero through the public surface is
        # not possible, so check the error path with a synthetic rule
        import spectralhom.translates as tr

        broken = tr.CoefficientRule(M44, "dlvp", alpha=(1.0, 1.0))
        orig = broken._raw_class_sum

        def patched(power):
            vals = orig(power)
            vals[3] = 0.0
            return vals

        broken._raw_class_sum = patched
        with pytest.raises(DegenerateGeneratorError):
            orthonormalize(broken)


class TestInterpolation:
    def test_dirichlet_interpolant_is_uniform(self):
        rule = dirichlet_rule(M44)
        ahat = fundamental_interpolant(rule)
        assert np.abs(ahat - 1.0 / M44.m).max() < 1e-15

    @pytest.mark.parametrize(
        "factory",
        [
            lambda M: orthonormalize(dirichlet_rule(M)),
            lambda M: orthonormalize(dlvp_rule(M, [0.4, 0.0])),
            lambda M: orthonormalize(bspline_rule(M, 2)),
        ],
    )
    def test_cardinal_property_at_nodes(self, factory):
        rule = factory(M44)
        ahat = fundamental_interpolant(rule)
        vals = nodal_synthesis(rule, ahat)
        assert abs(vals[0] - 1.0) < 1e-10
        assert np.abs(vals[1:]).max() < 1e-10

    def test_nodal_synthesis_matches_brute_force(self):
        M = PatternMatrix.from_any([[8, 17], [0, 8]])
        rule = orthonormalize(dlvp_rule(M, [0.4, 0.0]))
        ahat = fundamental_interpolant(rule)
        nodes = 2.0 * np.pi * pattern(M).points[:9]
        direct = synthesize(rule, ahat, nodes)
        fast = nodal_synthesis(rule, ahat)[:9]
        assert np.abs(direct - fast).max() < 1e-10

    def test_scaled_anisotropic_interpolation(self):
        M = PatternMatrix.from_any([[8, 17], [0, 8]])
        rule = orthonormalize(dlvp_rule(M, [0.4, 0.0]))
        vals = nodal_synthesis(rule, fundamental_interpolant(rule))
        assert abs(vals[0] - 1.0) < 1e-10
        assert np.abs(vals[1:]).max() < 1e-10

    def test_vanishing_coefficient_class_sum_rejected(self):
        import spectralhom.translates as tr

        rule = tr.CoefficientRule(M44, "bspline", order=2)
        orig = rule._raw_class_sum

        def patched(power):
            vals = orig(power)
            if power == 1:
                vals[2] = 0.0
            return vals

        rule._raw_class_sum = patched
        with pytest.raises(DegenerateGeneratorError):
            fundamental_interpolant(rule)


class TestSynthesize:
    def test_constant_function(self):
        rule = orthonormalize(dirichlet_rule(M44))
        ahat = np.zeros(M44.m)
        ahat[0] = 1.0
        xs = np.array([[0.1, -0.7], [2.0, 1.0], [0.0, 0.0]])
        vals = synthesize(rule, ahat, xs)
        assert np.abs(vals - vals[0]).max() < 1e-12

    def test_dirichlet_kernel_peaks_at_origin(self):
        rule = dirichlet_rule(M44)
        ahat = fundamental_interpolant(rule)
        xs = np.concatenate([[[0.0, 0.0]], 2.0 * np.pi * pattern(M44).points[1:]])
        vals = synthesize(rule, ahat, xs)
        assert vals[0].real == pytest.approx(1.0, abs=1e-12)
        assert np.abs(vals[1:]).max() < np.abs(vals[0])

    def test_real_synthesis_from_symmetric_coefficients(self):
        # an even-magnitude generator and conjugate-symmetric weights give a
        # real function
        M = PatternMatrix.from_any([[5, 0], [0, 5]])
        rule = orthonormalize(bspline_rule(M, 2))
        freqs = frequency_set(M)
        rng = np.random.default_rng(33)
        ahat = rng.standard_normal(M.m) + 1j * rng.standard_normal(M.m)
        neg = freqs.class_index(-freqs.freqs)
        ahat = ahat + np.conj(ahat[neg])
        xs = rng.uniform(-np.pi, np.pi, (20, 2))
        vals = synthesize(rule, ahat, xs, periods=6)
        assert np.abs(vals.imag).max() < 1e-12 * max(1.0, np.abs(vals.real).max())
