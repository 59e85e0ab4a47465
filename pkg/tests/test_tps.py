import numpy as np
import pytest

from garmentuv.errors import SingularFitError, ValidationError
from garmentuv.tps import ControlPairs, TpsTransform, bending_energy, evaluate, fit_tps

import oracles

UNIT_SQUARE = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]

# Seven pseudo-random pairs (seed 20240811); expected coefficients were
# computed by the pure-Python dense solve in oracles.py and frozen here.
SEVEN_SOURCES = [
    (0.42037845947478825, 0.25265047631534987),
    (0.9780172871294543, 0.9171856747554707),
    (0.2941365972499683, 0.10757683121001105),
    (0.9495116974315824, 0.05021170861035795),
    (0.386548738086964, 0.5691589525403646),
    (0.7055559849933339, 0.7809347665225678),
    (0.5501363279425531, 0.6204814563840989),
]
SEVEN_TARGETS = [
    (0.3503506291403631, 0.36207173232906703),
    (0.8631716495376561, 0.7597980291154269),
    (0.22462803717457883, 0.03718921280467807),
    (0.8113120752105192, 0.033279404233651055),
    (0.2809669941848292, 0.43554767109740056),
    (0.8480149192642248, 0.6705682424106287),
    (0.5462347838926864, 0.764594512827539),
]
SEVEN_WEIGHTS = [
    (0.26274000942887615, 1.3460836374293716),
    (-0.849776706465659, 0.2560763518826757),
    (0.051560203762656444, -0.4948881067372475),
    (-0.051762936946675706, -0.5787102877286433),
    (-0.8492671185959425, -2.889641507490187),
    (1.8828926833765196, -1.9507399132490078),
    (-0.4463861345597751, 4.311819825893038),
]
SEVEN_AFFINE = [
    (0.11204115598560094, 0.7867041448353748, -0.02283891360727604),
    (-0.1797040405147197, 0.3783521093409676, 0.7840846247103107),
]
SEVEN_BENDING = 1.8168017857496868


def fit(sources, targets, lam=0.0):
    return fit_tps(ControlPairs(np.array(sources), np.array(targets)), lam)


class TestFit:
    def test_identity(self):
        t = fit(UNIT_SQUARE, UNIT_SQUARE)
        assert np.allclose(t.affine, [[0, 1, 0], [0, 0, 1]], atol=1e-10)
        assert np.abs(t.weights).max() < 1e-10

    def test_pure_translation(self):
        shifted = [(x + 5.0, y + 3.0) for x, y in UNIT_SQUARE]
        t = fit(UNIT_SQUARE, shifted)
        assert np.allclose(t.affine, [[5, 1, 0], [3, 0, 1]], atol=1e-10)
        assert np.abs(t.weights).max() < 1e-10

    def test_seven_points_interpolates(self):
        t = fit(SEVEN_SOURCES, SEVEN_TARGETS)
        got = evaluate(t, np.array(SEVEN_SOURCES))
        assert np.abs(got - np.array(SEVEN_TARGETS)).max() < 1e-6

    def test_seven_points_matches_frozen_oracle_coefficients(self):
        t = fit(SEVEN_SOURCES, SEVEN_TARGETS)
        assert np.abs(t.weights - np.array(SEVEN_WEIGHTS)).max() < 1e-9
        assert np.abs(t.affine - np.array(SEVEN_AFFINE)).max() < 1e-9

    def test_seven_points_matches_live_oracle(self):
        t = fit(SEVEN_SOURCES, SEVEN_TARGETS)
        w, a = oracles.tps_fit(SEVEN_SOURCES, SEVEN_TARGETS)
        assert np.abs(t.weights - np.array(w)).max() < 1e-9
        assert np.abs(t.affine - np.array(a)).max() < 1e-9

    def test_collinear_sources_raise(self):
        src = [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]
        with pytest.raises(SingularFitError):
            fit(src, src)

    def test_duplicate_sources_raise_at_lambda_zero(self):
        src = [(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
        with pytest.raises(SingularFitError):
            fit(src, src)

    def test_duplicate_sources_allowed_with_regularization(self):
        src = [(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
        t = fit(src, src, lam=0.5)
        assert np.isfinite(t.weights).all()

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ValidationError):
            ControlPairs(np.zeros((4, 2)), np.zeros((3, 2)))

    def test_too_few_pairs_rejected(self):
        with pytest.raises(ValidationError):
            ControlPairs(np.zeros((2, 2)), np.zeros((2, 2)))

    def test_nonfinite_points_rejected(self):
        src = np.array(UNIT_SQUARE)
        bad = src.copy()
        bad[0, 0] = np.nan
        with pytest.raises(ValidationError):
            ControlPairs(bad, src)

    def test_negative_lambda_rejected(self):
        with pytest.raises(ValidationError):
            fit(UNIT_SQUARE, UNIT_SQUARE, lam=-1.0)


class TestEvaluate:
    def test_identity_transform(self):
        t = fit(UNIT_SQUARE, UNIT_SQUARE)
        assert np.allclose(evaluate(t, (0.3, 0.7)), (0.3, 0.7), atol=1e-12)

    def test_kernel_vanishes_at_unit_distance(self):
        # U(1) = 1^2 * log 1 = 0, so a control point one unit away
        # contributes nothing beyond the affine part.
        t = TpsTransform(
            sources=np.array([(0.0, 0.0), (2.0, 0.0), (1.0, 2.0)]),
            weights=np.zeros((3, 2)),
            affine=np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
        )
        manual = TpsTransform(
            sources=t.sources,
            weights=np.zeros((3, 2)),
            affine=t.affine,
        )
        p = np.array([1.0, 0.0])  # distance exactly 1 from first source
        assert np.allclose(evaluate(manual, p), p, atol=0)

    def test_grid_matches_frozen_oracle(self):
        t = fit(SEVEN_SOURCES, SEVEN_TARGETS)
        grid = [
            (gx, gy)
            for gy in np.linspace(0.0, 1.0, 5)
            for gx in np.linspace(0.0, 1.0, 5)
        ]
        expected = np.array(
            [
                oracles.tps_eval(SEVEN_SOURCES, SEVEN_WEIGHTS, SEVEN_AFFINE, p)
                for p in grid
            ]
        )
        got = evaluate(t, np.array(grid))
        assert np.abs(got - expected).max() < 1e-9

    def test_accepts_single_point_and_batch(self):
        t = fit(SEVEN_SOURCES, SEVEN_TARGETS)
        single = evaluate(t, (0.5, 0.5))
        batch = evaluate(t, np.array([[0.5, 0.5]]))
        assert single.shape == (2,)
        assert batch.shape == (1, 2)
        assert np.array_equal(single, batch[0])


class TestBendingEnergy:
    def test_affine_fits_have_zero_energy(self):
        rot = [(0.3 * x - 0.9 * y + 2, 0.9 * x + 0.3 * y - 1) for x, y in UNIT_SQUARE]
        t = fit(UNIT_SQUARE, rot)
        assert abs(bending_energy(t)) < 1e-10

    def test_identity_fit_zero(self):
        t = fit(UNIT_SQUARE, UNIT_SQUARE)
        assert abs(bending_energy(t)) < 1e-10

    def test_matches_frozen_oracle(self):
        t = fit(SEVEN_SOURCES, SEVEN_TARGETS)
        assert abs(bending_energy(t) - SEVEN_BENDING) < 1e-9

    def test_nonnegative(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            src = rng.uniform(0, 1, (8, 2))
            tgt = rng.uniform(0, 1, (8, 2))
            t = fit(src, tgt)
            assert bending_energy(t) >= -1e-12


class TestProperties:
    def test_interpolation_randomized(self):
        rng = np.random.default_rng(101)
        for _ in range(25):
            n = rng.integers(4, 15)
            src = rng.uniform(0, 1, (n, 2))
            tgt = rng.uniform(0, 1, (n, 2))
            t = fit(src, tgt)
            got = evaluate(t, src)
            assert np.abs(got - tgt).max() < 1e-6

    @pytest.mark.parametrize("lam", [0.0, 0.1, 1.0, 10.0])
    def test_affine_reproduction(self, lam):
        rng = np.random.default_rng(55)
        src = rng.uniform(0, 1, (9, 2))
        a = np.array([[1.2, -0.3], [0.4, 0.8]])
        b = np.array([0.5, -2.0])
        tgt = src @ a.T + b
        t = fit(src, tgt, lam=lam)
        assert np.abs(t.weights).max() < 1e-8
        assert bending_energy(t) < 1e-10

    def test_side_conditions(self):
        rng = np.random.default_rng(17)
        for lam in (0.0, 0.5):
            src = rng.uniform(0, 100, (10, 2))
            tgt = rng.uniform(0, 100, (10, 2))
            t = fit(src, tgt, lam=lam)
            assert np.abs(t.weights.sum(axis=0)).max() < 1e-8
            assert np.abs(src.T @ t.weights).max() < 1e-8 * max(1, np.abs(src).max())

    def test_target_translation_equivariance(self):
        rng = np.random.default_rng(23)
        src = rng.uniform(0, 1, (8, 2))
        tgt = rng.uniform(0, 1, (8, 2))
        shift = np.array([3.5, -1.25])
        t0 = fit(src, tgt)
        t1 = fit(src, tgt + shift)
        probe = rng.uniform(-0.5, 1.5, (40, 2))
        assert np.abs(evaluate(t1, probe) - (evaluate(t0, probe) + shift)).max() < 1e-9

    def test_regularization_monotonicity(self):
        rng = np.random.default_rng(31)
        src = rng.uniform(0, 1, (10, 2))
        tgt = src + rng.uniform(-0.3, 0.3, (10, 2))
        energies = [bending_energy(fit(src, tgt, lam=lam)) for lam in (0, 0.1, 1, 10)]
        for lo, hi in zip(energies[1:], energies[:-1]):
            assert lo <= hi + 1e-9
