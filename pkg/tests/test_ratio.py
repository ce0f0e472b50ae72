"""Domain-classifier training and density-ratio estimation."""

import math

import numpy as np
import pytest

from driftcal.errors import (
    DegenerateTraining,
    InvalidProbability,
    LengthMismatch,
    NegativeWeight,
    ParseError,
    ShapeError,
)
from driftcal.ratio import (
    ClassifierConfig,
    ClassifierModel,
    TrainingMeta,
    _logistic_loss,
    density_ratio,
    fit_density_ratio,
    import_external_weights,
    predict_prob,
    predict_prob_rows,
    train_domain_classifier,
)
from driftcal.synthlab import LabelModel, ShiftSpec, gen_covariate_shift, oracle_ratios


def zero_model(d: int) -> ClassifierModel:
    return ClassifierModel(
        coefficients=np.zeros(d), intercept=0.0,
        meta=TrainingMeta(iterations=0, final_loss=math.log(2), l2=0.0),
    )


class TestTrainDomainClassifier:
    def test_identical_multisets_stay_uninformative(self):
        rng = np.random.default_rng(31)
        x = rng.normal(size=(80, 3))
        model = train_domain_classifier(x, x.copy(), ClassifierConfig())
        for row in x[:20]:
            assert predict_prob(model, row) == pytest.approx(0.5, abs=0.05)

    def test_separable_clusters_reach_high_accuracy(self):
        rng = np.random.default_rng(32)
        a = rng.normal(scale=0.3, size=(150, 2)) + np.array([-5.0, 0.0])
        b = rng.normal(scale=0.3, size=(150, 2)) + np.array([5.0, 0.0])
        model = train_domain_classifier(a, b, ClassifierConfig())
        p = predict_prob_rows(model, np.vstack([a, b]))
        truth = np.r_[np.zeros(150), np.ones(150)]
        assert ((p > 0.5) == truth).mean() >= 0.99

    def test_zero_iterations_gives_zero_model(self):
        rng = np.random.default_rng(33)
        a, b = rng.normal(size=(10, 2)), rng.normal(size=(12, 2))
        model = train_domain_classifier(a, b, ClassifierConfig(max_iters=0))
        assert np.all(model.coefficients == 0.0) and model.intercept == 0.0
        assert predict_prob(model, a[0]) == 0.5

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            train_domain_classifier(np.zeros((3, 2)), np.zeros((3, 4)), ClassifierConfig())

    def test_empty_class(self):
        with pytest.raises(DegenerateTraining):
            train_domain_classifier(np.zeros((0, 2)), np.zeros((3, 2)), ClassifierConfig())

    def test_deterministic_bit_identical(self):
        rng = np.random.default_rng(34)
        a, b = rng.normal(size=(60, 4)), rng.normal(size=(50, 4)) + 0.5
        m1 = train_domain_classifier(a, b, ClassifierConfig(seed=9))
        m2 = train_domain_classifier(a.copy(), b.copy(), ClassifierConfig(seed=9))
        assert np.array_equal(m1.coefficients, m2.coefficients)
        assert m1.intercept == m2.intercept
        assert m1.meta == m2.meta

    def test_loss_non_increasing(self):
        rng = np.random.default_rng(35)
        a, b = rng.normal(size=(40, 3)), rng.normal(size=(40, 3)) + 1.0
        x = np.vstack([a, b])
        y = np.r_[np.zeros(40), np.ones(40)]
        losses = []
        for iters in range(0, 40):
            m = train_domain_classifier(a, b, ClassifierConfig(max_iters=iters, tol=0.0))
            theta = np.r_[m.coefficients, m.intercept]
            losses.append(_logistic_loss(theta, x, y, m.meta.l2))
        for prev, cur in zip(losses, losses[1:]):
            assert cur <= prev + 1e-12


class TestPredictProb:
    def test_zero_model_is_half(self):
        assert predict_prob(zero_model(3), [1.0, 2.0, 3.0]) == 0.5

    def test_clamped_at_huge_logit(self):
        model = ClassifierModel(np.array([100.0]), 0.0,
                                TrainingMeta(0, 0.0, 0.0))
        assert predict_prob(model, [10.0]) == 1.0 - 1e-6
        assert predict_prob(model, [-10.0]) == 1e-6

    def test_log_four_gives_point_eight(self):
        model = ClassifierModel(np.array([1.0]), 0.0, TrainingMeta(0, 0.0, 0.0))
        assert predict_prob(model, [math.log(4.0)]) == pytest.approx(0.8, abs=1e-12)

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            predict_prob(zero_model(3), [1.0, 2.0])


class TestDensityRatio:
    def test_balanced_uninformative(self):
        assert density_ratio(0.5, 1.0) == pytest.approx(1.0, abs=1e-15)

    def test_odds_arithmetic(self):
        assert density_ratio(0.8, 1.0) == pytest.approx(4.0, abs=1e-12)
        assert density_ratio(0.8, 0.5) == pytest.approx(2.0, abs=1e-12)

    def test_clipping(self):
        assert density_ratio(0.999999, 1.0, clip=(1e-3, 1e3)) == 1e3
        assert density_ratio(1e-6, 1.0, clip=(1e-3, 1e3)) == 1e-3

    def test_invalid_probability(self):
        for p in (0.0, 1.0, -0.1, 1.1):
            with pytest.raises(InvalidProbability):
                density_ratio(p, 1.0)

    def test_strictly_increasing_in_p(self):
        wide = (1e-12, 1e12)  # clipping disabled
        values = [density_ratio(p, 1.0, clip=wide) for p in np.linspace(0.01, 0.99, 50)]
        assert all(a < b for a, b in zip(values, values[1:]))


class TestFitDensityRatio:
    def test_no_shift_means_ratio_near_one(self):
        rng = np.random.default_rng(36)
        x = rng.normal(size=(300, 3))
        model = fit_density_ratio(x, x.copy())
        ratios = model.ratios(x)
        assert 0.8 <= ratios.mean() <= 1.25

    def test_prior_ratio_from_counts(self):
        rng = np.random.default_rng(37)
        model = fit_density_ratio(rng.normal(size=(30, 2)), rng.normal(size=(60, 2)))
        assert model.prior_ratio == pytest.approx(0.5)

    def test_holdout_excludes_part_of_the_pool(self):
        rng = np.random.default_rng(38)
        cal = rng.normal(size=(100, 2))
        test = rng.normal(size=(200, 2)) + 0.5
        model = fit_density_ratio(cal, test, test_holdout=0.25)
        assert model.prior_ratio == pytest.approx(100 / 150)
        full = fit_density_ratio(cal, test)
        assert full.prior_ratio == pytest.approx(0.5)
        # deterministic given the seed
        again = fit_density_ratio(cal, test, test_holdout=0.25)
        np.testing.assert_array_equal(model.classifier.coefficients,
                                      again.classifier.coefficients)

    def test_holdout_out_of_range(self):
        rng = np.random.default_rng(39)
        x = rng.normal(size=(10, 2))
        with pytest.raises(InvalidProbability):
            fit_density_ratio(x, x, test_holdout=1.0)

    def test_rank_agreement_with_oracle_under_shift(self):
        spec = ShiftSpec(
            dim=1, cal_mean=(0.0,), test_mean=(1.0,), shared_stddev=1.0,
            label_model=LabelModel(n_choices=4, weight_vector=(1.0,), noise_temp=0.5),
        )
        cal, test = gen_covariate_shift(2000, 2000, spec, seed=77)
        model = fit_density_ratio(cal.embeddings, test.embeddings)
        est = model.ratios(cal.embeddings)
        orc = oracle_ratios(cal.embeddings, spec)

        def ranks(v):
            r = np.empty(v.size)
            r[np.argsort(v)] = np.arange(v.size)
            return r

        spearman = np.corrcoef(ranks(est), ranks(orc))[0, 1]
        assert spearman >= 0.9


class TestImportExternalWeights:
    def test_round_trip_of_ones(self, tmp_path):
        path = tmp_path / "w.txt"
        path.write_text("1.0\n" * 7)
        w = import_external_weights(path, expected_n=7)
        np.testing.assert_array_equal(w, np.ones(7))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            import_external_weights(tmp_path / "absent.txt")

    def test_negative_entry(self, tmp_path):
        path = tmp_path / "w.txt"
        path.write_text("1.0\n-0.5\n")
        with pytest.raises(NegativeWeight):
            import_external_weights(path)

    def test_garbage_line_reports_number(self, tmp_path):
        path = tmp_path / "w.txt"
        path.write_text("1.0\nbogus\n")
        with pytest.raises(ParseError, match="line 2"):
            import_external_weights(path)

    def test_length_check(self, tmp_path):
        path = tmp_path / "w.txt"
        path.write_text("1\n2\n3\n")
        with pytest.raises(LengthMismatch):
            import_external_weights(path, expected_n=4)
