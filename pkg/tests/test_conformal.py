import numpy as np
import pytest

from scoremorph.conformal import (CalibrationRecord, PredictionInterval,
                                  base_score, calibrate, calibration_records,
                                  evaluate, interval, quantile_index)
from scoremorph.data import Dataset
from scoremorph.network import LocalizerNet
from scoremorph.transforms import (ErcTransform, ExpTransform, FixedTransform,
                                   LinearTransform, LogShiftTransform,
                                   SigmaTransform, SqrtShiftFixture,
                                   TransformFamily)


def records_from_scores(scores):
    return [CalibrationRecord(np.zeros(1), float(b), float(b)) for b in scores]


def test_base_score_examples():
    assert base_score(2.0, 0.0) == 4.0
    assert base_score(1.5, 1.5) == 0.0
    assert base_score(-1.0, 1.0) == 4.0
    with pytest.raises(ValueError):
        base_score(float("inf"), 0.0)


def test_quantile_index_examples():
    assert quantile_index(3, 0.5) == 2
    assert quantile_index(99, 0.05) == 95
    with pytest.raises(ValueError, match="order statistic"):
        quantile_index(10, 0.01)
    with pytest.raises(ValueError):
        quantile_index(10, 1.5)


def test_quantile_index_bounds():
    assert quantile_index(10, 1.0 / 11.0) == 10
    assert quantile_index(10, 1.0) == 1
    for n in (1, 7, 99):
        for alpha in np.linspace(1.0 / (n + 1), 1.0, 23):
            m = quantile_index(n, float(alpha))
            assert 1 <= m <= n


def test_calibrate_worked_example_scores():
    plus = [2.0, np.sqrt(2) + 2.0, np.sqrt(3) + 3.0]
    minus = [0.0, np.sqrt(2) - 2.0, np.sqrt(3) - 3.0]
    assert calibrate(records_from_scores(plus), 0.5) == pytest.approx(
        np.sqrt(2) + 2.0, abs=1e-15)
    assert calibrate(records_from_scores(minus), 0.5) == pytest.approx(
        np.sqrt(2) - 2.0, abs=1e-15)


def test_calibrate_single_record():
    assert calibrate(records_from_scores([3.3]), 0.5) == 3.3


def test_calibrate_empty_errors():
    with pytest.raises(ValueError):
        calibrate([], 0.5)


def test_calibrate_exactly_mstar_below():
    rng = np.random.default_rng(0)
    for _ in range(20):
        b = rng.normal(size=25)
        alpha = float(rng.uniform(1.0 / 26.0, 1.0))
        q = calibrate(records_from_scores(b), alpha)
        assert (b <= q).sum() == quantile_index(25, alpha)


def test_calibrate_ties_deterministic():
    b = [1.0, 1.0, 1.0, 2.0]
    assert calibrate(records_from_scores(b), 0.5) == 1.0


def test_interval_worked_example_sizes():
    # calibration (a, x) = {(1,1),(2,2),(3,3)}, x_test = 0, alpha = 1/2
    pairs = [(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]
    sizes = {}
    for theta in (1.0, -1.0):
        fam = SqrtShiftFixture(theta)
        recs = [CalibrationRecord(np.array([x]), a,
                                  fam.forward(np.array([x]), a))
                for a, x in pairs]
        q = calibrate(recs, 0.5)
        c = interval(fam, np.array([0.0]), 0.0, q)
        sizes[theta] = c.size
    assert sizes[1.0] == pytest.approx(2 * (2 + np.sqrt(2)), abs=1e-12)
    assert sizes[-1.0] == pytest.approx(2 * (2 - np.sqrt(2)), abs=1e-12)
    assert sizes[1.0] != sizes[-1.0]


def test_interval_fixed_family():
    c = interval(FixedTransform(), np.zeros(2), 0.0, 9.0)
    assert c.half_width == pytest.approx(3.0)
    assert c.contains(2.9999)
    assert not c.contains(3.1)
    assert c.size == pytest.approx(6.0)


def test_prediction_interval_validation():
    with pytest.raises(ValueError):
        PredictionInterval(0.0, -1.0)


class SqrtMap(TransformFamily):
    """X-independent sqrt of the base score (global monotone map)."""

    kind = "sqrt-map"

    def phi(self, loc, a):
        return np.sqrt(a)

    def phi_inv(self, loc, b):
        if np.any(np.asarray(b) < 0):
            raise ValueError("negative")
        out = np.asarray(b, dtype=float) ** 2
        return out if np.ndim(b) else float(out)

    def dphi_da(self, loc, a):
        return 0.5 / np.sqrt(a)

    def dphi_dloc(self, loc, a):
        return np.zeros_like(np.asarray(a, dtype=float)) if np.ndim(a) else 0.0


def make_random_split(rng, n_cal=60, n_test=25):
    x = rng.normal(size=(n_cal + n_test, 3))
    y = 0.5 * x.sum(axis=1) + (0.3 + 0.5 * x[:, 0] ** 2) * rng.normal(
        size=n_cal + n_test)
    ds = Dataset(x, y)
    return ds.subset(np.arange(n_cal)), ds.subset(np.arange(n_cal, n_cal + n_test))


def predict_mean(xs):
    return 0.5 * np.asarray(xs).sum(axis=1)


def test_global_monotone_invariance():
    # identity, sqrt, and log of the base score give identical intervals
    rng = np.random.default_rng(7)
    fams = [FixedTransform(), SqrtMap(), LogShiftTransform(offset=0.0)]
    for _ in range(50):
        cal, test = make_random_split(rng)
        sizes = []
        for fam in fams:
            reports = evaluate(fam, predict_mean, cal, test, [0.1])
            sizes.append(reports[0].mean_size)
        assert abs(sizes[0] - sizes[1]) <= 1e-9 * max(1.0, sizes[0])
        assert abs(sizes[0] - sizes[2]) <= 1e-9 * max(1.0, sizes[0])


def test_log_shift_offset_cancels_in_intervals():
    rng = np.random.default_rng(8)
    cal, test = make_random_split(rng)
    a = evaluate(LogShiftTransform(offset=0.0), predict_mean, cal, test, [0.1])
    b = evaluate(LogShiftTransform(offset=2.5), predict_mean, cal, test, [0.1])
    assert a[0].mean_size == pytest.approx(b[0].mean_size, rel=1e-9)


def test_evaluate_degenerate_exact_predictions():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(40, 3))
    y = predict_mean(x)
    ds = Dataset(x, y + rng.normal(size=40))  # calibration has residuals
    test = Dataset(x, y)  # test labels equal predictions exactly
    for alpha in (0.05, 0.2, 0.5):
        rep = evaluate(FixedTransform(), predict_mean, ds, test, [alpha])[0]
        assert rep.empirical_validity == 1.0


def test_evaluate_fixed_vs_zero_localizer_linear():
    net = LocalizerNet.init(3, seed=0, hidden=(6, 5))
    net.weights = [np.zeros_like(w) for w in net.weights]
    rng = np.random.default_rng(10)
    cal, test = make_random_split(rng)
    fixed = evaluate(FixedTransform(), predict_mean, cal, test, [0.1, 0.32])
    lin = evaluate(LinearTransform(net), predict_mean, cal, test, [0.1, 0.32])
    for a, b in zip(fixed, lin):
        assert a.mean_size == pytest.approx(b.mean_size, rel=1e-9)
        assert a.empirical_validity == b.empirical_validity


def test_ranking_equivalent_families_identical_intervals():
    net = LocalizerNet.init(3, seed=3, hidden=(10, 8))
    rng = np.random.default_rng(11)
    cal, test = make_random_split(rng)
    reports = [evaluate(fam, predict_mean, cal, test, [0.1])[0]
               for fam in (LinearTransform(net), ExpTransform(net),
                           SigmaTransform(net))]
    for rep in reports[1:]:
        assert rep.mean_size == pytest.approx(reports[0].mean_size, rel=1e-9)
        assert rep.empirical_validity == reports[0].empirical_validity


def mc_coverage(fam_builder, alpha, n_cal=99, reps=400, seed=0):
    rng = np.random.default_rng(seed)
    fam = fam_builder(rng)
    hits = 0
    for _ in range(reps):
        cal, test = make_random_split(rng, n_cal=n_cal, n_test=1)
        records = calibration_records(fam, predict_mean, cal)
        q = calibrate(records, alpha)
        c = interval(fam, test.x[0], predict_mean(test.x)[0], q)
        hits += c.contains(float(test.y[0]))
    return hits / reps


def test_marginal_coverage_fixed_family():
    alpha = 0.1
    p = quantile_index(99, alpha) / 100.0
    cov = mc_coverage(lambda rng: FixedTransform(), alpha, reps=400, seed=5)
    bound = 3 * np.sqrt(p * (1 - p) / 400)
    assert abs(cov - p) <= bound


def test_marginal_coverage_localized_family():
    alpha = 0.32
    p = quantile_index(99, alpha) / 100.0
    cov = mc_coverage(
        lambda rng: ErcTransform(
            LocalizerNet.init(3, seed=int(rng.integers(1 << 31)),
                              hidden=(10, 8))),
        alpha, reps=400, seed=6)
    bound = 3 * np.sqrt(p * (1 - p) / 400)
    assert abs(cov - p) <= bound
