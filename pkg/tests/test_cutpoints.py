import warnings

import numpy as np
import pytest

from likertlvm.cutpoints import estimate_cuts
from likertlvm.model import LikertDataset, simulate

SEED = 20240817

# norm_quantile(0.01) frozen from a high-precision inverse-CDF table.
Q_001 = -2.3263478740408411009


def _panel(values):
    arr = np.asarray(values, dtype=np.int64)
    return LikertDataset(arr, int(arr.max()))


class TestEstimateCuts:
    def test_median_count_zero(self):
        # item 0, time 0: one of two subjects at or below category 1,
        # so the estimate is the standard normal median.
        y = np.array(
            [
                [[1, 1], [1, 1]],
                [[2, 1], [1, 1]],
            ]
        )
        est = estimate_cuts(_panel(y))
        assert est.per_time[0, 0, 0] == 0.0

    def test_all_above_small_sample(self):
        # n = 98, everyone answers above category 1: (0 + 1)/(98 + 2).
        y = np.full((98, 2, 2), 2, dtype=np.int64)
        est = estimate_cuts(_panel(y))
        assert abs(est.per_time[0, 0, 0] - Q_001) <= 1e-12

    def test_pooled_is_time_mean(self, bench_params, bench_cuts):
        _, data = simulate(bench_params, bench_cuts, 500, 3, SEED)
        est = estimate_cuts(data)
        assert np.allclose(est.pooled, est.per_time.mean(axis=2))

    def test_consistency_large_n(self, bench_params, bench_cuts):
        _, data = simulate(bench_params, bench_cuts, 100_000, 2, SEED)
        est = estimate_cuts(data)
        assert np.max(np.abs(est.pooled[0] - bench_cuts.cuts[0])) < 0.02

    def test_rows_nondecreasing_small_samples(self, bench_params, bench_cuts):
        # n = 8 panels routinely miss categories; the repair warning is
        # expected here
        rng = np.random.default_rng(SEED)
        for _ in range(50):
            _, data = simulate(bench_params, bench_cuts, 8, 2, int(rng.integers(1 << 31)))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                est = estimate_cuts(data)
            assert np.all(np.diff(est.pooled, axis=1) >= 0)

    def test_strictly_increasing_when_all_observed(self, bench_params, bench_cuts):
        _, data = simulate(bench_params, bench_cuts, 2000, 2, SEED)
        assert np.all(np.diff(estimate_cuts(data).pooled, axis=1) > 0)

    def test_tie_repair_warns(self):
        # category 2 never observed at any time: adjacent estimates tie
        # and the upper one is nudged up.
        y = np.array(
            [
                [[1, 1], [1, 1]],
                [[3, 3], [3, 3]],
                [[1, 3], [3, 1]],
            ]
        )
        with pytest.warns(UserWarning):
            est = estimate_cuts(_panel(y))
        assert np.all(np.diff(est.pooled, axis=1) > 0)
        assert abs(est.pooled[0, 1] - est.pooled[0, 0] - 1e-6) < 1e-12

    def test_as_cutpoints_round_trip(self, bench_params, bench_cuts):
        _, data = simulate(bench_params, bench_cuts, 400, 2, SEED)
        est = estimate_cuts(data)
        cuts = est.as_cutpoints()
        assert np.array_equal(cuts.cuts, est.pooled)
        assert cuts.num_categories == 5

    def test_mean_unbiased_at_scale(self, bench_params, bench_cuts):
        # desk-scale asymptotic unbiasedness of the pooled estimator
        reps = 500
        n = 5000
        total = np.zeros((5, 4))
        for r in range(reps):
            _, data = simulate(bench_params, bench_cuts, n, 2, SEED + r)
            total += estimate_cuts(data).pooled
        assert np.max(np.abs(total / reps - bench_cuts.cuts)) < 0.01

    def test_rmse_desk_scale(self, bench_params, bench_cuts):
        # pooled z_11 RMSE at n = 100 sits near 0.138 at bench settings
        reps = 300
        sq = 0.0
        for r in range(reps):
            _, data = simulate(bench_params, bench_cuts, 100, 2, 7_000 + r)
            err = estimate_cuts(data).pooled[0, 0] - bench_cuts.cuts[0, 0]
            sq += err * err
        rmse = np.sqrt(sq / reps)
        assert 0.138 * 0.75 <= rmse <= 0.138 * 1.25
