import numpy as np
import pytest
from scipy import stats

from fileinsurer.errors import InvalidParams
from fileinsurer.rng import child_seed
from fileinsurer.experiments import (
    DISTS,
    ExperimentConfig,
    _reallocate_trial,
    published_value,
    refresh_max_load,
    reallocate_max_load,
    run_table3,
    sample_file_size,
    sample_file_sizes,
    verify_thm2_empirical,
)


def gen(seed=0):
    return np.random.default_rng(seed)


def test_uniform01_support():
    x = sample_file_sizes("uniform01", 10**6, gen())
    assert x.min() > 0 and x.max() < 1


def test_uniform12_support():
    x = sample_file_sizes("uniform12", 10**5, gen())
    assert x.min() >= 1 and x.max() < 2


def test_exponential_mean():
    x = sample_file_sizes("exponential", 10**6, gen(1))
    assert abs(x.mean() - 1) < 0.01


@pytest.mark.parametrize("dist,sigma", [("normalMuEqVar", 1.0), ("normalMuEq2Var", np.sqrt(0.5))])
def test_truncated_normal_mean(dist, sigma):
    x = sample_file_sizes(dist, 10**6, gen(2))
    assert x.min() > 0
    oracle = stats.truncnorm.mean(-1.0 / sigma, np.inf, loc=1.0, scale=sigma)
    if dist == "normalMuEqVar":
        assert oracle == pytest.approx(1.2876, abs=1e-4)
    assert abs(x.mean() - oracle) / oracle < 0.02


def test_single_size_draw():
    assert 0 < sample_file_size("uniform01", gen()) < 1
    with pytest.raises(InvalidParams):
        sample_file_sizes("pareto", 3, gen())


def test_config_validation():
    with pytest.raises(InvalidParams):
        ExperimentConfig(10, 20).validate()
    with pytest.raises(InvalidParams):
        ExperimentConfig(10, 5, trials=0).validate()
    with pytest.raises(InvalidParams):
        ExperimentConfig(10, 5, capacity_factor=0.5).validate()
    with pytest.raises(InvalidParams):
        ExperimentConfig(10, 5, mode="shuffle").validate()


@pytest.mark.parametrize("mode", ["reallocate", "refresh"])
def test_single_sector_usage_is_inverse_capacity_factor(mode):
    for dist in DISTS:
        assert run_table3(ExperimentConfig(1000, 1, dist, mode, trials=3, seed=4)) == 0.5


@pytest.mark.parametrize("mode", ["reallocate", "refresh"])
def test_usage_at_least_mean_and_deterministic(mode):
    cfg = ExperimentConfig(20000, 10, "exponential", mode, trials=5, seed=3)
    a = run_table3(cfg)
    assert a >= 0.5
    assert run_table3(cfg) == a


def test_thread_count_does_not_change_result():
    sizes = sample_file_sizes("uniform01", 5000, gen(5))
    assert reallocate_max_load(sizes, 10, 12, 7, threads=1) == reallocate_max_load(sizes, 10, 12, 7, threads=4)


def test_refresh_moves_never_overfill():
    sizes = sample_file_sizes("uniform12", 2000, gen(6))
    cap = 2 * sizes.sum() / 10
    where = np.random.default_rng(child_seed(1, 1)).integers(0, 10, 2000)
    start = np.bincount(where, weights=sizes, minlength=10).max()
    top = refresh_max_load(sizes, 10, 50_000, 1, cap, chunk=4096)
    assert top >= start
    assert top <= max(start, cap)


def test_reallocate_exchangeable_under_input_shuffle():
    sizes = sample_file_sizes("exponential", 4000, gen(8))
    shuffled = sizes[gen(9).permutation(sizes.shape[0])]
    base = [_reallocate_trial(sizes, 20, s) for s in range(300)]
    perm = [_reallocate_trial(shuffled, 20, s) for s in range(300)]
    assert stats.ks_2samp(base, perm).pvalue > 0.01


def test_published_value_lookup():
    assert published_value("reallocate", 10**5, 20, "uniform01") == 0.525
    assert published_value("refresh", 10**5, 100, "exponential") == 0.599
    assert published_value("refresh", 10**5, 7, "exponential") is None


@pytest.mark.slow
def test_refresh_dominates_reallocate_paired_seeds():
    for dist in DISTS:
        re = [run_table3(ExperimentConfig(10**5, 20, dist, "reallocate", 100, seed)) for seed in range(20)]
        rf = [run_table3(ExperimentConfig(10**5, 20, dist, "refresh", 100, seed)) for seed in range(20)]
        assert np.mean(rf) >= np.mean(re), dist


# ---- collision bound by simulation ------------------------------------------------

def test_thm2_large_ratio_never_hits():
    r = verify_thm2_empirical(100, 1000, 0.5, 10**4, seed=1)
    assert r.observed_freq == 0 and r.within_bound


def test_thm2_vacuous_regime():
    r = verify_thm2_empirical(4, 8, 0.5, 2000, seed=2)
    assert 0 <= r.observed_freq <= 1 and r.bound == 1.0 and r.within_bound


def test_thm2_empty_placement():
    r = verify_thm2_empirical(10, 50, 0.0, 100, seed=3)
    assert r.observed_freq == 0


def test_thm2_mid_regime_below_bound():
    r = verify_thm2_empirical(10, 50, 0.5, 10**5, seed=4)
    assert r.bound < 1
    assert r.within_bound


def test_thm2_rejects_overload():
    with pytest.raises(InvalidParams):
        verify_thm2_empirical(10, 50, 0.8, 10, seed=0)
