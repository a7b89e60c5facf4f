import numpy as np
import pytest

from sfca.grid import SegmentGrid
from sfca.synth import CityGenParams, activity_curve, generate_city, generate_corpus, stable_seed


def test_stable_seed_is_fixed():
    # blake2b of the joined parts; pinned so seeds never depend on hash salting
    assert stable_seed("a", 1) == stable_seed("a", 1)
    assert stable_seed("a", 1) != stable_seed("a", 2)
    import hashlib
    ref = int.from_bytes(hashlib.blake2b(b"a\x1f1", digest_size=8).digest(), "little")
    assert stable_seed("a", 1) == ref


def test_corpus_is_deterministic():
    a = generate_corpus(3, 7, seed=4)
    b = generate_corpus(3, 7, seed=4)
    for x, y in zip(a, b):
        assert x.params == y.params
        for d1, d2 in zip(x.days, y.days):
            assert np.array_equal(d1.values, d2.values)


def test_seeds_differ():
    a = generate_corpus(3, 7, seed=4)[0].days[0].values
    b = generate_corpus(3, 7, seed=5)[0].days[0].values
    assert not np.array_equal(a, b)


def _params(**kw):
    base = dict(city_id="X", population=10**6, latitude=40.0, sleep_start=1380.0, sleep_stop=420.0,
                work_start=540.0, work_stop=1020.0, server_floor=0.2, noise_sigma=0.0,
                steepness=float("inf"))
    base.update(kw)
    return CityGenParams(**base)


def test_noiseless_step_levels():
    p = _params()
    mids = SegmentGrid().midpoints
    v = activity_curve(p, mids, 3)
    asleep = (mids < 420) | (mids > 1380)
    working = (mids > 540) & (mids < 1020)
    assert np.allclose(v[asleep], 0.2)
    assert np.allclose(v[working], 0.2 + 0.8 * 1.0)
    assert np.allclose(v[~asleep & ~working], 0.2 + 0.8 * 0.6)


def test_weekend_has_no_work_and_shifted_sleep():
    p = _params(weekend_shift=60.0)
    mids = SegmentGrid().midpoints
    v = activity_curve(p, mids, 6)
    assert v.max() == pytest.approx(0.2 + 0.8 * 0.6)
    assert v[SegmentGrid().segment_of(450) - 1] == pytest.approx(0.2)


def test_city_starts_on_monday_and_covers_days():
    c = generate_city(_params(), 14, seed=0)
    assert c.days[0].dow == 1 and len(c.days) == 14 and len(c.demand) == 14
    assert c.days[0].date == "2010-01-04"


def test_burst_noise_leaves_gaps_and_stays_in_range():
    c = generate_city(_params(noise_sigma=0.02), 28, seed=1, noise="burst")
    vals = np.concatenate([d.values for d in c.days])
    obs = vals[np.isfinite(vals)]
    assert np.isnan(vals).any() and obs.min() >= 0 and obs.max() <= 1


def test_populations_are_log_spaced():
    pops = [c.params.population for c in generate_corpus(5, 7, seed=0)]
    assert pops[0] == 300_000 and pops[-1] == 20_000_000
    assert np.allclose(np.diff(np.log(pops)), np.log(pops[1] / pops[0]), rtol=1e-4)


@pytest.mark.parametrize("kw", [dict(noise_sigma=-1), dict(server_floor=1.0), dict(steepness=0)])
def test_param_validation(kw):
    with pytest.raises(ValueError):
        _params(**kw)


def test_seed_changes_noise_but_not_clean_curves():
    p = _params(noise_sigma=0.05, steepness=0.1)
    a = generate_city(p, 7, seed=1)
    b = generate_city(p, 7, seed=2)
    assert np.array_equal(a.clean, b.clean)
    assert not np.array_equal(a.days[0].values, b.days[0].values)
