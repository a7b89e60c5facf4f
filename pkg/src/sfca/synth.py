"""Synthetic city-year corpus with known activity windows.

Each city has an online-activity curve built from two logistic-edged
windows: an "awake" plateau between sleep stop and sleep start, and a
higher "working" plateau during work hours, lifted by an always-on server
floor. Weekends shift sleep later and drop work. The noise-free curve and
the true windows are returned alongside the noisy observations so they can
serve as ground truth.
"""

from __future__ import annotations

import datetime as dt
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .grid import MINUTES_PER_DAY, SegmentGrid
from .trajectory import ActivityOutcome, DailyTrace

AWAKE_SHARE = 0.6
WORK_SHARE = 0.4
FILTER_THRESHOLDS = (250_000, 500_000, 1_000_000, 2_500_000, 5_000_000)


def stable_seed(*parts) -> int:
    """64-bit seed from arbitrary parts, independent of Python's hash salt."""
    h = hashlib.blake2b("\x1f".join(map(str, parts)).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class CityGenParams:
    city_id: str
    population: int
    latitude: float
    sleep_start: float
    sleep_stop: float
    work_start: float
    work_stop: float
    server_floor: float = 0.3
    weekend_shift: float = 60.0
    noise_sigma: float = 0.03
    steepness: float = 0.1  # per minute; inf gives step edges
    respondents: int = 100
    demand_base_mw: float = 1000.0

    def __post_init__(self):
        ActivityOutcome("sleep", self.sleep_start, self.sleep_stop)
        ActivityOutcome("work", self.work_start, self.work_stop)
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be >= 0")
        if not 0 <= self.server_floor < 1:
            raise ValueError("server floor must lie in [0, 1)")
        if self.steepness <= 0:
            raise ValueError("steepness must be positive")
        if self.population < 1 or self.respondents < 1:
            raise ValueError("population and respondents must be positive")

    def outcomes(self) -> dict[str, ActivityOutcome]:
        return {
            "sleep": ActivityOutcome("sleep", self.sleep_start, self.sleep_stop,
                                     self.respondents, self.population),
            "work": ActivityOutcome("work", self.work_start, self.work_stop,
                                    self.respondents, self.population),
        }


def _edge(u, k, at_zero):
    """Logistic ``1 / (1 + exp(-k u))``; a Heaviside step when ``k`` is inf."""
    u = np.asarray(u, dtype=float)
    if np.isinf(k):
        return np.where(u > 0, 1.0, np.where(u < 0, 0.0, at_zero))
    return 0.5 * (1.0 + np.tanh(0.5 * k * u))


def activity_curve(params: CityGenParams, minutes, dow: int) -> np.ndarray:
    """Noise-free online fraction at the given minutes of a weekday (1 = Mon)."""
    t = np.asarray(minutes, dtype=float)
    k = params.steepness
    weekend = dow >= 6
    shift = params.weekend_shift if weekend else 0.0
    start = params.sleep_start + shift
    stop = params.sleep_stop + shift
    # time since waking, with the night split at its midpoint so both edges
    # are evaluated against their nearest occurrence
    awake_len = (start - stop) % MINUTES_PER_DAY
    since = (t - stop) % MINUTES_PER_DAY
    since = np.where(since < awake_len + (MINUTES_PER_DAY - awake_len) / 2, since, since - MINUTES_PER_DAY)
    awake = _edge(since, k, 0.0) * _edge(awake_len - since, k, 0.0)
    work = np.zeros_like(t)
    if not weekend:
        work = _edge(t - params.work_start, k, 1.0) * _edge(params.work_stop - t, k, 1.0)
    signal = AWAKE_SHARE * awake + WORK_SHARE * work
    return params.server_floor + (1.0 - params.server_floor) * signal


def hourly_demand_curve(params: CityGenParams, dow: int) -> np.ndarray:
    """Noise-free hourly demand (MW): base load plus the hour-averaged activity."""
    minutes = np.arange(MINUTES_PER_DAY) + 0.5
    act = activity_curve(params, minutes, dow).reshape(24, 60).mean(axis=1)
    return params.demand_base_mw * (0.6 + 0.8 * act)


@dataclass
class CityData:
    params: CityGenParams
    year: int
    days: list[DailyTrace]
    demand: list[tuple[str, int, np.ndarray]]  # (date, dow, 24 hourly MW)
    clean: np.ndarray  # 7 x S noise-free curves
    outcomes: dict[str, ActivityOutcome] = field(default_factory=dict)


def generate_city(
    params: CityGenParams,
    n_days: int,
    seed: int,
    year: int = 2010,
    grid: SegmentGrid = SegmentGrid(),
    noise: str = "gaussian",
) -> CityData:
    """Simulate ``n_days`` consecutive days of one city-year.

    ``noise="burst"`` additionally drops short runs of segments (left
    missing) and adds occasional spikes, to exercise the robust smoother.
    """
    if n_days < 7:
        raise ValueError("need at least 7 days to cover every weekday")
    if noise not in ("gaussian", "burst"):
        raise ValueError(f"unknown noise mode {noise!r}")
    rng = np.random.default_rng(seed)
    first = dt.date(year, 1, 1)
    # start on the first Monday so every weekday is covered evenly
    first += dt.timedelta(days=(7 - first.weekday()) % 7)
    mids = grid.midpoints
    clean = np.vstack([activity_curve(params, mids, d) for d in range(1, 8)])
    days, demand = [], []
    for i in range(n_days):
        date = first + dt.timedelta(days=i)
        dow = date.isoweekday()
        vals = clean[dow - 1] + params.noise_sigma * rng.standard_normal(mids.size)
        if noise == "burst":
            if rng.random() < 0.3:
                s0 = rng.integers(0, mids.size - 4)
                vals[s0 : s0 + rng.integers(1, 5)] = np.nan
            spikes = rng.random(mids.size) < 0.02
            vals[spikes] += rng.choice([-0.3, 0.3], size=spikes.sum())
        vals = np.clip(vals, 0.0, 1.0)
        days.append(DailyTrace(params.city_id, vals, dow, date.isoformat(), year))
        mw = hourly_demand_curve(params, dow)
        mw = mw * (1.0 + params.noise_sigma * rng.standard_normal(24))
        demand.append((date.isoformat(), dow, mw))
    return CityData(params, year, days, demand, clean, params.outcomes())


def sample_city_params(
    i: int,
    n_cities: int,
    rng: np.random.Generator,
    noise_sigma: float = 0.03,
    steepness: float = 0.1,
) -> CityGenParams:
    """Draw plausible windows; populations are log-spaced from 300k to 20M."""
    frac = i / max(n_cities - 1, 1)
    population = int(round(np.exp(np.log(3.0e5) + frac * (np.log(2.0e7) - np.log(3.0e5)))))
    sleep_start = float(rng.uniform(21.75, 23.75) * 60)
    sleep_stop = float(rng.uniform(5.75, 7.5) * 60)
    work_start = float(sleep_stop + rng.uniform(75, 150))
    work_stop = float(work_start + rng.uniform(7.5, 9.0) * 60)
    return CityGenParams(
        city_id=f"C{i + 1:03d}",
        population=population,
        latitude=float(rng.uniform(25.0, 48.0)),
        sleep_start=round(sleep_start, 1),
        sleep_stop=round(sleep_stop, 1),
        work_start=round(work_start, 1),
        work_stop=round(work_stop, 1),
        server_floor=float(rng.uniform(0.15, 0.6)),
        weekend_shift=float(rng.uniform(30, 90)),
        noise_sigma=noise_sigma,
        steepness=steepness,
        respondents=int(20 + population ** 0.5 / 10 + rng.integers(0, 40)),
        demand_base_mw=float(rng.uniform(500, 5000)),
    )


def generate_corpus(
    n_cities: int = 60,
    n_days: int = 28,
    seed: int = 0,
    noise_sigma: float = 0.03,
    steepness: float = 0.1,
    years: tuple[int, ...] = (2010,),
    grid: SegmentGrid = SegmentGrid(),
    noise: str = "gaussian",
) -> list[CityData]:
    """A seeded corpus of ``n_cities`` x ``len(years)`` city-years."""
    rng = np.random.default_rng(stable_seed("corpus", seed))
    out = []
    for i in range(n_cities):
        params = sample_city_params(i, n_cities, rng, noise_sigma, steepness)
        for year in years:
            out.append(
                generate_city(params, n_days, stable_seed(seed, params.city_id, year), year, grid, noise)
            )
    return out
