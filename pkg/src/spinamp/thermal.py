"""Classical flip dynamics from a thermally imperfect start.

Under heavy dephasing every resonant flip becomes an independent Poisson
process with the same rate, so a trajectory is a continuous-time Markov
chain on lattice configurations.  It is simulated exactly with the
Gillespie algorithm: the flippable sites are kept in an array with a
position map, and after each flip only the four neighbours are re-examined
(a site's own flippability depends only on its neighbours and is unchanged
by its flip).

A trajectory *triggers* when the number of up spins other than the test
spin reaches ``theta * width * height``.  With the test spin up, the front
grown from it is *truncated* once its up cluster reaches the last row or
column; such trials are reported separately and left out of trigger rates.

Trial ``k`` of a run with seed ``s`` draws everything from
``default_rng(SeedSequence([s, k]))``.  Sweeps reuse those streams at every
``p``, so the initial grids are nested as ``p`` grows.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np
from scipy import constants
from scipy.stats import binomtest

from .errors import ConfigError
from .lattice import LatticeConfig

DEFAULT_THETA = 0.25
DEFAULT_T_MAX = 200.0
DEFAULT_SIZE = 50
MIN_SIZE = 8
MIN_TRIALS = 200


def boltzmann_up_fraction(freq: float, T: float) -> float:
    """Excited-state population ``1 / (1 + exp(h f / k_B T))`` of a two-level spin."""
    if not freq > 0 or not T > 0:
        raise ConfigError("frequency and temperature must be positive")
    x = constants.h * freq / (constants.k * T)
    return float(math.exp(-x) / (1.0 + math.exp(-x)))


@dataclass(frozen=True)
class ThermalSpec:
    width: int = DEFAULT_SIZE
    height: int = DEFAULT_SIZE
    p_up: float = 0.0
    test_up: bool = False
    t_max: float = DEFAULT_T_MAX
    rng_seed: int = 0
    theta: float = DEFAULT_THETA

    def __post_init__(self):
        for name in ("width", "height"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < MIN_SIZE:
                raise ConfigError(f"{name} must be an integer >= {MIN_SIZE}, got {v!r}")
        if not 0 <= self.p_up < 1:
            raise ConfigError(f"p_up must lie in [0, 1), got {self.p_up!r}")
        if not self.t_max > 0 or not math.isfinite(self.t_max):
            raise ConfigError(f"t_max must be positive and finite, got {self.t_max!r}")
        if not 0 < self.theta <= 1:
            raise ConfigError(f"theta must lie in (0, 1], got {self.theta!r}")
        if int(self.rng_seed) != self.rng_seed or not 0 <= self.rng_seed < 2 ** 64:
            raise ConfigError(f"rng_seed must be a 64-bit unsigned integer, got {self.rng_seed!r}")

    @property
    def trigger_count(self) -> float:
        return self.theta * self.width * self.height

    def replace(self, **kw) -> "ThermalSpec":
        fields = dict(self.__dict__)
        fields.update(kw)
        return ThermalSpec(**fields)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial)]))


def _sample_grid(spec: ThermalSpec, rng: np.random.Generator) -> np.ndarray:
    g = (rng.random((spec.height, spec.width)) < spec.p_up).astype(np.int8)
    g[0, 0] = 1 if spec.test_up else 0
    return g


def sample_initial(spec: ThermalSpec, rng: np.random.Generator) -> LatticeConfig:
    """Each ancilla up with probability ``p_up``; the test spin set by ``test_up``."""
    return LatticeConfig.from_grid(_sample_grid(spec, rng))


# -- Gillespie kernel ------------------------------------------------------------

@numba.njit(cache=True)
def _flippable(g, i, j):
    H, W = g.shape
    if i == 0 and j == 0:
        return False
    up = 0
    nb = 0
    if i > 0:
        nb += 1
        up += g[i - 1, j]
    if i < H - 1:
        nb += 1
        up += g[i + 1, j]
    if j > 0:
        nb += 1
        up += g[i, j - 1]
    if j < W - 1:
        nb += 1
        up += g[i, j + 1]
    # far corners (two neighbours) stay frozen, as in lattice.allowed_flips
    return nb > 2 and up == nb // 2


@numba.njit(cache=True)
def _front_touches_far_edge(g, stack, seen):
    """Does the up cluster holding the test spin reach the last row or column?"""
    H, W = g.shape
    if g[0, 0] == 0:
        return False
    seen[:] = False
    top = 0
    stack[top] = 0
    top += 1
    seen[0] = True
    while top > 0:
        top -= 1
        q = stack[top]
        i = q // W
        j = q % W
        if i == H - 1 or j == W - 1:
            return True
        for d in range(4):
            a = i
            b = j
            if d == 0:
                a = i - 1
            elif d == 1:
                a = i + 1
            elif d == 2:
                b = j - 1
            else:
                b = j + 1
            if a < 0 or b < 0 or a >= H or b >= W:
                continue
            r = a * W + b
            if g[a, b] == 1 and not seen[r]:
                seen[r] = True
                stack[top] = r
                top += 1
    return False


@numba.njit(cache=True, nogil=True)
def _gillespie(g, t_max, trigger_count, check_front, stop_on_trigger, record,
               check_rules, max_events, rng):
    H, W = g.shape
    n = H * W
    pos = -np.ones(n, np.int64)
    lst = np.empty(n, np.int64)
    k = 0
    for i in range(H):
        for j in range(W):
            if _flippable(g, i, j):
                pos[i * W + j] = k
                lst[k] = i * W + j
                k += 1
    up = 0
    for i in range(H):
        for j in range(W):
            if not (i == 0 and j == 0):
                up += g[i, j]

    cap = 1024 if record else 1
    times = np.empty(cap)
    counts = np.empty(cap, np.int64)
    times[0] = 0.0
    counts[0] = up
    m = 1
    stack = np.empty(n, np.int64)
    seen = np.zeros(n, np.bool_)

    t = 0.0
    events = 0
    triggered = up >= trigger_count
    trigger_time = 0.0 if triggered else -1.0
    truncated = check_front and _front_touches_far_edge(g, stack, seen)
    if truncated or (triggered and stop_on_trigger):
        return times[:m], counts[:m], events, triggered, truncated, t, trigger_time

    while k > 0 and events < max_events:
        dt = rng.exponential(1.0 / k)
        if t + dt > t_max:
            t = t_max
            break
        t += dt
        s = lst[int(rng.random() * k)]
        i = s // W
        j = s % W
        if check_rules and not _flippable(g, i, j):
            raise AssertionError("executed a flip the rules forbid")
        g[i, j] = 1 - g[i, j]
        went_up = g[i, j] == 1
        up += 1 if went_up else -1
        events += 1
        if record:
            if m == cap:
                cap *= 2
                nt = np.empty(cap)
                nc = np.empty(cap, np.int64)
                nt[:m] = times[:m]
                nc[:m] = counts[:m]
                times = nt
                counts = nc
            times[m] = t
            counts[m] = up
            m += 1
        for d in range(4):
            a = i
            b = j
            if d == 0:
                a = i - 1
            elif d == 1:
                a = i + 1
            elif d == 2:
                b = j - 1
            else:
                b = j + 1
            if a < 0 or b < 0 or a >= H or b >= W:
                continue
            q = a * W + b
            f = _flippable(g, a, b)
            if f and pos[q] < 0:
                pos[q] = k
                lst[k] = q
                k += 1
            elif not f and pos[q] >= 0:
                r = pos[q]
                last = lst[k - 1]
                lst[r] = last
                pos[last] = r
                pos[q] = -1
                k -= 1
        if check_front and went_up and _front_touches_far_edge(g, stack, seen):
            truncated = True
            break
        if not triggered and up >= trigger_count:
            triggered = True
            trigger_time = t
            if stop_on_trigger:
                break
    if k == 0 and not truncated and not (triggered and stop_on_trigger):
        t = t_max  # frozen: nothing more can happen
    return times[:m], counts[:m], events, triggered, truncated, t, trigger_time


@dataclass(frozen=True)
class TrajectoryResult:
    """Event times (starting at 0) and up counts excluding the test spin.

    ``t_end`` is where the simulation stopped: ``t_max``, the trigger time
    (when stopping on trigger) or the truncation time.
    """

    times: np.ndarray
    up_counts: np.ndarray
    triggered: bool
    truncated: bool
    n_events: int
    t_end: float
    trigger_time: float | None


def run_trajectory(spec: ThermalSpec, rng: np.random.Generator | None = None,
                   initial: LatticeConfig | None = None, *, record: bool = True,
                   stop_on_trigger: bool = True, check_rules: bool = False,
                   max_events: int | None = None) -> TrajectoryResult:
    """Simulate one trajectory.

    Without ``rng`` the stream of trial 0 for ``spec.rng_seed`` is used.  The
    initial grid is sampled from the same stream unless ``initial`` is given.
    """
    rng = trial_rng(spec.rng_seed, 0) if rng is None else rng
    if initial is None:
        g = _sample_grid(spec, rng)
    else:
        if (initial.width, initial.height) != (spec.width, spec.height):
            raise ConfigError("initial configuration does not match the grid size")
        g = initial.grid.astype(np.int8)
    res = _gillespie(g, float(spec.t_max), float(spec.trigger_count), bool(g[0, 0] == 1),
                     stop_on_trigger, record, check_rules,
                     np.iinfo(np.int64).max if max_events is None else int(max_events), rng)
    times, counts, events, triggered, truncated, t_end, t_trig = res
    return TrajectoryResult(times.copy(), counts.copy(), bool(triggered), bool(truncated),
                            int(events), float(t_end), None if t_trig < 0 else float(t_trig))


# -- sweeps -----------------------------------------------------------------------

@dataclass(frozen=True)
class SweepResult:
    """Trigger statistics per ``p``.

    Rates and Wilson 95% intervals use the untruncated trials only.
    """

    p_values: np.ndarray
    trials: int
    triggered: np.ndarray
    truncated: np.ndarray
    rates: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    test_up: bool
    spec: ThermalSpec
    trigger_times: tuple = ()

    @property
    def ci_halfwidth(self) -> np.ndarray:
        return (self.ci_high - self.ci_low) / 2

    def rows(self):
        for i, p in enumerate(self.p_values):
            yield (float(p), self.trials, int(self.triggered[i]), float(self.rates[i]),
                   float(self.ci_low[i]), float(self.ci_high[i]), int(self.truncated[i]))


def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return math.nan, math.nan
    ci = binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def _one_trial(spec: ThermalSpec, trial: int):
    r = run_trajectory(spec, trial_rng(spec.rng_seed, trial), record=False)
    return r.triggered, r.truncated, r.trigger_time


def _sweep(p_values, trials: int, template: ThermalSpec, test_up: bool,
           workers: int = 1) -> SweepResult:
    if isinstance(trials, bool) or int(trials) != trials or trials < MIN_TRIALS:
        raise ConfigError(f"trials must be an integer >= {MIN_TRIALS}, got {trials!r}")
    trials = int(trials)
    p = np.asarray(p_values, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ConfigError("p_values must be a non-empty 1D sequence")
    trig = np.zeros(p.size, np.int64)
    trunc = np.zeros(p.size, np.int64)
    rates, lo, hi = (np.empty(p.size) for _ in range(3))
    ttimes = []
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for a, pv in enumerate(p):
            spec = template.replace(p_up=float(pv), test_up=test_up)
            if pool is None:
                out = [_one_trial(spec, k) for k in range(trials)]
            else:  # map keeps trial order, so aggregation is deterministic
                out = list(pool.map(lambda k: _one_trial(spec, k), range(trials)))
            trig[a] = sum(1 for tr, tc, _ in out if tr and not tc)
            trunc[a] = sum(1 for _, tc, _ in out if tc)
            valid = trials - trunc[a]
            rates[a] = trig[a] / valid if valid else math.nan
            lo[a], hi[a] = wilson_interval(trig[a], valid)
            ttimes.append(np.array([tt for tr, tc, tt in out if tr and not tc]))
    finally:
        if pool is not None:
            pool.shutdown()
    return SweepResult(p, trials, trig, trunc, rates, lo, hi, test_up, template, tuple(ttimes))


def false_positive_sweep(p_values, trials: int, template: ThermalSpec | None = None,
                         workers: int = 1) -> SweepResult:
    """Trigger rate with the test spin down, one entry per ``p``."""
    return _sweep(p_values, trials, template or ThermalSpec(), False, workers)


def detection_sweep(p_values, trials: int, template: ThermalSpec | None = None,
                    workers: int = 1) -> SweepResult:
    """Trigger rate with the test spin up, one entry per ``p``."""
    return _sweep(p_values, trials, template or ThermalSpec(), True, workers)


def threshold_crossing(p_values, rates, level: float = 0.5) -> float | None:
    """First ``p`` where the rate reaches ``level``, linearly interpolated."""
    p = np.asarray(p_values, float)
    r = np.asarray(rates, float)
    for a in range(p.size):
        if r[a] >= level:
            if a == 0:
                return float(p[0])
            r0, r1 = r[a - 1], r[a]
            return float(p[a - 1] + (level - r0) * (p[a] - p[a - 1]) / (r1 - r0))
    return None
