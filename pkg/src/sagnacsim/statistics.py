"""Photon-counting statistics for a pulsed pair source with threshold detectors.

Pair numbers follow thermal statistics per Schmidt mode; ``K`` equal modes
convolve into a negative binomial.  Each photon of a pair is lost
independently, detectors click on one or more photons, and dark counts are
per-pulse probabilities ``dark_rate / rep_rate``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .errors import DomainError, StatisticsError

DEFAULT_REP_RATE = 76e6  # Hz
TAIL_MASS = 1e-12
G2_CHUNK = 1 << 20
LINEAR_RANGE_DEADTIME_LIMIT = 0.05


def _check_unit(name, x):
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {x}")


@dataclass(frozen=True)
class SourceOperatingPoint:
    mean_pairs_per_pulse: float
    rep_rate: float = DEFAULT_REP_RATE
    schmidt_modes: float = 1.0
    eta_signal: float = 1.0
    eta_idler: float = 1.0
    dark_rate_signal: float = 0.0
    dark_rate_idler: float = 0.0

    def __post_init__(self):
        if not (self.mean_pairs_per_pulse >= 0 and math.isfinite(self.mean_pairs_per_pulse)):
            raise DomainError("mean pair number must be finite and >= 0")
        if not self.rep_rate > 0:
            raise DomainError("rep_rate must be positive")
        if not self.schmidt_modes >= 1:
            raise DomainError("schmidt_modes must be >= 1")
        _check_unit("eta_signal", self.eta_signal)
        _check_unit("eta_idler", self.eta_idler)
        if self.dark_rate_signal < 0 or self.dark_rate_idler < 0:
            raise DomainError("dark rates must be >= 0")
        for rate in (self.dark_rate_signal, self.dark_rate_idler):
            if rate > self.rep_rate:
                raise DomainError("dark rate cannot exceed one click per pulse")

    @property
    def dark_probability_signal(self) -> float:
        return self.dark_rate_signal / self.rep_rate

    @property
    def dark_probability_idler(self) -> float:
        return self.dark_rate_idler / self.rep_rate


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 1.0  # folded into eta by the caller
    dead_time: float = 0.0  # ns, nonparalyzable
    latching_threshold: Optional[float] = None  # counts/s

    def __post_init__(self):
        _check_unit("efficiency", self.efficiency)
        if not self.dead_time >= 0:
            raise DomainError("dead_time must be >= 0")
        if self.latching_threshold is not None and not self.latching_threshold > 0:
            raise DomainError("latching threshold must be positive")

    def observed(self, rate: float) -> float:
        if self.latching_threshold is not None and rate > self.latching_threshold:
            return 0.0
        return rate / (1.0 + rate * self.dead_time * 1e-9)


@dataclass(frozen=True)
class RateRecord:
    pump_power: float  # mW
    singles_signal: float
    singles_idler: float
    coincidences: float

    def __post_init__(self):
        values = (self.singles_signal, self.singles_idler, self.coincidences)
        if min(values) < 0:
            raise DomainError("rates must be >= 0")
        # small slack for rounding in round-tripped data
        if self.coincidences > min(self.singles_signal, self.singles_idler) * (1 + 1e-12) + 1e-12:
            raise DomainError("coincidences exceed singles")


@dataclass(frozen=True)
class LossBudget:
    components: Tuple[Tuple[str, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        comps = tuple((str(label), float(t)) for label, t in self.components)
        for label, t in comps:
            _check_unit(f"transmission of {label!r}", t)
        object.__setattr__(self, "components", comps)


SIGNAL_BUDGET = LossBudget((
    ("waveguide output coupling", 0.85),
    ("fiber coupling", 0.66),
    ("filter", 0.95),
    ("detector", 0.90),
))
IDLER_BUDGET = LossBudget((
    ("waveguide output coupling", 0.79),
    ("fiber coupling", 0.84),
    ("filter", 0.95),
    ("detector", 0.90),
))


def pair_number_distribution(mu: float, K: float = 1.0, tail: float = TAIL_MASS) -> np.ndarray:
    """``P(n)`` for ``n = 0..n_max`` with the neglected tail below ``tail``."""
    if not mu >= 0:
        raise DomainError("mu must be >= 0")
    if not K >= 1:
        raise DomainError("K must be >= 1")
    if mu == 0:
        return np.array([1.0])
    p = 1.0 / (1.0 + mu / K)
    dist = stats.nbinom(K, p)
    n_max = int(dist.isf(tail)) + 1
    while dist.sf(n_max) > tail:
        n_max += 1
    return dist.pmf(np.arange(n_max + 1))


def _click_probabilities(op: SourceOperatingPoint):
    """Per-pulse (signal click, idler click, coincidence) probabilities."""
    pn = pair_number_distribution(op.mean_pairs_per_pulse, op.schmidt_modes)
    n = np.arange(pn.size)
    ls, li = 1.0 - op.eta_signal, 1.0 - op.eta_idler
    qs, qi = 1.0 - op.dark_probability_signal, 1.0 - op.dark_probability_idler
    no_s = qs * ls**n
    no_i = qi * li**n
    none = qs * qi * (ls * li) ** n
    p_s = float(pn @ (1.0 - no_s))
    p_i = float(pn @ (1.0 - no_i))
    p_c = float(pn @ (1.0 - no_s - no_i + none))
    return p_s, p_i, p_c


def expected_rates(op: SourceOperatingPoint, det: DetectorModel = DetectorModel(),
                   pump_power: float = float("nan"), det_idler: Optional[DetectorModel] = None) -> RateRecord:
    """Expected singles and coincidence rates.

    Dead time scales the coincidence rate by the product of the two
    detectors' live fractions.
    """
    det_idler = det_idler or det
    p_s, p_i, p_c = _click_probabilities(op)
    s, i, c = op.rep_rate * p_s, op.rep_rate * p_i, op.rep_rate * p_c
    obs_s, obs_i = det.observed(s), det_idler.observed(i)
    live_s = obs_s / s if s > 0 else 1.0
    live_i = obs_i / i if i > 0 else 1.0
    return RateRecord(pump_power, obs_s, obs_i, c * live_s * live_i)


def klyshko(record: RateRecord) -> Tuple[float, float]:
    """Heralding efficiencies ``(C/S_i, C/S_s)``."""
    if record.singles_signal <= 0 or record.singles_idler <= 0:
        raise StatisticsError("Klyshko efficiency needs non-zero singles")
    return record.coincidences / record.singles_idler, record.coincidences / record.singles_signal


def heralded_g2_analytic(mu: float, eta_h: float) -> float:
    """Low-gain heralded autocorrelation ``2 (2 - eta_h) mu`` (valid for mu <= 0.05)."""
    if mu < 0:
        raise DomainError("mu must be >= 0")
    _check_unit("eta_h", eta_h)
    return 2.0 * (2.0 - eta_h) * mu


def _g2_chunk(op: SourceOperatingPoint, size: int, seed_seq: np.random.SeedSequence,
              max_pairs: Optional[int]) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    K = op.schmidt_modes
    mu = op.mean_pairs_per_pulse
    n = rng.negative_binomial(K, 1.0 / (1.0 + mu / K), size=size) if mu > 0 else np.zeros(size, np.int64)
    if max_pairs is not None:
        n = np.minimum(n, max_pairs)
    herald = rng.binomial(n, op.eta_signal) > 0
    if op.dark_probability_signal > 0:
        herald |= rng.random(size) < op.dark_probability_signal
    # idler photons landing on each splitter output
    m = rng.binomial(n[herald], op.eta_idler)
    a = rng.binomial(m, 0.5)
    b = m - a
    click_a = a > 0
    click_b = b > 0
    pd = op.dark_probability_idler / 2.0
    if pd > 0:
        click_a |= rng.random(m.size) < pd
        click_b |= rng.random(m.size) < pd
    only_a = np.count_nonzero(click_a & ~click_b)
    only_b = np.count_nonzero(click_b & ~click_a)
    both = np.count_nonzero(click_a & click_b)
    heralds = int(m.size)
    return np.array([heralds - only_a - only_b - both, only_a, only_b, both], dtype=np.int64)


def heralded_g2_counts(op: SourceOperatingPoint, n_pulses: int, seed: int, workers: int = 1,
                       max_pairs: Optional[int] = None) -> np.ndarray:
    """Herald-conditioned outcome counts ``[none, a only, b only, a and b]``.

    The pulses are cut into fixed chunks, each with its own spawned
    substream, so the totals do not depend on ``workers``.
    """
    if n_pulses <= 0:
        raise DomainError("n_pulses must be positive")
    sizes = [G2_CHUNK] * (n_pulses // G2_CHUNK)
    if n_pulses % G2_CHUNK:
        sizes.append(n_pulses % G2_CHUNK)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = list(zip(sizes, seeds))
    if workers <= 1:
        parts = [_g2_chunk(op, s, q, max_pairs) for s, q in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: _g2_chunk(op, job[0], job[1], max_pairs), jobs))
    return np.sum(parts, axis=0)


def heralded_g2_monte_carlo(op: SourceOperatingPoint, n_pulses: int, seed: int, workers: int = 1,
                            max_pairs: Optional[int] = None) -> Tuple[float, float]:
    """Heralded ``g2(0)`` from a 50:50 split of the idler, with standard error.

    ``g2 = N_h N_hab / (N_ha N_hb)``.  The error is the delta-method
    propagation of the multinomial herald-conditioned outcome counts; with
    no double clicks it is the value a single double click would give.
    """
    x = heralded_g2_counts(op, n_pulses, seed, workers, max_pairs).astype(float)
    n_h = x.sum()
    n_ha, n_hb, n_hab = x[1] + x[3], x[2] + x[3], x[3]
    if n_h < 100:
        raise StatisticsError(f"only {int(n_h)} heralds; need at least 100")
    if n_ha == 0 or n_hb == 0:
        raise StatisticsError("no herald-conditioned idler clicks")
    g2 = n_h * n_hab / (n_ha * n_hb)
    if n_hab == 0:
        # no double clicks: report the resolution of a single count
        return 0.0, float(n_h / (n_ha * n_hb))
    # d log g2 / d x_j
    grad = np.array([1.0 / n_h,
                     1.0 / n_h - 1.0 / n_ha,
                     1.0 / n_h - 1.0 / n_hb,
                     1.0 / n_h + 1.0 / n_hab - 1.0 / n_ha - 1.0 / n_hb])
    rel_var = float(np.sum(grad**2 * x))
    return float(g2), float(g2 * math.sqrt(rel_var))


def accidental_coincidence_rate(op: SourceOperatingPoint, det: DetectorModel = DetectorModel()) -> float:
    """Coincidences expected from uncorrelated clicks within one pulse."""
    p_s, p_i, _ = _click_probabilities(op)
    return op.rep_rate * p_s * p_i


def generated_pair_rate(record: RateRecord) -> float:
    """Loss-corrected pair rate ``C / (eta_s eta_i) = S_s S_i / C``."""
    if record.coincidences <= 0:
        raise StatisticsError("no coincidences")
    return record.singles_signal * record.singles_idler / record.coincidences


def linear_range(records: Sequence[RateRecord], det: DetectorModel,
                 limit: float = LINEAR_RANGE_DEADTIME_LIMIT) -> List[RateRecord]:
    """Records whose dead-time correction stays within ``limit`` on both arms."""
    tau = det.dead_time * 1e-9
    keep = []
    for rec in records:
        # observed r_o relates to true r by r = r_o / (1 - r_o tau)
        worst = max(rec.singles_signal, rec.singles_idler) * tau
        if worst < 1.0 and worst / (1.0 - worst) <= limit:
            keep.append(rec)
    return keep


def brightness_fit(records: Sequence[RateRecord], det: Optional[DetectorModel] = None) -> Tuple[float, float]:
    """Least-squares slope through the origin of generated pairs/s vs pump power.

    With a detector model, records outside the linear range are dropped
    first.  Returns ``(slope, standard error)`` in pairs/(s mW).
    """
    if det is not None:
        records = linear_range(records, det)
    if len(records) < 3:
        raise StatisticsError("brightness fit needs at least three records")
    x = np.array([r.pump_power for r in records], dtype=float)
    if np.unique(x).size < 2 or not np.all(np.isfinite(x)) or not np.any(x != 0):
        raise StatisticsError("pump powers are degenerate")
    y = np.array([generated_pair_rate(r) for r in records])
    sxx = float(x @ x)
    slope = float(x @ y) / sxx
    resid = y - slope * x
    dof = x.size - 1
    err = math.sqrt(float(resid @ resid) / dof / sxx)
    return slope, err


def loss_budget_total(budget: LossBudget) -> float:
    return math.prod(t for _, t in budget.components)


def brightness_per_mode(brightness: float, schmidt_spectrum) -> float:
    """Brightness divided by the Schmidt number ``1 / sum p_k**2``."""
    p = np.asarray(schmidt_spectrum.probabilities, dtype=float)
    if p.size == 0 or abs(p.sum() - 1.0) > 1e-9 or np.any(p < 0):
        raise DomainError("probabilities must be a normalised distribution")
    return brightness * float(np.sum(p**2))


def operating_point_for_rate(coincidence_rate: float, eta_signal: float, eta_idler: float,
                             rep_rate: float = DEFAULT_REP_RATE, **kw) -> SourceOperatingPoint:
    """Operating point whose expected coincidence rate matches ``coincidence_rate``."""
    from scipy.optimize import brentq

    def excess(mu):
        op = SourceOperatingPoint(mu, rep_rate, eta_signal=eta_signal, eta_idler=eta_idler, **kw)
        return expected_rates(op).coincidences - coincidence_rate

    hi = 1.0
    if excess(hi) < 0:
        raise DomainError("coincidence rate not reachable at these efficiencies")
    mu = brentq(excess, 0.0, hi, xtol=1e-15, rtol=1e-13)
    return SourceOperatingPoint(mu, rep_rate, eta_signal=eta_signal, eta_idler=eta_idler, **kw)
