"""
Market and queue KPIs.
Rolling price instability (K12), price surge intensity (K13), waiting-time
statistics (K14), utilization and the Erlang-C waiting-time model proxy.
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import Field

from core.observability import observe
from core.schema import (
    HOUR,
    AnalysisWindow,
    FeedModel,
    KpiEngineError,
    KpiId,
    KpiValue,
    QueueRecord,
    RateSeries,
)

logger = logging.getLogger(__name__)

MODEL_PROXY = "MODEL-PROXY"
MMS_ASSUMPTIONS = [
    "Poisson arrivals",
    "exponential service times",
    "FIFO service",
    "infinite calling population",
    "identical parallel chargers",
]


class MarketQueueError(KpiEngineError):
    """Base class for market/queue KPI errors."""
    pass


class BadRates(MarketQueueError):
    """Service rate or charger count makes utilization meaningless."""
    pass


def _arrays(rates: RateSeries) -> Tuple[np.ndarray, np.ndarray]:
    return (
        np.array(rates.timestamps(), dtype=np.int64),
        np.array(rates.rates(), dtype=float),
    )


def _slice(times: np.ndarray, lo: int, hi: int) -> slice:
    """Index range of observations in [lo, hi)."""
    return slice(int(np.searchsorted(times, lo, side="left")), int(np.searchsorted(times, hi, side="left")))


# ============================================================================
# K12
# ============================================================================

def _cv(values: np.ndarray, n_min: int) -> Optional[float]:
    if values.size < max(n_min, 2):
        return None
    mean = float(values.mean())
    if mean == 0.0:
        return None
    if values.max() == values.min():
        return 0.0
    return float(values.std(ddof=1)) / mean


def price_instability(rates: RateSeries, t: int, w: int, n_min: int = 2) -> Optional[float]:
    """
    Coefficient of variation of the rates observed in [t, t + w).

    Uses the unbiased sample deviation. Undefined (None) with fewer than
    `n_min` observations or a zero mean.
    """
    if w <= 0:
        raise ValueError(f"PIV window must be positive, got {w}")
    times, values = _arrays(rates)
    return _cv(values[_slice(times, t, t + w)], n_min)


def price_instability_series(
    rates: RateSeries,
    window: AnalysisWindow,
    w: int,
    step: int,
    n_min: int = 2,
) -> List[Tuple[int, Optional[float]]]:
    """PIV evaluated at t0, t0 + step, ... up to t1."""
    if step <= 0:
        raise ValueError(f"PIV step must be positive, got {step}")
    if w <= 0:
        raise ValueError(f"PIV window must be positive, got {w}")
    times, values = _arrays(rates)
    return [
        (t, _cv(values[_slice(times, t, t + w)], n_min))
        for t in range(window.t0, window.t1, step)
    ]


@observe(kpi_id=KpiId.K12.value)
def price_instability_summary(series: Sequence[Tuple[int, Optional[float]]], w: int) -> KpiValue:
    """K12: median of the defined PIV values of a series."""
    defined = [v for _, v in series if v is not None]
    if not defined:
        return KpiValue.undefined(KpiId.K12.value, "insufficientObservations", unit="cv",
                                  windowS=w, evaluated=len(series))
    return KpiValue(
        kpi_id=KpiId.K12.value, raw=float(np.median(defined)), unit="cv",
        diagnostics={"windowS": w, "evaluated": len(series), "defined": len(defined),
                     "max": float(max(defined))},
    )


# ============================================================================
# K13
# ============================================================================

class SurgeReading(FeedModel):
    """Price surge intensity at one instant."""
    timestamp: int
    psi: Optional[float] = None
    surge: bool = False
    current_rate: Optional[float] = None
    reason: Optional[str] = None


def price_surge_intensity(
    rates: RateSeries,
    t: int,
    baseline_s: int,
    tau: float = 2.0,
    n_min: int = 2,
) -> SurgeReading:
    """
    Standardised deviation of the current rate from its trailing baseline.

    The current rate is the latest observation at or before t; the baseline is
    every observation in [t - baseline_s, t). A surge is PSI strictly above tau.
    """
    times, values = _arrays(rates)
    idx = int(np.searchsorted(times, t, side="right")) - 1
    if idx < 0:
        return SurgeReading(timestamp=t, reason="noCurrentRate")
    current = float(values[idx])

    baseline = values[_slice(times, t - baseline_s, t)]
    if baseline.size < max(n_min, 2):
        return SurgeReading(timestamp=t, current_rate=current, reason="insufficientBaseline")
    sigma = float(baseline.std(ddof=1))
    if sigma == 0.0 or baseline.max() == baseline.min():
        return SurgeReading(timestamp=t, current_rate=current, reason="flatBaseline")
    psi = (current - float(baseline.mean())) / sigma
    return SurgeReading(timestamp=t, psi=psi, surge=psi > tau, current_rate=current)


def price_surge_series(
    rates: RateSeries,
    window: AnalysisWindow,
    baseline_s: int,
    tau: float = 2.0,
    n_min: int = 2,
) -> List[SurgeReading]:
    """PSI at every rate observation inside the window."""
    return [
        price_surge_intensity(rates, t, baseline_s, tau, n_min)
        for t in rates.timestamps() if window.contains(t)
    ]


@observe(kpi_id=KpiId.K13.value)
def price_surge_summary(readings: Sequence[SurgeReading], tau: float) -> KpiValue:
    """
    K13: share of instants with a defined PSI that are flagged as surges.

    This reduces the surge series to one lower-is-better scalar for the score;
    instants with an undefined PSI are counted in `evaluated` but not in the share.
    """
    defined = [r for r in readings if r.psi is not None]
    if not defined:
        return KpiValue.undefined(KpiId.K13.value, "noDefinedPsi", tau=tau, evaluated=len(readings))
    surges = [r.timestamp for r in defined if r.surge]
    return KpiValue.fraction(
        KpiId.K13.value, len(surges) / len(defined),
        tau=tau, evaluated=len(readings), defined=len(defined),
        basis="surgeShareOfDefinedPsi",
        surgeTimestamps=surges, maxPsi=max(r.psi for r in defined),
    )


# ============================================================================
# K14
# ============================================================================

class WaitingStats(FeedModel):
    """Nearest-rank waiting statistics in seconds."""
    median_s: Optional[int] = None
    p95_s: Optional[int] = None
    join_coverage: float = 0.0
    waits: int = 0
    records: int = 0


def nearest_rank(sorted_values: Sequence[int], percent: int) -> int:
    """The ceil(percent * n / 100)-th order statistic."""
    n = len(sorted_values)
    rank = max(-(-percent * n // 100), 1)
    return sorted_values[rank - 1]


def waiting_stats(records: Sequence[QueueRecord]) -> WaitingStats:
    """
    Median and P95 of tPlug - tJoin over records with a join signal.

    Records without tJoin contribute no wait but lower the join coverage.
    """
    if not records:
        return WaitingStats()
    waits = sorted(r.t_plug - r.t_join for r in records if r.t_join is not None)
    coverage = len(waits) / len(records)
    if not waits:
        logger.warning("No queue record carries a join signal; waiting statistics undefined")
        return WaitingStats(join_coverage=coverage, records=len(records))
    return WaitingStats(
        median_s=nearest_rank(waits, 50),
        p95_s=nearest_rank(waits, 95),
        join_coverage=coverage,
        waits=len(waits),
        records=len(records),
    )


class UtilizationResult(FeedModel):
    rho: float
    saturated: bool


def utilization(arrival_rate: float, service_rate: float, chargers: int) -> UtilizationResult:
    """
    Offered load per charger, rho = lambda / (s * mu).

    Raises:
        BadRates: If mu <= 0, s < 1 or lambda < 0
    """
    if service_rate <= 0:
        raise BadRates(f"service rate must be positive, got {service_rate}")
    if chargers < 1:
        raise BadRates(f"charger count must be >= 1, got {chargers}")
    if arrival_rate < 0:
        raise BadRates(f"arrival rate must be >= 0, got {arrival_rate}")
    rho = arrival_rate / (chargers * service_rate)
    if rho >= 1.0:
        logger.warning(f"Utilization {rho:.3f} >= 1: queues will tend to grow at peak")
    return UtilizationResult(rho=rho, saturated=rho >= 1.0)


class ModelProxy(FeedModel):
    """Erlang-C M/M/s expected wait; times in hours."""
    wq_h: Optional[float] = None
    erlang_c: Optional[float] = None
    p0: Optional[float] = None
    rho: float
    unstable: bool = False
    label: str = MODEL_PROXY
    assumptions: List[str] = Field(default_factory=lambda: list(MMS_ASSUMPTIONS))


def mms_wait_proxy(arrival_rate: float, service_rate: float, chargers: int) -> ModelProxy:
    """
    Erlang-C expected queueing delay Wq = C(s, a) / (s*mu - lambda).

    Terms a^k/k! are built iteratively so large charger counts do not overflow.
    Unstable systems (rho >= 1) return an undefined wait with the flag set.
    """
    rho = utilization(arrival_rate, service_rate, chargers).rho
    if rho >= 1.0:
        return ModelProxy(rho=rho, unstable=True)

    load = arrival_rate / service_rate
    term, head = 1.0, 0.0
    for k in range(chargers):
        head += term
        term *= load / (k + 1)
    tail = term / (1.0 - rho)
    p0 = 1.0 / (head + tail)
    erlang_c = tail * p0
    wq = erlang_c / (chargers * service_rate - arrival_rate)
    return ModelProxy(wq_h=wq, erlang_c=erlang_c, p0=p0, rho=rho)


def arrival_rate_per_hour(records: Sequence[QueueRecord], window: AnalysisWindow) -> float:
    """Arrivals (join, else plug-in) inside the window per hour."""
    arrivals = sum(
        1 for r in records if window.contains(r.t_join if r.t_join is not None else r.t_plug)
    )
    return arrivals / (window.duration / HOUR)


@observe(kpi_id=KpiId.K14.value)
def queue_kpis(
    records: Sequence[QueueRecord],
    window: AnalysisWindow,
    service_rate: Optional[float] = None,
    chargers: Optional[int] = None,
) -> Dict[str, KpiValue]:
    """
    K14 (median wait) with P95, join coverage, utilization and the Erlang-C proxy.

    Utilization and the proxy need a service rate; without one they are
    undefined with reason `noServiceRate`.
    """
    stats = waiting_stats(records)
    values: Dict[str, KpiValue] = {}
    base = {"waits": stats.waits, "records": stats.records, "joinCoverage": stats.join_coverage}
    if stats.median_s is None:
        values[KpiId.K14.value] = KpiValue.undefined(KpiId.K14.value, "noJoinSignals", unit="s", **base)
        values[KpiId.WAIT_P95.value] = KpiValue.undefined(KpiId.WAIT_P95.value, "noJoinSignals", unit="s")
    else:
        values[KpiId.K14.value] = KpiValue(kpi_id=KpiId.K14.value, raw=float(stats.median_s), unit="s",
                                           diagnostics={**base, "p95S": stats.p95_s})
        values[KpiId.WAIT_P95.value] = KpiValue(kpi_id=KpiId.WAIT_P95.value, raw=float(stats.p95_s), unit="s")
    values[KpiId.JOIN_COVERAGE.value] = KpiValue.fraction(KpiId.JOIN_COVERAGE.value, stats.join_coverage)

    lam = arrival_rate_per_hour(records, window)
    if service_rate is None or chargers is None:
        values[KpiId.UTILIZATION.value] = KpiValue.undefined(
            KpiId.UTILIZATION.value, "noServiceRate", unit="ratio", arrivalRatePerH=lam)
        values[KpiId.MMS_WQ.value] = KpiValue.undefined(KpiId.MMS_WQ.value, "noServiceRate", unit="h")
        return values

    util = utilization(lam, service_rate, chargers)
    values[KpiId.UTILIZATION.value] = KpiValue(
        kpi_id=KpiId.UTILIZATION.value, raw=util.rho, unit="ratio",
        diagnostics={"arrivalRatePerH": lam, "serviceRatePerH": service_rate,
                     "chargers": chargers, "saturated": util.saturated},
    )
    proxy = mms_wait_proxy(lam, service_rate, chargers)
    proxy_diag = {"label": proxy.label, "assumptions": proxy.assumptions,
                  "erlangC": proxy.erlang_c, "p0": proxy.p0, "rho": proxy.rho}
    if proxy.unstable:
        values[KpiId.MMS_WQ.value] = KpiValue.undefined(KpiId.MMS_WQ.value, "unstable", unit="h", **proxy_diag)
    else:
        values[KpiId.MMS_WQ.value] = KpiValue(kpi_id=KpiId.MMS_WQ.value, raw=proxy.wq_h, unit="h",
                                              diagnostics=proxy_diag)
    return values
