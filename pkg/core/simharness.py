"""
Simulation harness.
Generates synthetic feed bundles whose KPIs are known by construction, and a
discrete-event M/M/s simulator used as the oracle for the Erlang-C proxy.

Randomness comes from numpy's PCG64 bit generator seeded with the scenario's
64-bit seed; draws happen in a fixed order so a seed reproduces a bundle exactly.
"""
import heapq
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import Field, ValidationError

from core import intervals
from core.ingest import FeedBundle
from core.kpi_market_queue import nearest_rank
from core.schema import (
    DAY,
    DEFAULT_RENEWABLES,
    HOUR,
    AnalysisWindow,
    ComponentStatus,
    Connector,
    Coordinates,
    CyberTelemetry,
    DemandPoint,
    EnergySample,
    EnergySourceRatio,
    FeedModel,
    Interruption,
    Interval,
    KpiEngineError,
    KpiId,
    OfflineSession,
    PowerSample,
    QueueRecord,
    RateObservation,
    RateSeries,
    RefillPoint,
    SiteInventory,
    Station,
    StatusEvent,
    StressorLog,
    Thresholds,
)

logger = logging.getLogger(__name__)

DEFAULT_START = 1735689600  # 2025-01-01T00:00:00Z
FAR_OFFSET_DEG = 20.0


class BadScenario(KpiEngineError):
    """Scenario parameters are inconsistent or do not fit the window."""
    pass


class ScenarioSpec(FeedModel):
    """Scenario description; every stressor defaults to absent."""
    seed: int
    start: int = DEFAULT_START
    hours: int = 100
    site_id: str = "SIM-SITE"
    lat: float = 52.0
    lon: float = 5.0
    stations: int = 1
    points_per_station: int = 2
    connectors_per_point: int = 1
    connector_powers_kw: List[float] = Field(default_factory=lambda: [1000.0])
    connector_type: str = "MCS"
    energy_mix: Dict[str, float] = Field(default_factory=lambda: {"solar": 0.6, "wind": 0.3, "gas": 0.1})
    payment_methods: List[str] = Field(default_factory=lambda: ["app", "card", "rfid"])
    backup_power: bool = True
    # faults and interruptions
    faults_per_connector: int = 0
    fault_duration_s: Optional[int] = None
    fault_duration_range_s: Tuple[int, int] = (600, 4 * HOUR)
    min_restore_fraction: float = 0.5
    repair_start_fraction: float = 0.25
    # grid
    grid_outages: int = 0
    grid_outage_duration_range_s: Tuple[int, int] = (900, 2 * HOUR)
    power_sample_step_s: int = 300
    backup_kw: float = 600.0
    backup_shortfall_probability: float = 0.0
    # comms
    comms_outages: int = 0
    comms_outage_duration_range_s: Tuple[int, int] = (300, HOUR)
    offline_sessions: int = 0
    offline_settle_probability: float = 0.9
    # prices
    price_profile: List[float] = Field(default_factory=lambda: [0.45])
    surge_count: int = 0
    surge_multiplier: float = 2.0
    # queue
    arrival_rate_per_h: float = 0.0
    service_rate_per_h: float = 1.0
    join_signal_probability: float = 1.0
    # cyber
    heartbeats_expected: int = 0
    heartbeat_miss_probability: float = 0.0
    pings_expected: int = 0
    ping_miss_probability: float = 0.0
    transactions: int = 0
    timeout_probability: float = 0.0
    tls_attempts: int = 0
    tls_failure_probability: float = 0.0
    cert_devices: int = 0
    cert_delay_range_s: Tuple[int, int] = (0, 5 * DAY)
    clock_devices: int = 0
    clock_error_scale_s: float = 1.0
    # demand and energy
    demand_points: int = 0
    demand_covered_probability: float = 0.5
    energy_samples: bool = False

    @property
    def window(self) -> AnalysisWindow:
        return AnalysisWindow(t0=self.start, t1=self.start + self.hours * HOUR)


class SimulatedValue(FeedModel):
    mean: float
    standard_error: float


class GroundTruth(FeedModel):
    """Expected KPI values for a generated scenario."""
    window: AnalysisWindow
    exact: Dict[str, Optional[float]] = Field(default_factory=dict)
    simulated: Dict[str, SimulatedValue] = Field(default_factory=dict)
    fault_rate: float = 0.0
    surge_timestamps: List[int] = Field(default_factory=list)


# ============================================================================
# M/M/s simulator
# ============================================================================

def fifo_starts(arrivals: np.ndarray, services: np.ndarray, servers: int) -> np.ndarray:
    """Service start times of a FIFO queue with `servers` identical servers."""
    free = [0.0] * servers
    heapq.heapify(free)
    starts = np.empty_like(arrivals)
    for i in range(arrivals.size):
        earliest = heapq.heappop(free)
        start = arrivals[i] if arrivals[i] > earliest else earliest
        starts[i] = start
        heapq.heappush(free, start + services[i])
    return starts


class SimulationResult(FeedModel):
    """Empirical M/M/s statistics; times in hours."""
    wq_mean: float
    wq_standard_error: float
    rho_empirical: float
    rho_nominal: float
    arrivals: int
    unstable: bool


def mms_simulator(
    arrival_rate: float,
    service_rate: float,
    servers: int,
    horizon: int,
    seed: int,
    warmup_fraction: float = 0.1,
    batches: int = 20,
) -> SimulationResult:
    """
    Discrete-event FIFO M/M/s simulation over `horizon` arrivals.

    The mean wait is reported with a batch-means standard error after
    discarding the warm-up share. Unstable systems (rho >= 1) still run.

    Raises:
        BadScenario: If rates are not positive, servers < 1 or horizon too short
    """
    if arrival_rate <= 0 or service_rate <= 0:
        raise BadScenario(f"rates must be positive, got lambda={arrival_rate}, mu={service_rate}")
    if servers < 1:
        raise BadScenario(f"need at least one server, got {servers}")
    kept = horizon - int(horizon * warmup_fraction)
    if kept < 2 * batches:
        raise BadScenario(f"horizon {horizon} too short for {batches} batches")

    rho = arrival_rate / (servers * service_rate)
    if rho >= 1.0:
        logger.warning(f"Simulating an unstable system (rho={rho:.3f})")

    rng = np.random.Generator(np.random.PCG64(seed))
    arrivals = np.cumsum(rng.exponential(1.0 / arrival_rate, size=horizon))
    services = rng.exponential(1.0 / service_rate, size=horizon)
    waits = fifo_starts(arrivals, services, servers) - arrivals

    steady = waits[horizon - kept:]
    usable = kept - kept % batches
    batch_means = steady[:usable].reshape(batches, -1).mean(axis=1)
    se = float(batch_means.std(ddof=1) / np.sqrt(batches))
    rho_emp = float(services.sum() / (servers * arrivals[-1]))
    return SimulationResult(
        wq_mean=float(steady.mean()),
        wq_standard_error=se,
        rho_empirical=rho_emp,
        rho_nominal=rho,
        arrivals=horizon,
        unstable=rho >= 1.0,
    )


# ============================================================================
# Scenario generation
# ============================================================================

def _check(spec: ScenarioSpec) -> None:
    probabilities = {
        "minRestoreFraction": spec.min_restore_fraction,
        "repairStartFraction": spec.repair_start_fraction,
        "backupShortfallProbability": spec.backup_shortfall_probability,
        "offlineSettleProbability": spec.offline_settle_probability,
        "joinSignalProbability": spec.join_signal_probability,
        "heartbeatMissProbability": spec.heartbeat_miss_probability,
        "pingMissProbability": spec.ping_miss_probability,
        "timeoutProbability": spec.timeout_probability,
        "tlsFailureProbability": spec.tls_failure_probability,
        "demandCoveredProbability": spec.demand_covered_probability,
    }
    for name, p in probabilities.items():
        if not 0.0 <= p <= 1.0:
            raise BadScenario(f"{name}={p} outside [0, 1]")
    counts = {
        "hours": spec.hours, "stations": spec.stations, "pointsPerStation": spec.points_per_station,
        "connectorsPerPoint": spec.connectors_per_point,
    }
    for name, n in counts.items():
        if n < 1:
            raise BadScenario(f"{name} must be >= 1, got {n}")
    if not spec.connector_powers_kw or not spec.price_profile:
        raise BadScenario("connectorPowersKw and priceProfile must be non-empty")
    if spec.surge_count and len(set(spec.price_profile)) < 2:
        raise BadScenario("surges need a varying price profile (a flat baseline has no spread)")
    if spec.surge_count > spec.hours:
        raise BadScenario(f"surgeCount {spec.surge_count} exceeds the {spec.hours} hourly observations")
    if spec.arrival_rate_per_h < 0 or spec.service_rate_per_h <= 0:
        raise BadScenario("arrival rate must be >= 0 and service rate > 0")
    if spec.power_sample_step_s < 1:
        raise BadScenario("powerSampleStepS must be >= 1")


def _slotted(
    rng: np.random.Generator,
    window: AnalysisWindow,
    count: int,
    span_range: Tuple[int, int],
    fixed: Optional[int] = None,
) -> List[Tuple[int, int]]:
    """`count` disjoint, non-touching intervals; each sits in the first 3/4 of its own slot."""
    if count == 0:
        return []
    slot = window.duration // count
    lo, hi = span_range
    hi = min(hi, slot // 2)
    if fixed is not None:
        lo = hi = fixed
    if slot < 8 or lo < 1 or lo > hi or hi > slot // 2:
        raise BadScenario(f"{count} interval(s) of {span_range} s do not fit a {window.duration} s window")
    result = []
    for j in range(count):
        begin = window.t0 + j * slot
        length = int(rng.integers(lo, hi + 1))
        offset = int(rng.integers(0, slot // 4 + 1))
        result.append((begin + offset, begin + offset + length))
    return result


def _inventory(spec: ScenarioSpec) -> SiteInventory:
    stations = []
    n = 0
    for i in range(spec.stations):
        station_id = f"{spec.site_id}-S{i + 1}"
        points = []
        for j in range(spec.points_per_station):
            point_id = f"{station_id}-P{j + 1}"
            connectors = []
            for k in range(spec.connectors_per_point):
                power = spec.connector_powers_kw[n % len(spec.connector_powers_kw)]
                n += 1
                connectors.append(Connector(
                    connector_id=f"{point_id}-C{k + 1}", connector_type=spec.connector_type,
                    max_power_kw=power, refill_point_id=point_id,
                ))
            points.append(RefillPoint(refill_point_id=point_id, station_id=station_id, connectors=connectors))
        stations.append(Station(station_id=station_id, site_id=spec.site_id, refill_points=points))
    return SiteInventory(
        site_id=spec.site_id,
        coordinates=Coordinates(lat=spec.lat, lon=spec.lon),
        stations=stations,
        payment_methods=list(spec.payment_methods),
        energy_mix=[EnergySourceRatio(source=s, ratio=r) for s, r in spec.energy_mix.items()],
        backup_power=spec.backup_power,
    )


def _rates(rng: np.random.Generator, spec: ScenarioSpec, window: AnalysisWindow, baseline_s: int):
    first = window.t0 - baseline_s
    stamps = list(range(first, window.t1, HOUR))
    profile = spec.price_profile
    values = {t: profile[((t - first) // HOUR) % len(profile)] for t in stamps}
    in_window = [t for t in stamps if window.contains(t)]
    surges: List[int] = []
    if spec.surge_count:
        picks = rng.choice(len(in_window), size=spec.surge_count, replace=False)
        surges = sorted(in_window[int(i)] for i in picks)
        for t in surges:
            values[t] = values[t] * spec.surge_multiplier
    series = RateSeries(observations=[RateObservation(timestamp=t, rate=values[t]) for t in stamps])
    return series, surges


def generate_scenario(spec: ScenarioSpec, thresholds: Optional[Thresholds] = None) -> Tuple[FeedBundle, GroundTruth]:
    """
    Build a deterministic FeedBundle and its ground truth from `spec`.

    Ground truth is exact for quantities fixed by construction (structure,
    injected downtime, drawn counters) and tallied from the generated records
    otherwise. K12 is given only for a flat price profile (PIV 0).

    Raises:
        BadScenario: On inconsistent parameters
    """
    _check(spec)
    th = thresholds or Thresholds()
    window = spec.window
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    inventory = _inventory(spec)
    connectors = inventory.connectors()
    exact: Dict[str, Optional[float]] = {}

    # structure
    n_rp = len(inventory.refill_points())
    powers = [c.max_power_kw for c in connectors]
    exact[KpiId.K1.value] = min(n_rp / th.n_target, 1.0)
    exact[KpiId.K2.value] = sum(1 for p in powers if p >= th.pthr_kw) / len(powers)
    exact[KpiId.K3.value] = min(sum(r for s, r in spec.energy_mix.items() if s.lower() in DEFAULT_RENEWABLES), 1.0)
    exact[KpiId.K4.value] = 1.0 if len(set(spec.payment_methods)) > 1 else 0.0

    # faults and status
    events: List[StatusEvent] = []
    faults: Dict[str, List[Tuple[int, int]]] = {}
    interruptions: List[Interruption] = []
    for connector in connectors:
        spans = _slotted(rng, window, spec.faults_per_connector, spec.fault_duration_range_s, spec.fault_duration_s)
        faults[connector.connector_id] = spans
        events.append(StatusEvent(component_id=connector.connector_id, timestamp=window.t0,
                                  status=ComponentStatus.AVAILABLE))
        for start, end in spans:
            events.append(StatusEvent(component_id=connector.connector_id, timestamp=start,
                                      status=ComponentStatus.FAULT, reason="injected"))
            events.append(StatusEvent(component_id=connector.connector_id, timestamp=end,
                                      status=ComponentStatus.AVAILABLE))
            length = end - start
            interruptions.append(Interruption(
                start=start,
                min_restore=start + int(length * spec.min_restore_fraction),
                full_restore=end,
                repair_start=start + int(length * spec.repair_start_fraction),
                stressor="fault",
            ))
    events.sort(key=lambda e: (e.component_id, e.timestamp))
    interruptions.sort(key=lambda i: i.start)

    n_conn = len(connectors)
    downtime = sum(e - s for spans in faults.values() for s, e in spans)
    episodes = sum(len(spans) for spans in faults.values())
    exposure = n_conn * window.duration
    exact[KpiId.K6.value] = 1.0
    exact[KpiId.K9.value] = 1.0 - downtime / exposure
    exact[KpiId.K10.value] = 1.0 - downtime / exposure
    exact[KpiId.MTBF.value] = (exposure - downtime) / episodes if episodes else None
    exact[KpiId.MDF.value] = downtime / episodes if episodes else 0.0
    if interruptions:
        exact[KpiId.K11.value] = sum(i.min_restore - i.start for i in interruptions) / len(interruptions)
        exact[KpiId.IR_FULL.value] = sum(i.full_restore - i.start for i in interruptions) / len(interruptions)
        exact[KpiId.MTTR.value] = sum(i.full_restore - i.repair_start for i in interruptions) / len(interruptions)
    else:
        exact[KpiId.K11.value] = None
        exact[KpiId.MTTR.value] = None

    point_loss = 0
    for point in inventory.refill_points():
        point_loss += intervals.measure(intervals.intersect_all([faults[c.connector_id] for c in point.connectors]))
    fault_rate = point_loss / (n_rp * window.duration)

    # grid outages and power samples
    outages = _slotted(rng, window, spec.grid_outages, spec.grid_outage_duration_range_s)
    samples: List[PowerSample] = []
    hits = total = 0
    for start, end in outages:
        for t in range(start, end, spec.power_sample_step_s):
            short = bool(rng.random() < spec.backup_shortfall_probability)
            kw = 0.0 if short else spec.backup_kw
            samples.append(PowerSample(timestamp=t, available_kw=kw))
            total += 1
            hits += int(kw >= th.pmin_kw)
    if not outages:
        exact[KpiId.K7.value] = None
    elif not spec.backup_power:
        exact[KpiId.K7.value] = 0.0
    else:
        exact[KpiId.K7.value] = hits / total

    # comms outages and offline sessions
    comms = _slotted(rng, window, spec.comms_outages, spec.comms_outage_duration_range_s)
    serving = intervals.union(*(
        intervals.subtract([(window.t0, window.t1)], faults[c.connector_id]) for c in connectors
    ))
    comms_s = intervals.measure(comms)
    exact[KpiId.K8.value] = (intervals.measure(intervals.intersect(comms, serving)) / comms_s) if comms_s else None
    sessions = [
        OfflineSession(session_id=f"OFF-{i + 1}", settled=bool(rng.random() < spec.offline_settle_probability))
        for i in range(spec.offline_sessions)
    ]
    exact[KpiId.COSC_SESSIONS.value] = (
        sum(1 for s in sessions if s.settled) / len(sessions) if sessions else None
    )

    # prices
    rates, surges = _rates(rng, spec, window, th.psi_baseline_s)
    if len(set(spec.price_profile)) == 1 and not surges:
        exact[KpiId.K12.value] = 0.0

    # queue
    queue: List[QueueRecord] = []
    simulated: Dict[str, SimulatedValue] = {}
    if spec.arrival_rate_per_h > 0:
        n_arrivals = int(rng.poisson(spec.arrival_rate_per_h * spec.hours))
        arrivals_h = np.sort(rng.uniform(0.0, spec.hours, size=n_arrivals))
        services_h = rng.exponential(1.0 / spec.service_rate_per_h, size=n_arrivals)
        starts_h = fifo_starts(arrivals_h, services_h, n_rp)
        joins = rng.random(n_arrivals) < spec.join_signal_probability
        for i in range(n_arrivals):
            t_join = window.t0 + int(arrivals_h[i] * HOUR)
            t_plug = window.t0 + int(starts_h[i] * HOUR)
            queue.append(QueueRecord(vehicle_id=f"V{i + 1:05d}", t_join=t_join if joins[i] else None, t_plug=t_plug))
        waits = sorted(r.t_plug - r.t_join for r in queue if r.t_join is not None)
        exact[KpiId.K14.value] = float(nearest_rank(waits, 50)) if waits else None
        exact[KpiId.JOIN_COVERAGE.value] = len(waits) / len(queue) if queue else None
        if n_arrivals > 1:
            wq = (starts_h - arrivals_h) * HOUR
            simulated[KpiId.K14.value] = SimulatedValue(
                mean=float(wq.mean()), standard_error=float(wq.std(ddof=1) / np.sqrt(n_arrivals)))

    # cyber
    cyber = None
    if any((spec.heartbeats_expected, spec.pings_expected, spec.transactions, spec.tls_attempts,
            spec.cert_devices, spec.clock_devices)):
        hb_missed = int(rng.binomial(spec.heartbeats_expected, spec.heartbeat_miss_probability))
        ping_missed = int(rng.binomial(spec.pings_expected, spec.ping_miss_probability))
        timeouts = int(rng.binomial(spec.transactions, spec.timeout_probability))
        tls_ok = spec.tls_attempts - int(rng.binomial(spec.tls_attempts, spec.tls_failure_probability))
        lo, hi = spec.cert_delay_range_s
        accepted = {
            f"CERT-{i + 1}": window.t0 + int(rng.integers(lo, hi + 1)) for i in range(spec.cert_devices)
        }
        clock = {f"CLK-{i + 1}": float(rng.normal(0.0, spec.clock_error_scale_s)) for i in range(spec.clock_devices)}
        cyber = CyberTelemetry(
            heartbeats_expected=spec.heartbeats_expected, heartbeats_missed=hb_missed,
            pings_expected=spec.pings_expected, pings_missed=ping_missed,
            transactions=spec.transactions, timeouts=timeouts,
            tls_attempts=spec.tls_attempts, tls_successes=tls_ok,
            cert_issued_at=window.t0 if spec.cert_devices else None,
            cert_accepted_at=accepted, clock_errors=clock,
        )
        exact[KpiId.HFR.value] = hb_missed / spec.heartbeats_expected if spec.heartbeats_expected else None
        exact[KpiId.PFR.value] = ping_missed / spec.pings_expected if spec.pings_expected else None
        if spec.heartbeats_expected and spec.pings_expected:
            exact[KpiId.LKFR.value] = 0.5 * exact[KpiId.HFR.value] + 0.5 * exact[KpiId.PFR.value]
        exact[KpiId.CTR.value] = timeouts / spec.transactions if spec.transactions else None
        exact[KpiId.SSES.value] = tls_ok / spec.tls_attempts if spec.tls_attempts else None
        exact[KpiId.CDL.value] = (
            float(np.median([t - window.t0 for t in accepted.values()])) if accepted else None
        )
        exact[KpiId.TSH.value] = (
            sum(1 for e in clock.values() if abs(e) <= th.clock_tolerance_s) / len(clock) if clock else None
        )

    # demand
    demand = None
    if spec.demand_points:
        demand = []
        covered_w = total_w = 0.0
        for i in range(spec.demand_points):
            covered = bool(rng.random() < spec.demand_covered_probability)
            weight = float(rng.integers(1, 6))
            lat = spec.lat if covered else spec.lat - FAR_OFFSET_DEG
            demand.append(DemandPoint(location_id=f"D{i + 1}", coordinates=Coordinates(lat=lat, lon=spec.lon),
                                      weight=weight))
            total_w += weight
            covered_w += weight if covered else 0.0
        exact[KpiId.K5.value] = covered_w / total_w

    # energy
    energy: List[EnergySample] = []
    if spec.energy_samples:
        for t in range(window.t0, window.t1, HOUR):
            share = round(float(rng.uniform(0.0, 1.0)), 3)
            kwh = float(rng.integers(10, 100))
            energy.append(EnergySample(timestamp=t, renewable_share=share, delivered_kwh=kwh))
        exact[KpiId.GSR_DYNAMIC.value] = (
            sum(e.renewable_share * e.delivered_kwh for e in energy) / sum(e.delivered_kwh for e in energy)
        )

    stressors = StressorLog(
        grid_outages=[Interval(start=s, end=e) for s, e in outages],
        comms_outages=[Interval(start=s, end=e) for s, e in comms],
        interruptions=interruptions,
        power_samples=samples,
        offline_sessions=sessions,
    )
    declared = {"inventory", "status"}
    if queue:
        declared.add("queue")
    if cyber is not None:
        declared.add("cyber")
    if demand is not None:
        declared.add("demand")

    bundle = FeedBundle(
        inventory=inventory,
        status_events=events,
        rates={rates.scope: rates},
        stressors=stressors,
        queue=queue or None,
        cyber=cyber,
        demand=demand,
        energy=energy,
        declared_feeds=declared,
    )
    truth = GroundTruth(
        window=window, exact=exact, simulated=simulated, fault_rate=fault_rate, surge_timestamps=surges,
    )
    logger.info(
        f"Generated scenario seed={spec.seed}: {n_conn} connectors, {episodes} faults, "
        f"{len(outages)} grid outages, {len(comms)} comms outages, {len(queue)} queue records"
    )
    return bundle, truth


def load_scenario(path: Union[str, Path]) -> ScenarioSpec:
    """Read a scenario spec (JSON, camelCase fields)."""
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as fh:
            return ScenarioSpec.model_validate(json.load(fh))
    except FileNotFoundError:
        raise BadScenario(f"Scenario file not found: {path}")
    except json.JSONDecodeError as e:
        raise BadScenario(f"Scenario file {path} is malformed: {e.msg}")
    except ValidationError as e:
        raise BadScenario(f"Scenario file {path} is invalid: {str(e)}")
