"""
Core schema models for the KPI engine.
Defines Pydantic models for the site inventory, status timelines, stressor logs,
price series, queue and cyber telemetry records, KPI values and weight config.

All timestamps are integer seconds since the Unix epoch (UTC); durations are seconds.
"""
import logging
import math
from enum import Enum
from typing import Any, Dict, Iterator, List, Optional, Set, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic.alias_generators import to_camel

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"

HOUR = 3600
DAY = 24 * HOUR


class KpiEngineError(Exception):
    """Base exception for all KPI engine errors."""
    pass


# ============================================================================
# Enums
# ============================================================================

class ComponentStatus(str, Enum):
    """Closed status set for connectors, refill points and stations."""
    AVAILABLE = "available"
    OCCUPIED = "occupied"
    OUT_OF_SERVICE = "outOfService"
    FAULT = "fault"
    UNKNOWN = "unknown"

    @classmethod
    def parse(cls, label: Any) -> "ComponentStatus":
        """Map a feed label onto the closed set; unrecognised labels become UNKNOWN."""
        if isinstance(label, cls):
            return label
        for member in cls:
            if member.value == label:
                return member
        logger.warning(f"Unrecognised status {label!r} mapped to 'unknown'")
        return cls.UNKNOWN


SERVICE_LOSS_STATUSES = frozenset({ComponentStatus.FAULT, ComponentStatus.OUT_OF_SERVICE})
SERVING_STATUSES = frozenset({ComponentStatus.AVAILABLE, ComponentStatus.OCCUPIED})


class HierarchyLevel(str, Enum):
    """Aggregation levels for roll-ups."""
    CONNECTOR = "connector"
    POINT = "point"
    STATION = "station"
    POOL = "pool"
    SITE = "site"


class NormalizationKind(str, Enum):
    """Monotone transforms onto [0, 1]."""
    IDENTITY = "identity"
    MINMAX = "minmax"
    INVERTED_MINMAX = "inverted-minmax"


class KpiId(str, Enum):
    """Identifiers for every reported KPI."""
    K1 = "K1"
    K2 = "K2"
    K3 = "K3"
    K4 = "K4"
    K5 = "K5"
    K6 = "K6"
    K7 = "K7"
    K8 = "K8"
    K9 = "K9"
    K10 = "K10"
    K11 = "K11"
    K12 = "K12"
    K13 = "K13"
    K14 = "K14"
    K15 = "K15"
    # Auxiliary service and market values
    MTBF = "MTBF"
    MDF = "MDF"
    MTTR = "MTTR"
    IR_FULL = "IR_FULL"
    COSC_SESSIONS = "COSC_SESSIONS"
    HP_SHARE_750 = "HP_SHARE_750"
    HP_SHARE_1000 = "HP_SHARE_1000"
    GSR_DYNAMIC = "GSR_DYNAMIC"
    CSP = "CSP"
    UTILIZATION = "UTILIZATION"
    WAIT_P95 = "WAIT_P95"
    JOIN_COVERAGE = "JOIN_COVERAGE"
    MMS_WQ = "MMS_WQ"
    # Cyber
    HFR = "HFR"
    PFR = "PFR"
    LKFR = "LKFR"
    CTR = "CTR"
    SSES = "SSES"
    CDL = "CDL"
    TFS = "TFS"
    TSH = "TSH"
    PATCH_LATENCY = "PATCH_LATENCY"
    SEC_MTTD = "SEC_MTTD"
    SEC_MTTR = "SEC_MTTR"
    VULN_CLOSURE = "VULN_CLOSURE"
    MFA_COVERAGE = "MFA_COVERAGE"
    CERT_HEALTH = "CERT_HEALTH"
    FIRMWARE_ADOPTION = "FIRMWARE_ADOPTION"
    NET_SEPARATION = "NET_SEPARATION"
    CYBER_LINK = "CYBER_LINK"
    CYBER_RECOVERY = "CYBER_RECOVERY"


# ============================================================================
# Base
# ============================================================================

class FeedModel(BaseModel):
    """Immutable model with camelCase aliases matching the feed field names."""
    model_config = ConfigDict(
        frozen=True,
        populate_by_name=True,
        alias_generator=to_camel,
        use_enum_values=False,
    )


# ============================================================================
# Time
# ============================================================================

class AnalysisWindow(FeedModel):
    """Closed-open analysis window [t0, t1)."""
    t0: int
    t1: int
    resolution: int = 1

    @model_validator(mode="after")
    def _check_bounds(self) -> "AnalysisWindow":
        if self.t0 >= self.t1:
            raise ValueError(f"window start {self.t0} must precede end {self.t1}")
        if self.resolution <= 0 or self.resolution > self.t1 - self.t0:
            raise ValueError(f"resolution {self.resolution} outside (0, {self.t1 - self.t0}]")
        return self

    @property
    def duration(self) -> int:
        return self.t1 - self.t0

    def contains(self, t: int) -> bool:
        return self.t0 <= t < self.t1


class Interval(FeedModel):
    """Half-open interval [start, end); censored marks an event still open at window end."""
    start: int
    end: int
    censored: bool = False

    @model_validator(mode="after")
    def _check_order(self) -> "Interval":
        if self.start > self.end:
            raise ValueError(f"interval start {self.start} after end {self.end}")
        return self

    @property
    def duration(self) -> int:
        return self.end - self.start

    def as_span(self) -> Tuple[int, int]:
        return (self.start, self.end)


# ============================================================================
# Static inventory
# ============================================================================

class Coordinates(FeedModel):
    """WGS84 coordinates in degrees."""
    lat: float
    lon: float

    @model_validator(mode="after")
    def _check_range(self) -> "Coordinates":
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} out of range")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} out of range")
        return self


class Connector(FeedModel):
    """A single connector on a refill point."""
    connector_id: str
    connector_type: str
    max_power_kw: float
    refill_point_id: str

    @field_validator("connector_type")
    @classmethod
    def _type_not_empty(cls, value: str) -> str:
        if not value:
            raise ValueError("connectorType must be non-empty")
        return value

    @field_validator("max_power_kw")
    @classmethod
    def _power_non_negative(cls, value: float) -> float:
        if value < 0:
            raise ValueError(f"maxPowerKw {value} must be >= 0")
        return value


class RefillPoint(FeedModel):
    """A charging position (ElectricChargingPoint); parent of connectors."""
    refill_point_id: str
    station_id: str
    feeder_id: Optional[str] = None
    connectors: List[Connector] = Field(default_factory=list)


class Station(FeedModel):
    """A charging station; `pool_id` is an optional named grouping of stations."""
    station_id: str
    site_id: str
    pool_id: Optional[str] = None
    refill_points: List[RefillPoint] = Field(default_factory=list)


class EnergySourceRatio(FeedModel):
    """Share of delivered electricity from one source."""
    source: str
    ratio: float

    @field_validator("ratio")
    @classmethod
    def _ratio_in_unit_interval(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"ratio {value} outside [0, 1]")
        return value


class SiteInventory(FeedModel):
    """Static site hierarchy: site -> station -> refill point -> connector."""
    site_id: str
    coordinates: Coordinates
    stations: List[Station] = Field(default_factory=list)
    payment_methods: List[str] = Field(default_factory=list)
    payment_shares: Optional[Dict[str, float]] = None
    energy_mix: List[EnergySourceRatio] = Field(default_factory=list)
    operator_meta: Dict[str, str] = Field(default_factory=dict)
    backup_power: bool = False
    temporary_operating_hours: List[Dict[str, Any]] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_tree(self) -> "SiteInventory":
        seen: Set[str] = {self.site_id}
        for station in self.stations:
            if station.site_id != self.site_id:
                raise ValueError(f"station {station.station_id} belongs to site {station.site_id}")
            for node_id in self._ids_below(station):
                if node_id in seen:
                    raise ValueError(f"duplicate identifier {node_id!r}")
                seen.add(node_id)
            for point in station.refill_points:
                if point.station_id != station.station_id:
                    raise ValueError(f"refill point {point.refill_point_id} not under {station.station_id}")
                for connector in point.connectors:
                    if connector.refill_point_id != point.refill_point_id:
                        raise ValueError(
                            f"connector {connector.connector_id} not under {point.refill_point_id}"
                        )
        total = sum(item.ratio for item in self.energy_mix)
        if total > 1.0 + 1e-9:
            raise ValueError(f"energy mix ratios sum to {total} > 1")
        return self

    @staticmethod
    def _ids_below(station: Station) -> Iterator[str]:
        yield station.station_id
        for point in station.refill_points:
            yield point.refill_point_id
            for connector in point.connectors:
                yield connector.connector_id

    def refill_points(self) -> List[RefillPoint]:
        return [point for station in self.stations for point in station.refill_points]

    def connectors(self) -> List[Connector]:
        return [c for point in self.refill_points() for c in point.connectors]

    def component_levels(self) -> Dict[str, HierarchyLevel]:
        """Map every identifier in the tree to its hierarchy level."""
        levels: Dict[str, HierarchyLevel] = {self.site_id: HierarchyLevel.SITE}
        for station in self.stations:
            levels[station.station_id] = HierarchyLevel.STATION
            for point in station.refill_points:
                levels[point.refill_point_id] = HierarchyLevel.POINT
                for connector in point.connectors:
                    levels[connector.connector_id] = HierarchyLevel.CONNECTOR
        return levels

    def ancestors(self, connector_id: str) -> List[str]:
        """Identifiers from the connector up to the site, nearest first."""
        for station in self.stations:
            for point in station.refill_points:
                for connector in point.connectors:
                    if connector.connector_id == connector_id:
                        return [connector_id, point.refill_point_id, station.station_id, self.site_id]
        raise KeyError(connector_id)


# ============================================================================
# Dynamic feed
# ============================================================================

class StatusEvent(FeedModel):
    """A timestamped status change for one component."""
    component_id: str
    timestamp: int
    status: ComponentStatus
    reason: Optional[str] = None

    @field_validator("status", mode="before")
    @classmethod
    def _map_status(cls, value: Any) -> ComponentStatus:
        return ComponentStatus.parse(value)


class TimelineSegment(FeedModel):
    """One constant-status piece [start, end) of a timeline."""
    start: int
    end: int
    status: ComponentStatus

    @property
    def duration(self) -> int:
        return self.end - self.start


class StatusTimeline(FeedModel):
    """Piecewise-constant status over the analysis window."""
    component_id: str
    segments: List[TimelineSegment]

    @model_validator(mode="after")
    def _check_tiling(self) -> "StatusTimeline":
        if not self.segments:
            raise ValueError(f"timeline for {self.component_id} has no segments")
        for seg in self.segments:
            if seg.start >= seg.end:
                raise ValueError(f"empty segment [{seg.start}, {seg.end}) in {self.component_id}")
        for prev, nxt in zip(self.segments, self.segments[1:]):
            if prev.end != nxt.start:
                raise ValueError(f"timeline for {self.component_id} is not contiguous at {prev.end}")
        return self

    @property
    def start(self) -> int:
        return self.segments[0].start

    @property
    def end(self) -> int:
        return self.segments[-1].end

    def status_at(self, t: int) -> ComponentStatus:
        """Status at instant t (segments are left-closed)."""
        if not self.start <= t < self.end:
            raise ValueError(f"instant {t} outside timeline [{self.start}, {self.end})")
        lo, hi = 0, len(self.segments) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.segments[mid].start <= t:
                lo = mid
            else:
                hi = mid - 1
        return self.segments[lo].status

    def spans_in(self, statuses) -> List[Tuple[int, int]]:
        """Maximal spans whose status is in `statuses`."""
        spans: List[Tuple[int, int]] = []
        for seg in self.segments:
            if seg.status in statuses:
                if spans and spans[-1][1] == seg.start:
                    spans[-1] = (spans[-1][0], seg.end)
                else:
                    spans.append((seg.start, seg.end))
        return spans

    def time_in(self, statuses) -> int:
        return sum(seg.duration for seg in self.segments if seg.status in statuses)


class Interruption(FeedModel):
    """Service interruption with optional restoration and repair timestamps."""
    start: int
    min_restore: Optional[int] = None
    full_restore: Optional[int] = None
    repair_start: Optional[int] = None
    stressor: Optional[str] = None


class PowerSample(FeedModel):
    """Available site power at an instant."""
    timestamp: int
    available_kw: float


class OfflineSession(FeedModel):
    """Session started while the site was offline from the CSMS."""
    session_id: str
    settled: bool


class StressorLog(FeedModel):
    """Tagged stress intervals and samples."""
    grid_outages: List[Interval] = Field(default_factory=list)
    comms_outages: List[Interval] = Field(default_factory=list)
    interruptions: List[Interruption] = Field(default_factory=list)
    planned_maintenance: List[Interval] = Field(default_factory=list)
    power_samples: List[PowerSample] = Field(default_factory=list)
    offline_sessions: List[OfflineSession] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_sorted(self) -> "StressorLog":
        for name in ("grid_outages", "comms_outages", "planned_maintenance"):
            starts = [item.start for item in getattr(self, name)]
            if starts != sorted(starts):
                raise ValueError(f"{name} not sorted by start")
        starts = [item.start for item in self.interruptions]
        if starts != sorted(starts):
            raise ValueError("interruptions not sorted by start")
        return self


class RateObservation(FeedModel):
    """Price observation (currency per kWh)."""
    timestamp: int
    rate: float


class RateSeries(FeedModel):
    """Ordered price observations for one pricing scope."""
    scope: str = "adhoc"
    currency: str = "EUR"
    observations: List[RateObservation] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_series(self) -> "RateSeries":
        for prev, nxt in zip(self.observations, self.observations[1:]):
            if nxt.timestamp <= prev.timestamp:
                raise ValueError(f"rate timestamps not strictly increasing at {nxt.timestamp}")
        for obs in self.observations:
            if obs.rate < 0:
                raise ValueError(f"negative rate {obs.rate} at {obs.timestamp}")
        return self

    def timestamps(self) -> List[int]:
        return [obs.timestamp for obs in self.observations]

    def rates(self) -> List[float]:
        return [obs.rate for obs in self.observations]


class EnergySample(FeedModel):
    """Renewable share and delivered energy for one interval."""
    timestamp: int
    renewable_share: Optional[float] = None
    delivered_kwh: Optional[float] = None


class DemandPoint(FeedModel):
    """Demand-weighted location."""
    location_id: str
    coordinates: Coordinates
    weight: float

    @field_validator("weight")
    @classmethod
    def _weight_positive(cls, value: float) -> float:
        if value <= 0:
            raise ValueError(f"demand weight {value} must be > 0")
        return value


class QueueRecord(FeedModel):
    """Vehicle queue record: intent-to-charge and first successful handshake."""
    vehicle_id: str
    t_join: Optional[int] = None
    t_plug: int

    @model_validator(mode="after")
    def _check_order(self) -> "QueueRecord":
        if self.t_join is not None and self.t_join > self.t_plug:
            raise ValueError(f"vehicle {self.vehicle_id}: tJoin after tPlug")
        return self


# ============================================================================
# Cyber telemetry
# ============================================================================

class MessageLatency(FeedModel):
    message_class: str
    latency_s: float
    sla_limit_s: float


class PatchDelay(FeedModel):
    severity: str = "critical"
    days: float


class SecurityIncident(FeedModel):
    detect_delay_h: float
    recover_delay_h: float


class FamilyTimeouts(FeedModel):
    """Transactions and timeouts for one OCPP message family."""
    transactions: int
    timeouts: int


class NetworkSeparation(FeedModel):
    in_place: bool = False
    notes: List[str] = Field(default_factory=list)


class CyberTelemetry(FeedModel):
    """Counters and records from CSMS/OCPP logs, PKI dashboards and ticketing."""
    heartbeats_expected: int = 0
    heartbeats_missed: int = 0
    pings_expected: int = 0
    pings_missed: int = 0
    transactions: int = 0
    timeouts: int = 0
    timeouts_by_family: Dict[str, FamilyTimeouts] = Field(default_factory=dict)
    tls_attempts: int = 0
    tls_successes: int = 0
    tls_failure_codes: Dict[str, int] = Field(default_factory=dict)
    cert_issued_at: Optional[int] = None
    cert_accepted_at: Dict[str, Optional[int]] = Field(default_factory=dict)
    cert_devices_total: int = 0
    cert_healthy: int = 0
    message_latencies: List[MessageLatency] = Field(default_factory=list)
    clock_errors: Dict[str, float] = Field(default_factory=dict)
    patch_delays: List[PatchDelay] = Field(default_factory=list)
    security_incidents: List[SecurityIncident] = Field(default_factory=list)
    vulns_due_count: int = 0
    vulns_closed_in_sla_count: int = 0
    mfa_privileged_total: int = 0
    mfa_privileged_covered: int = 0
    firmware_devices_total: int = 0
    firmware_signed_enforced: int = 0
    network_separation: Optional[NetworkSeparation] = None
    lateness_threshold_s: int = 120

    @model_validator(mode="after")
    def _check_counts(self) -> "CyberTelemetry":
        pairs = [
            ("heartbeats_missed", "heartbeats_expected"),
            ("pings_missed", "pings_expected"),
            ("timeouts", "transactions"),
            ("tls_successes", "tls_attempts"),
            ("cert_healthy", "cert_devices_total"),
            ("vulns_closed_in_sla_count", "vulns_due_count"),
            ("mfa_privileged_covered", "mfa_privileged_total"),
            ("firmware_signed_enforced", "firmware_devices_total"),
        ]
        for part, whole in pairs:
            part_v, whole_v = getattr(self, part), getattr(self, whole)
            if part_v < 0 or whole_v < 0:
                raise ValueError(f"negative count in {part}/{whole}")
            if part_v > whole_v:
                raise ValueError(f"{part}={part_v} exceeds {whole}={whole_v}")
        for family, counts in self.timeouts_by_family.items():
            if counts.timeouts < 0 or counts.timeouts > counts.transactions:
                raise ValueError(f"timeouts for family {family} out of range")
        return self


# ============================================================================
# KPI values and config
# ============================================================================

class KpiValue(FeedModel):
    """A KPI result; `None` raw/normalized means undefined."""
    kpi_id: str
    raw: Optional[float] = None
    normalized: Optional[float] = None
    unit: str = "fraction"
    provenance: Dict[str, Any] = Field(default_factory=dict)
    diagnostics: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("raw")
    @classmethod
    def _finite_raw(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not math.isfinite(value):
            raise ValueError(f"raw value {value} is not finite")
        return value

    @field_validator("normalized")
    @classmethod
    def _normalized_in_range(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not 0.0 <= value <= 1.0:
            raise ValueError(f"normalized value {value} outside [0, 1]")
        return value

    @property
    def is_defined(self) -> bool:
        return self.raw is not None

    @classmethod
    def fraction(cls, kpi_id: str, raw: float, **diagnostics: Any) -> "KpiValue":
        """A [0, 1] share whose normalized value is the share itself."""
        raw = float(raw)
        return cls(kpi_id=kpi_id, raw=raw, normalized=min(max(raw, 0.0), 1.0), diagnostics=diagnostics)

    @classmethod
    def undefined(cls, kpi_id: str, reason: str, unit: str = "fraction", **diagnostics: Any) -> "KpiValue":
        logger.debug(f"{kpi_id} undefined: {reason}")
        return cls(kpi_id=kpi_id, unit=unit, diagnostics={"undefinedReason": reason, **diagnostics})


class NormalizationSpec(FeedModel):
    """Monotone transform onto [0, 1]."""
    kind: NormalizationKind = NormalizationKind.IDENTITY
    lo: float = 0.0
    hi: float = 1.0

    @model_validator(mode="after")
    def _check_range(self) -> "NormalizationSpec":
        if self.kind != NormalizationKind.IDENTITY and self.lo >= self.hi:
            raise ValueError(f"normalization lo={self.lo} must be < hi={self.hi}")
        return self


class Thresholds(FeedModel):
    """Numeric thresholds and windows used by the KPI modules."""
    pthr_kw: float = 1000.0
    pmin_kw: float = 350.0
    n_target: int = Field(default=4, ge=1)
    coverage_radius_km: float = Field(default=50.0, ge=0.0)
    piv_window_s: int = Field(default=DAY, gt=0)
    piv_step_s: int = Field(default=HOUR, gt=0)
    psi_baseline_s: int = Field(default=7 * DAY, gt=0)
    surge_threshold: float = 2.0
    n_min: int = Field(default=2, ge=1)
    lateness_s: int = 120
    clock_tolerance_s: float = 2.0
    seed_lookback_s: int = 7 * DAY
    clock_skew_tolerance_s: int = 0
    service_rate_per_charger: Optional[float] = Field(default=None, gt=0.0)
    chargers: Optional[int] = Field(default=None, ge=1)


def _inverted(hi: float) -> NormalizationSpec:
    return NormalizationSpec(kind=NormalizationKind.INVERTED_MINMAX, lo=0.0, hi=hi)


DEFAULT_SELECTION = [
    KpiId.K1, KpiId.K2, KpiId.K3, KpiId.K4, KpiId.K5, KpiId.K7, KpiId.K8,
    KpiId.K9, KpiId.K10, KpiId.K11, KpiId.K12, KpiId.K13, KpiId.K14,
]

DEFAULT_NORMALIZATION: Dict[str, NormalizationSpec] = {
    KpiId.K11.value: _inverted(float(HOUR)),
    KpiId.K12.value: _inverted(0.5),
    KpiId.K13.value: _inverted(1.0),
    KpiId.K14.value: _inverted(float(HOUR)),
    KpiId.CDL.value: _inverted(float(30 * DAY)),
}

DEFAULT_RENEWABLES = ["biomass", "geothermal", "hydro", "solar", "wind"]

MAINTENANCE_EXCLUDABLE = [KpiId.K9.value, KpiId.K10.value, KpiId.K11.value, KpiId.K15.value]


class WeightConfig(FeedModel):
    """Weights, normalization specs and thresholds for the composite score."""
    weights: Dict[str, float]
    w_fault: float = 0.1
    perturbation_fraction: float = 0.20
    normalization: Dict[str, NormalizationSpec] = Field(default_factory=dict)
    thresholds: Thresholds = Field(default_factory=Thresholds)
    renewable_labels: List[str] = Field(default_factory=lambda: list(DEFAULT_RENEWABLES))
    exclude_maintenance: Dict[str, bool] = Field(
        default_factory=lambda: {kpi: True for kpi in MAINTENANCE_EXCLUDABLE}
    )
    treat_out_of_service_as_fault: bool = True
    level: HierarchyLevel = HierarchyLevel.SITE

    @model_validator(mode="after")
    def _check_weights(self) -> "WeightConfig":
        if self.w_fault < 0:
            raise ValueError(f"wFault {self.w_fault} must be >= 0")
        if not 0.0 <= self.perturbation_fraction < 1.0:
            raise ValueError(f"perturbationFraction {self.perturbation_fraction} outside [0, 1)")
        for kpi, weight in self.weights.items():
            if weight < 0:
                raise ValueError(f"weight for {kpi} is negative")
        total = sum(self.weights.values())
        if self.weights and abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {total}, expected 1")
        return self

    @classmethod
    def default(cls, selection: Optional[List[str]] = None, **overrides: Any) -> "WeightConfig":
        """Equal weights over the selection sharing 0.90, plus 0.05 per cyber sub-index."""
        members = [str(getattr(k, "value", k)) for k in (selection or DEFAULT_SELECTION)]
        share = 0.90 / len(members)
        weights = {kpi: share for kpi in members}
        weights[KpiId.CYBER_LINK.value] = 0.05
        weights[KpiId.CYBER_RECOVERY.value] = 0.05
        # absorb float residue so the sum check is exact to 1e-9
        weights[members[-1]] += 1.0 - sum(weights.values())
        return cls(weights=weights, **overrides)

    def normalization_for(self, kpi_id: str) -> NormalizationSpec:
        if kpi_id in self.normalization:
            return self.normalization[kpi_id]
        return DEFAULT_NORMALIZATION.get(kpi_id, NormalizationSpec())

    def excludes_maintenance(self, kpi_id: str) -> bool:
        return self.exclude_maintenance.get(kpi_id, False)
