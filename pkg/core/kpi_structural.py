"""
Structural KPIs.
Static-feed indicators computed from the site inventory and demand points:
redundancy (K1), high-power share (K2), green supply ratio (K3), user access
resilience (K4) and spatial coverage (K5).
"""
import logging
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from core.observability import observe
from core.schema import (
    AnalysisWindow,
    Coordinates,
    DemandPoint,
    EnergySample,
    EnergySourceRatio,
    KpiEngineError,
    KpiId,
    KpiValue,
    SiteInventory,
)

logger = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0
HP_TIERS_KW = (750.0, 1000.0)

LatLon = Union[Coordinates, Tuple[float, float]]


class StructuralError(KpiEngineError):
    """Base class for structural KPI errors."""
    pass


class BadDistribution(StructuralError):
    """Payment shares are negative or do not sum to one."""
    pass


class MisalignedSeries(StructuralError):
    """Renewable-share and delivered-energy series cannot be joined on timestamps."""
    pass


# ============================================================================
# K1, K2
# ============================================================================

@observe(kpi_id=KpiId.K1.value)
def redundancy_at_site(
    inventory: SiteInventory,
    n_target: int,
    connector_family: Optional[str] = None,
    feeder_map: Optional[Mapping[str, str]] = None,
) -> KpiValue:
    """
    Redundancy at site: min(N_rp / N_target, 1).

    Args:
        inventory: Site inventory
        n_target: Target number of independent refill points
        connector_family: Count only refill points offering this connector type
        feeder_map: refillPointId -> feederId; points sharing a feeder count once

    Returns:
        KpiValue: K1; raw 0 flagged `emptyInventory` when no refill point qualifies
    """
    if n_target <= 0:
        raise ValueError(f"n_target must be positive, got {n_target}")

    points = inventory.refill_points()
    if connector_family is not None:
        points = [p for p in points if any(c.connector_type == connector_family for c in p.connectors)]

    if feeder_map is not None:
        n_rp = len({feeder_map.get(p.refill_point_id, p.refill_point_id) for p in points})
    else:
        n_rp = len(points)

    diagnostics = {"refillPoints": n_rp, "nTarget": n_target, "connectorFamily": connector_family,
                   "perFeeder": feeder_map is not None}
    if n_rp == 0:
        logger.warning(f"No refill points qualify for K1 at {inventory.site_id}")
        return KpiValue.fraction(KpiId.K1.value, 0.0, emptyInventory=True, **diagnostics)
    return KpiValue.fraction(KpiId.K1.value, min(n_rp / n_target, 1.0), **diagnostics)


def feeder_map_of(inventory: SiteInventory) -> Optional[Dict[str, str]]:
    """Feeder assignment from the inventory, or None when no point declares one."""
    points = inventory.refill_points()
    if not any(p.feeder_id for p in points):
        return None
    return {p.refill_point_id: p.feeder_id or p.refill_point_id for p in points}


def _share_at(powers: np.ndarray, threshold_kw: float) -> float:
    return float(np.count_nonzero(powers >= threshold_kw)) / powers.size


@observe(kpi_id=KpiId.K2.value)
def high_power_share(inventory: SiteInventory, pthr_kw: float = 1000.0) -> KpiValue:
    """
    Share of connectors rated at or above `pthr_kw`.

    Diagnostics carry the 750 kW and 1000 kW tier shares.
    """
    powers = np.array([c.max_power_kw for c in inventory.connectors()], dtype=float)
    if powers.size == 0:
        return KpiValue.undefined(KpiId.K2.value, "emptyInventory", pthrKw=pthr_kw)

    tiers = {f"hpShare{int(tier)}": _share_at(powers, tier) for tier in HP_TIERS_KW}
    return KpiValue.fraction(
        KpiId.K2.value, _share_at(powers, pthr_kw),
        pthrKw=pthr_kw, connectors=int(powers.size), **tiers,
    )


# ============================================================================
# K3
# ============================================================================

@observe(kpi_id=KpiId.K3.value)
def green_supply_ratio(mix: Iterable[EnergySourceRatio], renewable_labels: Iterable[str]) -> KpiValue:
    """Sum of renewable source ratios, clamped to [0, 1]. Labels match case-insensitively."""
    renewables = {label.lower() for label in renewable_labels}
    total = sum(item.ratio for item in mix if item.source.lower() in renewables)
    return KpiValue.fraction(
        KpiId.K3.value, min(max(total, 0.0), 1.0), renewableLabels=sorted(renewables),
    )


def split_energy_samples(samples: Sequence[EnergySample]) -> Tuple[List[Tuple[int, float]], List[Tuple[int, float]]]:
    """Separate energy samples into (renewable share, delivered kWh) series."""
    shares = [(s.timestamp, s.renewable_share) for s in samples if s.renewable_share is not None]
    energy = [(s.timestamp, s.delivered_kwh) for s in samples if s.delivered_kwh is not None]
    return shares, energy


@observe(kpi_id=KpiId.GSR_DYNAMIC.value)
def green_supply_ratio_dynamic(
    renewable_share: Sequence[Tuple[int, float]],
    delivered_kwh: Sequence[Tuple[int, float]],
    window: AnalysisWindow,
) -> KpiValue:
    """
    Energy-weighted renewable share over the window: sum(r*E) / sum(E).

    Raises:
        MisalignedSeries: If the in-window timestamps of the two series differ
    """
    shares = {t: r for t, r in renewable_share if window.contains(t)}
    energy = {t: e for t, e in delivered_kwh if window.contains(t)}
    if set(shares) != set(energy):
        unmatched = sorted(set(shares) ^ set(energy))
        raise MisalignedSeries(f"{len(unmatched)} timestamps without a partner, first at {unmatched[0]}")

    stamps = sorted(shares)
    r = np.array([shares[t] for t in stamps], dtype=float)
    e = np.array([energy[t] for t in stamps], dtype=float)
    delivered = float(e.sum())
    if delivered == 0.0:
        return KpiValue.undefined(KpiId.GSR_DYNAMIC.value, "noDeliveredEnergy", samples=len(stamps))
    return KpiValue.fraction(
        KpiId.GSR_DYNAMIC.value, float(np.dot(r, e)) / delivered,
        samples=len(stamps), deliveredKwh=delivered,
    )


# ============================================================================
# K4
# ============================================================================

@observe(kpi_id=KpiId.K4.value)
def user_access_resilience(
    shares: Optional[Mapping[str, float]] = None,
    methods: Optional[Iterable[str]] = None,
) -> KpiValue:
    """
    Shannon diversity of payment methods normalised by ln|M|.

    With only `methods` given, equal shares are assumed. A single method
    yields 0; no methods at all is undefined.

    Raises:
        BadDistribution: If shares are negative or do not sum to 1 within 1e-9
    """
    if shares is None:
        labels = sorted(set(methods or []))
        if not labels:
            return KpiValue.undefined(KpiId.K4.value, "noPaymentMethods")
        raw = 1.0 if len(labels) > 1 else 0.0
        return KpiValue.fraction(KpiId.K4.value, raw, methods=len(labels), equalSharesAssumed=True)

    p = np.array(list(shares.values()), dtype=float)
    if p.size == 0:
        return KpiValue.undefined(KpiId.K4.value, "noPaymentMethods")
    if np.any(p < 0):
        raise BadDistribution(f"negative payment share in {dict(shares)}")
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise BadDistribution(f"payment shares sum to {float(p.sum())}, expected 1")
    if p.size == 1:
        return KpiValue.fraction(KpiId.K4.value, 0.0, methods=1)

    # 0 ln 0 = 0
    nz = p[p > 0]
    entropy = float(-(nz * np.log(nz)).sum())
    raw = min(entropy / float(np.log(p.size)), 1.0)
    return KpiValue.fraction(KpiId.K4.value, raw, methods=int(p.size), entropy=entropy)


# ============================================================================
# K5
# ============================================================================

def _as_pair(point: LatLon) -> Tuple[float, float]:
    if isinstance(point, Coordinates):
        return point.lat, point.lon
    return float(point[0]), float(point[1])


def haversine_km(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Great-circle distance in km; arguments broadcast as numpy arrays of degrees."""
    lat1, lon1, lat2, lon2 = (np.radians(np.asarray(x, dtype=float)) for x in (lat1, lon1, lat2, lon2))
    a = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def nearest_site_km(demand: Sequence[DemandPoint], sites: Sequence[LatLon]) -> np.ndarray:
    """Distance from each demand point to its nearest site."""
    d = np.array([(p.coordinates.lat, p.coordinates.lon) for p in demand], dtype=float).reshape(-1, 2)
    s = np.array([_as_pair(site) for site in sites], dtype=float).reshape(-1, 2)
    matrix = haversine_km(d[:, 0:1], d[:, 1:2], s[None, :, 0], s[None, :, 1])
    return matrix.min(axis=1)


@observe(kpi_id=KpiId.K5.value)
def spatial_coverage(demand: Sequence[DemandPoint], sites: Sequence[LatLon], radius_km: float) -> KpiValue:
    """
    Share of demand weight within `radius_km` great-circle distance of a site.

    Returns:
        KpiValue: K5; undefined without demand points, 0 without sites
    """
    if not demand:
        return KpiValue.undefined(KpiId.K5.value, "noDemand", radiusKm=radius_km)
    if not sites:
        return KpiValue.fraction(KpiId.K5.value, 0.0, radiusKm=radius_km, sites=0)

    weights = np.array([p.weight for p in demand], dtype=float)
    covered = nearest_site_km(demand, sites) <= radius_km
    raw = float(weights[covered].sum() / weights.sum())
    return KpiValue.fraction(
        KpiId.K5.value, raw, radiusKm=radius_km, sites=len(sites),
        demandPoints=len(demand), coveredPoints=int(covered.sum()),
    )


@observe(kpi_id=KpiId.CSP.value)
def coverage_proximity(demand: Sequence[DemandPoint], sites: Sequence[LatLon]) -> KpiValue:
    """Mean distance (km) from demand points to their nearest site. A reporting convention."""
    if not demand or not sites:
        return KpiValue.undefined(KpiId.CSP.value, "noDemand" if not demand else "noSites", unit="km")
    mean_km = float(nearest_site_km(demand, sites).mean())
    return KpiValue(
        kpi_id=KpiId.CSP.value, raw=mean_km, unit="km",
        diagnostics={"convention": "mean nearest-site distance", "demandPoints": len(demand)},
    )
