"""
Cybersecurity KPIs.
Link-health rates (HFR, PFR, LKFR, CTR, SSES), certificate deployment latency,
telemetry freshness, time-sync health, the Day-1 indicator set and the two
cyber sub-indices fed into the composite score.
"""
import logging
from collections import defaultdict
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from core.observability import observe
from core.schema import CyberTelemetry, KpiId, KpiValue

logger = logging.getLogger(__name__)

THSR_ALIAS = "THSR"

PATCH_TARGET_DAYS = 14.0
SEC_MTTR_TARGET_H = 4.0
CERT_HEALTH_TARGET = 0.99
VULN_CLOSURE_TARGET = 0.90


def _rate(kpi_id: str, part: int, whole: int, reason: str, **diagnostics) -> KpiValue:
    if whole <= 0:
        return KpiValue.undefined(kpi_id, reason, **diagnostics)
    return KpiValue.fraction(kpi_id, part / whole, numerator=part, denominator=whole, **diagnostics)


@observe(kpi_id=KpiId.LKFR.value)
def link_keepalive_failure(tel: CyberTelemetry) -> Dict[str, KpiValue]:
    """
    Heartbeat and ping failure rates and their equal-weight composite LKFR.

    When only one component is defined, LKFR equals it and is flagged `partial`.
    """
    hfr = _rate(KpiId.HFR.value, tel.heartbeats_missed, tel.heartbeats_expected, "noHeartbeatsExpected",
                latenessThresholdS=tel.lateness_threshold_s)
    pfr = _rate(KpiId.PFR.value, tel.pings_missed, tel.pings_expected, "noPingsExpected")

    defined = [v.raw for v in (hfr, pfr) if v.is_defined]
    if not defined:
        lkfr = KpiValue.undefined(KpiId.LKFR.value, "noKeepaliveCounts")
    elif len(defined) == 1:
        lkfr = KpiValue.fraction(KpiId.LKFR.value, defined[0], partial=True)
    else:
        lkfr = KpiValue.fraction(KpiId.LKFR.value, 0.5 * hfr.raw + 0.5 * pfr.raw)
    return {KpiId.HFR.value: hfr, KpiId.PFR.value: pfr, KpiId.LKFR.value: lkfr}


@observe(kpi_id=KpiId.CTR.value)
def comm_timeout_rate(tel: CyberTelemetry) -> KpiValue:
    """
    Timeouts per transaction, also broken down by message family.

    Without global counters the families are pooled into the global rate.
    """
    by_family = {
        family: (counts.timeouts / counts.transactions if counts.transactions else None)
        for family, counts in sorted(tel.timeouts_by_family.items())
    }
    timeouts, transactions = tel.timeouts, tel.transactions
    pooled = False
    if transactions == 0 and tel.timeouts_by_family:
        timeouts = sum(c.timeouts for c in tel.timeouts_by_family.values())
        transactions = sum(c.transactions for c in tel.timeouts_by_family.values())
        pooled = True
    return _rate(KpiId.CTR.value, timeouts, transactions, "noTransactions",
                 byFamily=by_family, pooledFromFamilies=pooled)


@observe(kpi_id=KpiId.SSES.value)
def secure_session_success(tel: CyberTelemetry) -> KpiValue:
    """TLS session success rate; failure codes are passed through. Also reported as THSR."""
    return _rate(KpiId.SSES.value, tel.tls_successes, tel.tls_attempts, "noTlsAttempts",
                 failureCodes=dict(sorted(tel.tls_failure_codes.items())), alias=THSR_ALIAS)


@observe(kpi_id=KpiId.CDL.value)
def cert_deployment_latency(tel: CyberTelemetry) -> KpiValue:
    """
    Median seconds from certificate issuance to acceptance per device.

    Devices that never accepted are counted, not folded into the median.
    """
    never = sorted(d for d, ts in tel.cert_accepted_at.items() if ts is None)
    if tel.cert_issued_at is None:
        return KpiValue.undefined(KpiId.CDL.value, "noIssuance", unit="s", neverAccepted=len(never))

    delays = []
    for device, accepted in sorted(tel.cert_accepted_at.items()):
        if accepted is None:
            continue
        if accepted < tel.cert_issued_at:
            logger.warning(f"Device {device} accepted its certificate before issuance; ignored")
            continue
        delays.append(accepted - tel.cert_issued_at)

    if never:
        logger.warning(f"{len(never)} device(s) never accepted the certificate")
    if not delays:
        return KpiValue.undefined(KpiId.CDL.value, "noAcceptances", unit="s",
                                  neverAccepted=len(never), neverAcceptedDevices=never)
    return KpiValue(
        kpi_id=KpiId.CDL.value, raw=float(np.median(delays)), unit="s",
        diagnostics={"accepted": len(delays), "neverAccepted": len(never),
                     "neverAcceptedDevices": never},
    )


@observe(kpi_id=KpiId.TFS.value)
def telemetry_freshness(tel: CyberTelemetry) -> KpiValue:
    """Share of messages delivered within their class SLA."""
    messages = tel.message_latencies
    if not messages:
        return KpiValue.undefined(KpiId.TFS.value, "noMessages")
    per_class: Dict[str, List[bool]] = defaultdict(list)
    for m in messages:
        per_class[m.message_class].append(m.latency_s <= m.sla_limit_s)
    within = sum(sum(flags) for flags in per_class.values())
    return KpiValue.fraction(
        KpiId.TFS.value, within / len(messages), messages=len(messages),
        byClass={cls: sum(flags) / len(flags) for cls, flags in sorted(per_class.items())},
    )


@observe(kpi_id=KpiId.TSH.value)
def time_sync_health(tel: CyberTelemetry, tolerance_s: float = 2.0) -> KpiValue:
    """Share of devices whose absolute clock error is within `tolerance_s`."""
    if not tel.clock_errors:
        return KpiValue.undefined(KpiId.TSH.value, "noDevices", toleranceS=tolerance_s)
    within = sum(1 for e in tel.clock_errors.values() if abs(e) <= tolerance_s)
    return KpiValue.fraction(KpiId.TSH.value, within / len(tel.clock_errors),
                             devices=len(tel.clock_errors), toleranceS=tolerance_s)


# ============================================================================
# Day-1 indicators
# ============================================================================

def _with_target(value: KpiValue, target: float, comparison: str) -> KpiValue:
    if not value.is_defined:
        return value
    passed = value.raw <= target if comparison == "<=" else value.raw >= target
    diagnostics = {**value.diagnostics, "target": target, "comparison": comparison, "pass": passed}
    return value.model_copy(update={"diagnostics": diagnostics})


def _patch_latency(tel: CyberTelemetry) -> KpiValue:
    if not tel.patch_delays:
        return KpiValue.undefined(KpiId.PATCH_LATENCY.value, "noPatches", unit="d")
    by_severity: Dict[str, List[float]] = defaultdict(list)
    for patch in tel.patch_delays:
        by_severity[patch.severity.lower()].append(patch.days)
    medians = {sev: float(np.median(days)) for sev, days in sorted(by_severity.items())}
    if "critical" in by_severity:
        basis, raw = "critical", medians["critical"]
    else:
        basis, raw = "all", float(np.median([p.days for p in tel.patch_delays]))
    value = KpiValue(kpi_id=KpiId.PATCH_LATENCY.value, raw=raw, unit="d",
                     diagnostics={"bySeverity": medians, "basis": basis})
    return _with_target(value, PATCH_TARGET_DAYS, "<=")


def _incident_times(tel: CyberTelemetry) -> Tuple[KpiValue, KpiValue]:
    incidents = tel.security_incidents
    if not incidents:
        return (
            KpiValue.undefined(KpiId.SEC_MTTD.value, "noIncidents", unit="h"),
            KpiValue.undefined(KpiId.SEC_MTTR.value, "noIncidents", unit="h"),
        )
    detect = [i.detect_delay_h for i in incidents]
    recover = [i.recover_delay_h for i in incidents]
    mttd = KpiValue(kpi_id=KpiId.SEC_MTTD.value, raw=float(np.mean(detect)), unit="h",
                    diagnostics={"medianH": float(np.median(detect)), "incidents": len(incidents)})
    mttr = KpiValue(kpi_id=KpiId.SEC_MTTR.value, raw=float(np.mean(recover)), unit="h",
                    diagnostics={"medianH": float(np.median(recover)), "incidents": len(incidents)})
    return mttd, _with_target(mttr, SEC_MTTR_TARGET_H, "<=")


def _network_separation(tel: CyberTelemetry) -> KpiValue:
    if tel.network_separation is None:
        return KpiValue.undefined(KpiId.NET_SEPARATION.value, "notDeclared", unit="flag")
    sep = tel.network_separation
    return KpiValue(kpi_id=KpiId.NET_SEPARATION.value, raw=1.0 if sep.in_place else 0.0,
                    normalized=1.0 if sep.in_place else 0.0, unit="flag",
                    diagnostics={"notes": list(sep.notes)})


@observe(name="day1_indicators")
def day1_indicators(tel: CyberTelemetry) -> Dict[str, KpiValue]:
    """
    Day-1 security indicators with their targets and pass flags.

    Targets: patch latency <= 14 d, security MTTR <= 4 h, certificate health
    >= 99 %, vulnerability closure >= 90 %. MFA coverage, firmware adoption and
    MTTD are reported without a target.
    """
    mttd, mttr = _incident_times(tel)
    closure = _with_target(
        _rate(KpiId.VULN_CLOSURE.value, tel.vulns_closed_in_sla_count, tel.vulns_due_count, "noVulnsDue"),
        VULN_CLOSURE_TARGET, ">=",
    )
    cert_health = _with_target(
        _rate(KpiId.CERT_HEALTH.value, tel.cert_healthy, tel.cert_devices_total, "noCertDevices"),
        CERT_HEALTH_TARGET, ">=",
    )
    return {
        KpiId.PATCH_LATENCY.value: _patch_latency(tel),
        KpiId.SEC_MTTD.value: mttd,
        KpiId.SEC_MTTR.value: mttr,
        KpiId.VULN_CLOSURE.value: closure,
        KpiId.MFA_COVERAGE.value: _rate(KpiId.MFA_COVERAGE.value, tel.mfa_privileged_covered,
                                        tel.mfa_privileged_total, "noPrivilegedAccounts"),
        KpiId.CERT_HEALTH.value: cert_health,
        KpiId.FIRMWARE_ADOPTION.value: _rate(KpiId.FIRMWARE_ADOPTION.value, tel.firmware_signed_enforced,
                                             tel.firmware_devices_total, "noFirmwareDevices"),
        KpiId.NET_SEPARATION.value: _network_separation(tel),
    }


def cyber_kpis(tel: CyberTelemetry, clock_tolerance_s: float = 2.0) -> Dict[str, KpiValue]:
    """Every telemetry-derived cyber KPI keyed by id."""
    values = dict(link_keepalive_failure(tel))
    values[KpiId.CTR.value] = comm_timeout_rate(tel)
    values[KpiId.SSES.value] = secure_session_success(tel)
    values[KpiId.CDL.value] = cert_deployment_latency(tel)
    values[KpiId.TFS.value] = telemetry_freshness(tel)
    values[KpiId.TSH.value] = time_sync_health(tel, clock_tolerance_s)
    values.update(day1_indicators(tel))
    return values


# ============================================================================
# Sub-indices
# ============================================================================

def _mean_of(kpi_id: str, parts: Mapping[str, Optional[float]]) -> KpiValue:
    defined = {name: v for name, v in parts.items() if v is not None}
    dropped = sorted(set(parts) - set(defined))
    if not defined:
        return KpiValue.undefined(kpi_id, "allUndefined", dropped=dropped)
    if dropped:
        logger.info(f"{kpi_id}: dropped undefined components {dropped}")
    return KpiValue.fraction(kpi_id, float(np.mean(list(defined.values()))),
                             components=defined, dropped=dropped)


def cyber_sub_indices(values: Mapping[str, KpiValue]) -> Tuple[KpiValue, KpiValue]:
    """
    Link-health index mean(1 - LKFR, 1 - CTR, SSES) and recovery index
    mean(normalized CDL, COSC_time). Undefined components are dropped and listed.

    `values` maps KPI ids to values; CDL must already carry its normalized value.
    """
    def raw(kpi_id: str) -> Optional[float]:
        v = values.get(kpi_id)
        return v.raw if v is not None and v.is_defined else None

    lkfr, ctr = raw(KpiId.LKFR.value), raw(KpiId.CTR.value)
    link = _mean_of(KpiId.CYBER_LINK.value, {
        "1-LKFR": None if lkfr is None else 1.0 - lkfr,
        "1-CTR": None if ctr is None else 1.0 - ctr,
        KpiId.SSES.value: raw(KpiId.SSES.value),
    })
    cdl = values.get(KpiId.CDL.value)
    recovery = _mean_of(KpiId.CYBER_RECOVERY.value, {
        "CDL_norm": cdl.normalized if cdl is not None else None,
        "COSC_time": raw(KpiId.K8.value),
    })
    return link, recovery
