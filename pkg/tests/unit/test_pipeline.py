"""
Tests for the KPI pipeline.
Builds bundles with the simulation harness and checks the assembled report.
"""
import pytest

HOUR = 3600


def scenario(**overrides):
    from core.simharness import ScenarioSpec, generate_scenario

    spec = ScenarioSpec(seed=overrides.pop("seed", 1), **overrides)
    bundle, truth = generate_scenario(spec)
    return bundle, truth, spec.window


class TestComputeReport:
    """Tests for compute_report on generated scenarios."""

    def test_clean_scenario(self):
        """Test a scenario without stressors: full availability and a defined score."""
        from core.pipeline import compute_report
        from core.schema import WeightConfig

        bundle, truth, window = scenario()
        report = compute_report(bundle, window, WeightConfig.default())

        assert report.kpis["K9"].raw == 1.0
        assert report.kpis["K10"].raw == 1.0
        assert report.fault_rate == 0.0
        assert report.srs is not None
        assert report.srs.recompute() == pytest.approx(report.srs.srs, abs=1e-9)
        assert report.kpis["K15"].raw == report.srs.srs

    def test_injected_downtime_matches_truth(self):
        """Test service KPIs against the injected faults."""
        from core.pipeline import compute_report
        from core.schema import WeightConfig

        bundle, truth, window = scenario(seed=9, faults_per_connector=3, fault_duration_range_s=(1800, 3 * HOUR))
        report = compute_report(bundle, window, WeightConfig.default())

        for kpi in ("K9", "K10", "MTBF", "MDF", "K11", "IR_FULL", "MTTR"):
            assert report.kpis[kpi].raw == pytest.approx(truth.exact[kpi], abs=1e-9), kpi
        assert report.fault_rate == pytest.approx(truth.fault_rate, abs=1e-9)

    def test_structure_matches_truth(self):
        """Test structural KPIs against the generated inventory."""
        from core.pipeline import compute_report
        from core.schema import WeightConfig

        bundle, truth, window = scenario(seed=4, connector_powers_kw=[750.0, 1200.0], demand_points=6)
        report = compute_report(bundle, window, WeightConfig.default())
        for kpi in ("K1", "K2", "K3", "K4", "K5"):
            assert report.kpis[kpi].raw == pytest.approx(truth.exact[kpi], abs=1e-9), kpi
        assert report.kpis["HP_SHARE_750"].raw == 1.0
        assert "CSP" in report.kpis

    def test_flat_prices_have_zero_instability(self):
        """Test K12 = 0 on a flat profile."""
        from core.pipeline import compute_report
        from core.schema import WeightConfig

        bundle, truth, window = scenario(seed=6)
        report = compute_report(bundle, window, WeightConfig.default())
        assert report.kpis["K12"].raw == truth.exact["K12"] == 0.0
        assert report.kpis["K12"].normalized == 1.0

    def test_no_status_feed(self):
        """Test that without a status feed service KPIs are undefined and FaultRate is 0."""
        from core.pipeline import NOTE_NO_STATUS, compute_report
        from core.schema import WeightConfig

        bundle, _, window = scenario(seed=2, faults_per_connector=1)
        bundle = bundle.model_copy(update={"declared_feeds": {"inventory"}, "status_events": []})
        report = compute_report(bundle, window, WeightConfig.default())

        assert report.kpis["K9"].diagnostics["undefinedReason"] == "noStatusFeed"
        assert report.fault_rate == 0.0
        assert NOTE_NO_STATUS in report.notes
        assert report.hierarchy == []
        assert report.srs is not None

    def test_no_defined_members(self):
        """Test that SRS is undefined with a reason when every weighted KPI is."""
        from core.pipeline import compute_report
        from core.schema import WeightConfig

        bundle, _, window = scenario(seed=2)
        bundle = bundle.model_copy(update={"declared_feeds": {"inventory"}, "status_events": []})
        config = WeightConfig(weights={"K9": 0.5, "K10": 0.5})
        report = compute_report(bundle, window, config)

        assert report.srs is None
        assert report.srs_undefined_reason == "noDefinedKpis"
        assert not report.kpis["K15"].is_defined

    def test_iri_from_standard_feeds(self):
        """Test that a status-only bundle scores the Tier A share."""
        from core.composite import KPI_CATALOG
        from core.pipeline import compute_report
        from core.schema import WeightConfig

        bundle, _, window = scenario(seed=3)
        report = compute_report(bundle, window, WeightConfig.default())
        tier_a = sum(1 for e in KPI_CATALOG if e.tier.value == "A")
        assert report.standard_feeds == ["datex_static", "datex_status"]
        assert report.iri.iri_percent == pytest.approx(100.0 * tier_a / len(KPI_CATALOG))

    def test_hierarchy_level(self):
        """Test the station-level breakdown."""
        from core.pipeline import compute_report
        from core.schema import HierarchyLevel, WeightConfig

        bundle, _, window = scenario(seed=5, stations=2)
        report = compute_report(bundle, window, WeightConfig.default(), HierarchyLevel.STATION)
        assert report.level is HierarchyLevel.STATION
        assert [n.node_id for n in report.hierarchy] == ["SIM-SITE-S1", "SIM-SITE-S2"]

    def test_queue_and_cyber(self):
        """Test that queue and cyber feeds feed K14 and the cyber sub-indices."""
        from core.pipeline import compute_report
        from core.schema import WeightConfig

        bundle, truth, window = scenario(seed=8, arrival_rate_per_h=1.5, heartbeats_expected=200,
                                         heartbeat_miss_probability=0.05, pings_expected=100,
                                         transactions=300, timeout_probability=0.01, tls_attempts=100)
        report = compute_report(bundle, window, WeightConfig.default())
        assert report.kpis["K14"].raw == truth.exact["K14"]
        assert report.kpis["LKFR"].raw == pytest.approx(truth.exact["LKFR"])
        assert report.kpis["CYBER_LINK"].is_defined
        assert report.kpis["UTILIZATION"].diagnostics["undefinedReason"] == "noServiceRate"

    def test_deterministic(self):
        """Test that the same bundle gives an identical report."""
        from core.pipeline import compute_report
        from core.schema import WeightConfig

        bundle, _, window = scenario(seed=12, faults_per_connector=2, grid_outages=1, comms_outages=1)
        assert compute_report(bundle, window, WeightConfig.default()) == \
            compute_report(bundle, window, WeightConfig.default())


class TestReportNotes:
    """Tests for the conventions noted in the report."""

    def test_recovery_from_k8_alone_is_noted(self):
        """Test that a report without certificate data flags the K8-only recovery index."""
        from core.pipeline import NOTE_RECOVERY_K8_ONLY, compute_report
        from core.schema import WeightConfig

        bundle, _, window = scenario(seed=4, comms_outages=1)
        report = compute_report(bundle, window, WeightConfig.default())
        recovery = report.kpis["CYBER_RECOVERY"]
        assert recovery.is_defined
        assert list(recovery.diagnostics["components"]) == ["COSC_time"]
        assert NOTE_RECOVERY_K8_ONLY in report.notes

    def test_recovery_with_certificates_is_not_noted(self):
        """Test that certificate deployment data removes the K8-only note."""
        from core.pipeline import NOTE_RECOVERY_K8_ONLY, compute_report
        from core.schema import WeightConfig

        bundle, _, window = scenario(seed=4, comms_outages=1, cert_devices=3)
        report = compute_report(bundle, window, WeightConfig.default())
        assert "CDL_norm" in report.kpis["CYBER_RECOVERY"].diagnostics["components"]
        assert NOTE_RECOVERY_K8_ONLY not in report.notes

    def test_surge_share_is_noted(self):
        """Test that a defined K13 carries the share-of-defined-PSI note and basis."""
        from core.pipeline import NOTE_SURGE_SHARE, compute_report
        from core.schema import WeightConfig

        bundle, _, window = scenario(seed=3, price_profile=[0.4, 0.5], surge_count=2, surge_multiplier=3.0)
        report = compute_report(bundle, window, WeightConfig.default())
        k13 = report.kpis["K13"]
        assert k13.is_defined
        assert k13.diagnostics["basis"] == "surgeShareOfDefinedPsi"
        assert k13.raw == pytest.approx(len(k13.diagnostics["surgeTimestamps"]) / k13.diagnostics["defined"])
        assert NOTE_SURGE_SHARE in report.notes

    def test_flat_prices_have_no_surge_note(self):
        """Test that a flat profile leaves K13 undefined and unnoted."""
        from core.pipeline import NOTE_SURGE_SHARE, compute_report
        from core.schema import WeightConfig

        bundle, _, window = scenario(seed=6)
        report = compute_report(bundle, window, WeightConfig.default())
        assert not report.kpis["K13"].is_defined
        assert NOTE_SURGE_SHARE not in report.notes
