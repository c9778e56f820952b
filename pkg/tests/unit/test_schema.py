"""
Tests for core schema models.
Tests the inventory tree, status timelines, KPI values and weight config.
"""
import pytest
from pydantic import ValidationError


def make_inventory(points=2, connectors=1, power=1000.0):
    from core.schema import Connector, Coordinates, RefillPoint, SiteInventory, Station

    refill_points = []
    for p in range(points):
        point_id = f"RP{p + 1}"
        refill_points.append(RefillPoint(
            refill_point_id=point_id,
            station_id="ST1",
            connectors=[
                Connector(connector_id=f"{point_id}-C{c + 1}", connector_type="MCS",
                          max_power_kw=power, refill_point_id=point_id)
                for c in range(connectors)
            ],
        ))
    return SiteInventory(
        site_id="SITE1",
        coordinates=Coordinates(lat=52.0, lon=5.0),
        stations=[Station(station_id="ST1", site_id="SITE1", refill_points=refill_points)],
    )


class TestStatusLabels:
    """Tests for the closed status set."""

    def test_known_label_parses(self):
        """Test that feed labels map onto their enum members."""
        from core.schema import ComponentStatus

        assert ComponentStatus.parse("outOfService") is ComponentStatus.OUT_OF_SERVICE
        assert ComponentStatus.parse(ComponentStatus.FAULT) is ComponentStatus.FAULT

    def test_unknown_label_becomes_unknown(self, caplog):
        """Test that unrecognised labels degrade to 'unknown' with a warning."""
        from core.schema import ComponentStatus

        assert ComponentStatus.parse("charging-ish") is ComponentStatus.UNKNOWN
        assert "charging-ish" in caplog.text


class TestInventory:
    """Tests for the static site hierarchy."""

    def test_accessors_walk_the_tree(self):
        """Test refill point, connector and ancestor lookups."""
        inv = make_inventory(points=2, connectors=2)

        assert [p.refill_point_id for p in inv.refill_points()] == ["RP1", "RP2"]
        assert len(inv.connectors()) == 4
        assert inv.ancestors("RP2-C1") == ["RP2-C1", "RP2", "ST1", "SITE1"]

    def test_component_levels(self):
        """Test that every identifier is mapped to its level."""
        from core.schema import HierarchyLevel

        levels = make_inventory().component_levels()

        assert levels["SITE1"] is HierarchyLevel.SITE
        assert levels["ST1"] is HierarchyLevel.STATION
        assert levels["RP1"] is HierarchyLevel.POINT
        assert levels["RP1-C1"] is HierarchyLevel.CONNECTOR

    def test_connector_under_wrong_parent_rejected(self):
        """Test that a connector claiming another parent fails validation."""
        from core.schema import Connector, Coordinates, RefillPoint, SiteInventory, Station

        bad = Connector(connector_id="C1", connector_type="MCS", max_power_kw=1000, refill_point_id="RP9")
        with pytest.raises(ValidationError, match="not under"):
            SiteInventory(
                site_id="S", coordinates=Coordinates(lat=0, lon=0),
                stations=[Station(station_id="ST", site_id="S", refill_points=[
                    RefillPoint(refill_point_id="RP1", station_id="ST", connectors=[bad])])],
            )

    def test_energy_mix_over_one_rejected(self):
        """Test that energy ratios summing above 1 fail validation."""
        from core.schema import Coordinates, EnergySourceRatio, SiteInventory

        with pytest.raises(ValidationError, match="energy mix"):
            SiteInventory(
                site_id="S", coordinates=Coordinates(lat=0, lon=0),
                energy_mix=[EnergySourceRatio(source="solar", ratio=0.7),
                            EnergySourceRatio(source="wind", ratio=0.4)],
            )

    def test_camel_case_aliases(self):
        """Test that feed documents validate with camelCase names."""
        from core.schema import Connector

        connector = Connector.model_validate(
            {"connectorId": "C1", "connectorType": "MCS", "maxPowerKw": 1200, "refillPointId": "RP1"})

        assert connector.max_power_kw == 1200
        assert connector.model_dump(by_alias=True)["maxPowerKw"] == 1200

    def test_models_are_frozen(self):
        """Test that models cannot be mutated after construction."""
        from core.schema import Coordinates

        point = Coordinates(lat=1.0, lon=2.0)
        with pytest.raises(ValidationError):
            point.lat = 3.0


class TestWindowAndIntervals:
    """Tests for analysis windows and intervals."""

    def test_window_bounds(self):
        """Test that windows are closed-open and ordered."""
        from core.schema import AnalysisWindow

        window = AnalysisWindow(t0=0, t1=100)
        assert window.duration == 100
        assert window.contains(0)
        assert not window.contains(100)
        with pytest.raises(ValidationError):
            AnalysisWindow(t0=10, t1=10)

    def test_interval_order(self):
        """Test that an interval cannot end before it starts."""
        from core.schema import Interval

        assert Interval(start=5, end=8).duration == 3
        with pytest.raises(ValidationError):
            Interval(start=8, end=5)


class TestStatusTimeline:
    """Tests for piecewise-constant status timelines."""

    def make_timeline(self):
        from core.schema import ComponentStatus, StatusTimeline, TimelineSegment

        return StatusTimeline(component_id="C1", segments=[
            TimelineSegment(start=0, end=10, status=ComponentStatus.AVAILABLE),
            TimelineSegment(start=10, end=15, status=ComponentStatus.FAULT),
            TimelineSegment(start=15, end=20, status=ComponentStatus.AVAILABLE),
        ])

    def test_status_at(self):
        """Test point lookups including the segment boundary."""
        from core.schema import ComponentStatus

        timeline = self.make_timeline()
        assert timeline.status_at(9) is ComponentStatus.AVAILABLE
        assert timeline.status_at(10) is ComponentStatus.FAULT

    def test_time_in_and_spans(self):
        """Test time accounting per status set."""
        from core.schema import ComponentStatus

        timeline = self.make_timeline()
        assert timeline.time_in({ComponentStatus.AVAILABLE}) == 15
        assert timeline.spans_in({ComponentStatus.FAULT}) == [(10, 15)]


class TestKpiValue:
    """Tests for KPI value construction."""

    def test_fraction_clamps_normalized(self):
        """Test that fraction values carry a clamped normalized copy."""
        from core.schema import KpiValue

        value = KpiValue.fraction("K9", 0.75, exposureS=100)
        assert value.raw == 0.75
        assert value.normalized == 0.75
        assert value.diagnostics == {"exposureS": 100}

    def test_undefined_records_reason(self):
        """Test that undefined values keep None and a reason."""
        from core.schema import KpiValue

        value = KpiValue.undefined("K7", "noOutages", unit="fraction")
        assert not value.is_defined
        assert value.normalized is None
        assert value.diagnostics["undefinedReason"] == "noOutages"

    def test_non_finite_raw_rejected(self):
        """Test that NaN never stands in for an undefined value."""
        from core.schema import KpiValue

        with pytest.raises(ValidationError):
            KpiValue(kpi_id="K1", raw=float("nan"))


class TestWeightConfig:
    """Tests for the composite weight config."""

    def test_default_weights_sum_to_one(self):
        """Test the default split: 0.90 shared, 0.05 per cyber sub-index."""
        from core.schema import DEFAULT_SELECTION, KpiId, WeightConfig

        config = WeightConfig.default()
        assert sum(config.weights.values()) == pytest.approx(1.0, abs=1e-9)
        assert config.weights[KpiId.CYBER_LINK.value] == 0.05
        assert config.weights[KpiId.K1.value] == pytest.approx(0.90 / len(DEFAULT_SELECTION))
        assert config.w_fault == 0.1

    def test_weights_must_sum_to_one(self):
        """Test that inconsistent weights are rejected."""
        from core.schema import WeightConfig

        with pytest.raises(ValidationError, match="sum"):
            WeightConfig(weights={"K1": 0.5, "K2": 0.4})

    def test_normalization_fallbacks(self):
        """Test that unbounded KPIs get inverted min-max defaults."""
        from core.schema import NormalizationKind, WeightConfig

        config = WeightConfig.default()
        assert config.normalization_for("K11").kind is NormalizationKind.INVERTED_MINMAX
        assert config.normalization_for("K11").hi == 3600.0
        assert config.normalization_for("K9").kind is NormalizationKind.IDENTITY

    def test_maintenance_exclusion_defaults(self):
        """Test which KPIs exclude planned maintenance by default."""
        from core.schema import WeightConfig

        config = WeightConfig.default()
        assert config.excludes_maintenance("K9")
        assert config.excludes_maintenance("K15")
        assert not config.excludes_maintenance("K7")

    @pytest.mark.parametrize("field,value", [
        ("service_rate_per_charger", 0.0),
        ("service_rate_per_charger", -1.5),
        ("chargers", 0),
        ("piv_window_s", 0),
        ("psi_baseline_s", -60),
        ("n_target", 0),
    ])
    def test_thresholds_reject_non_positive(self, field, value):
        """Test that rates, charger counts and windows must be positive."""
        from core.schema import Thresholds

        with pytest.raises(ValidationError):
            Thresholds(**{field: value})

    def test_thresholds_accept_queue_model_inputs(self):
        """Test that a positive service rate and charger count pass."""
        from core.schema import Thresholds

        thresholds = Thresholds(service_rate_per_charger=1.5, chargers=4)
        assert thresholds.chargers == 4
