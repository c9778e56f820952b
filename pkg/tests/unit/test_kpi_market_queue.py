"""
Tests for market and queue KPIs (K12-K14, utilization, Erlang-C proxy).
"""
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

T0 = 1735689600
MINUTE = 60


def rates(*pairs):
    """pairs: (offset_s, rate)."""
    from core.schema import RateObservation, RateSeries

    return RateSeries(observations=[RateObservation(timestamp=T0 + dt, rate=r) for dt, r in pairs])


def records(*waits_s, missing_join=0):
    from core.schema import QueueRecord

    result = [QueueRecord(vehicle_id=f"V{i}", t_join=T0 + i * 600, t_plug=T0 + i * 600 + w)
              for i, w in enumerate(waits_s)]
    result += [QueueRecord(vehicle_id=f"X{i}", t_plug=T0 + i * 600) for i in range(missing_join)]
    return result


class TestPriceInstability:
    """Tests for K12."""

    def test_two_observations(self):
        """Test CV of [0.30, 0.50] with the unbiased deviation."""
        from core.kpi_market_queue import price_instability

        assert price_instability(rates((0, 0.30), (60, 0.50)), T0, 3600) == pytest.approx(0.353553, abs=1e-6)

    def test_constant_and_sparse(self):
        """Test a flat series gives 0 and a single point is undefined."""
        from core.kpi_market_queue import price_instability

        assert price_instability(rates((0, 0.4), (60, 0.4), (120, 0.4)), T0, 3600) == 0.0
        assert price_instability(rates((0, 0.4)), T0, 3600) is None

    def test_zero_mean_undefined(self):
        """Test that an all-zero window is undefined rather than divided by zero."""
        from core.kpi_market_queue import price_instability

        assert price_instability(rates((0, 0.0), (60, 0.0)), T0, 3600) is None

    def test_series_and_summary(self):
        """Test the evaluation grid and the median summary."""
        from core.kpi_market_queue import price_instability_series, price_instability_summary
        from core.schema import AnalysisWindow

        series_rates = rates((0, 0.30), (60, 0.50), (3600, 0.4), (3660, 0.4))
        window = AnalysisWindow(t0=T0, t1=T0 + 7200)
        series = price_instability_series(series_rates, window, 3600, 3600)
        assert [t for t, _ in series] == [T0, T0 + 3600]
        summary = price_instability_summary(series, 3600)
        assert summary.raw == pytest.approx((0.353553 + 0.0) / 2, abs=1e-6)
        assert summary.unit == "cv"

    def test_invalid_window(self):
        """Test that a non-positive window is rejected."""
        from core.kpi_market_queue import price_instability

        with pytest.raises(ValueError):
            price_instability(rates((0, 0.4)), T0, 0)

    @settings(max_examples=1000, deadline=None)
    @given(st.lists(st.floats(0.01, 5.0), min_size=2, max_size=20), st.floats(0.1, 10.0))
    def test_scale_invariant(self, values, scale):
        """Test that scaling every rate leaves the CV unchanged."""
        from core.kpi_market_queue import price_instability

        base = rates(*[(i, v) for i, v in enumerate(values)])
        scaled = rates(*[(i, v * scale) for i, v in enumerate(values)])
        a = price_instability(base, T0, 3600)
        b = price_instability(scaled, T0, 3600)
        assert a == pytest.approx(b, rel=1e-9, abs=1e-12)


class TestPriceSurge:
    """Tests for K13."""

    def test_threshold_is_strict(self):
        """Test baseline [1, 2, 3] and current 4: PSI 2.0, not a surge at tau 2."""
        from core.kpi_market_queue import price_surge_intensity

        series = rates((0, 1.0), (60, 2.0), (120, 3.0), (180, 4.0))
        reading = price_surge_intensity(series, T0 + 180, 180, tau=2.0)
        assert reading.psi == pytest.approx(2.0)
        assert reading.surge is False
        assert price_surge_intensity(series, T0 + 180, 180, tau=1.9).surge is True

    def test_flat_and_short_baselines(self):
        """Test the undefined reasons for a flat or too-short baseline."""
        from core.kpi_market_queue import price_surge_intensity

        flat = rates((0, 1.0), (60, 1.0), (120, 5.0))
        assert price_surge_intensity(flat, T0 + 120, 120).reason == "flatBaseline"
        assert price_surge_intensity(flat, T0 + 60, 60).reason == "insufficientBaseline"
        assert price_surge_intensity(flat, T0 - 1, 60).reason == "noCurrentRate"

    @settings(max_examples=1000, deadline=None)
    @given(st.lists(st.floats(0.01, 5.0), min_size=3, max_size=15), st.floats(0.01, 5.0),
           st.floats(0.1, 10.0), st.floats(0.0, 5.0))
    def test_affine_equivariant(self, baseline, current, scale, shift):
        """Test that PSI is unchanged when every rate is mapped through a*x + b, a > 0."""
        from hypothesis import assume

        from core.kpi_market_queue import price_surge_intensity

        assume(max(baseline) - min(baseline) > 0.01)
        n = len(baseline)
        points = [(i * 60, v) for i, v in enumerate(baseline)] + [(n * 60, current)]
        original = price_surge_intensity(rates(*points), T0 + n * 60, n * 60)
        moved = price_surge_intensity(rates(*[(dt, v * scale + shift) for dt, v in points]), T0 + n * 60, n * 60)
        assert moved.psi == pytest.approx(original.psi, rel=1e-9, abs=1e-9)

    def test_summary_share_and_timestamps(self):
        """Test surge share over defined readings."""
        from core.kpi_market_queue import price_surge_series, price_surge_summary
        from core.schema import AnalysisWindow

        series = rates((0, 1.0), (60, 1.1), (120, 0.9), (180, 1.0), (240, 9.0))
        readings = price_surge_series(series, AnalysisWindow(t0=T0, t1=T0 + 300), 300, tau=2.0)
        value = price_surge_summary(readings, 2.0)
        assert value.diagnostics["surgeTimestamps"] == [T0 + 240]
        assert value.diagnostics["evaluated"] == 5


class TestWaitingTimes:
    """Tests for K14 and the nearest-rank percentiles."""

    def test_median_wait(self):
        """Test waits {10, 20, 30} min give a 20 min median."""
        from core.kpi_market_queue import waiting_stats

        stats = waiting_stats(records(10 * MINUTE, 30 * MINUTE, 20 * MINUTE))
        assert stats.median_s == 20 * MINUTE
        assert stats.join_coverage == 1.0

    def test_p95_of_one_to_hundred(self):
        """Test nearest-rank P95 of 1..100 is 95."""
        from core.kpi_market_queue import nearest_rank

        assert nearest_rank(list(range(1, 101)), 95) == 95
        assert nearest_rank([7], 50) == 7

    def test_missing_join_lowers_coverage(self):
        """Test that records without tJoin are excluded from waits but counted."""
        from core.kpi_market_queue import waiting_stats

        stats = waiting_stats(records(600, missing_join=1))
        assert stats.waits == 1
        assert stats.join_coverage == 0.5

    def test_no_join_signals(self):
        """Test that K14 is undefined when nobody joined."""
        from core.kpi_market_queue import queue_kpis
        from core.schema import AnalysisWindow

        values = queue_kpis(records(missing_join=3), AnalysisWindow(t0=T0, t1=T0 + 3600))
        assert values["K14"].diagnostics["undefinedReason"] == "noJoinSignals"
        assert values["JOIN_COVERAGE"].raw == 0.0
        assert values["UTILIZATION"].diagnostics["undefinedReason"] == "noServiceRate"


class TestUtilizationAndProxy:
    """Tests for utilization and the M/M/s waiting-time proxy."""

    def test_utilization(self):
        """Test lambda 4, mu 2, s 4 gives 0.5; lambda 8 saturates."""
        from core.kpi_market_queue import utilization

        assert utilization(4.0, 2.0, 4).rho == 0.5
        saturated = utilization(8.0, 2.0, 4)
        assert saturated.rho == 1.0
        assert saturated.saturated

    def test_bad_rates(self):
        """Test that zero service rate or chargers raise."""
        from core.kpi_market_queue import BadRates, utilization

        with pytest.raises(BadRates):
            utilization(1.0, 0.0, 1)
        with pytest.raises(BadRates):
            utilization(1.0, 1.0, 0)

    def test_mm1_closed_form(self):
        """Test M/M/1 with lambda 1, mu 2: Wq = 0.5 h."""
        from core.kpi_market_queue import mms_wait_proxy

        proxy = mms_wait_proxy(1.0, 2.0, 1)
        assert proxy.wq_h == pytest.approx(0.5)
        assert proxy.label == "MODEL-PROXY"
        assert "Poisson arrivals" in proxy.assumptions

    def test_unstable(self):
        """Test that rho >= 1 returns no wait with the flag set."""
        from core.kpi_market_queue import mms_wait_proxy

        proxy = mms_wait_proxy(4.0, 2.0, 2)
        assert proxy.unstable
        assert proxy.wq_h is None

    def test_large_charger_count(self):
        """Test that many chargers at light load neither overflow nor go negative."""
        from core.kpi_market_queue import mms_wait_proxy

        proxy = mms_wait_proxy(100.0, 1.0, 200)
        assert 0.0 <= proxy.wq_h < 1e-6

    def test_queue_kpis_with_rates(self):
        """Test arrival rate from the window and the proxy diagnostics."""
        from core.kpi_market_queue import queue_kpis
        from core.schema import AnalysisWindow

        window = AnalysisWindow(t0=T0, t1=T0 + 3600)
        values = queue_kpis(records(60, 120, 180, 240), window, service_rate=2.0, chargers=4)
        assert values["UTILIZATION"].raw == 0.5
        assert values["MMS_WQ"].diagnostics["label"] == "MODEL-PROXY"
        assert values["MMS_WQ"].raw > 0.0
