"""
Cross-checks between the Erlang-C proxy and the discrete-event simulator.
These runs use a million arrivals each and take a few seconds.
"""
import pytest

ARRIVALS = 1_000_000
BATCHES = 20
SE_BOUND = 3.0


class TestErlangCAgainstSimulation:
    """The closed-form proxy must agree with a long FIFO simulation."""

    @pytest.mark.parametrize("servers,rho", [(2, 0.5), (2, 0.75), (4, 0.9)])
    def test_mean_wait_within_standard_errors(self, servers, rho):
        """Test simulated Wq against the proxy at mu = 1."""
        from core.kpi_market_queue import mms_wait_proxy
        from core.simharness import mms_simulator

        arrival_rate = rho * servers
        proxy = mms_wait_proxy(arrival_rate, 1.0, servers)
        result = mms_simulator(arrival_rate, 1.0, servers, horizon=ARRIVALS,
                               seed=servers * 100 + int(rho * 100), batches=BATCHES)

        assert result.wq_standard_error > 0.0
        assert abs(result.wq_mean - proxy.wq_h) <= SE_BOUND * result.wq_standard_error
        assert result.rho_empirical == pytest.approx(rho, rel=0.01)

    def test_two_chargers_relative_error(self):
        """Test s = 2, lambda 3, mu 2 within three standard errors and 5 %."""
        from core.kpi_market_queue import mms_wait_proxy
        from core.simharness import mms_simulator

        proxy = mms_wait_proxy(3.0, 2.0, 2)
        result = mms_simulator(3.0, 2.0, 2, horizon=ARRIVALS, seed=7, batches=BATCHES)
        assert abs(result.wq_mean - proxy.wq_h) <= SE_BOUND * result.wq_standard_error
        assert result.wq_mean == pytest.approx(proxy.wq_h, rel=0.05)
