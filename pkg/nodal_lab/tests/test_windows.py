"""Tests for plateau finding and frequency windows."""
import logging
import math

import numpy as np
import pytest

from nodal_lab.errors import LowFrequencyError, PreconditionError, SamplingTooCoarse
from nodal_lab.field import make_harmonic_polynomial
from nodal_lab.windows import find_frequency_window, find_plateau, monotone_envelope, window_holds


def re_z(d):
    return make_harmonic_polynomial(2, [{"degree": d, "part": "cos", "weight": 1.0}])


def random_log_profile(rng):
    """ln f = 1 + g with g >= 0 nondecreasing on [0, 1]: a random staircase or L t^q; returns (ln f, L)."""
    total = rng.uniform(0.0, 8.0)
    if rng.random() < 0.5:
        jumps = rng.uniform(0.0, 1.0, size=int(rng.integers(1, 9)))
        heights = total * rng.dirichlet(np.ones(len(jumps)))

        def staircase(t):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            return 1.0 + (heights[None, :] * (t[:, None] >= jumps[None, :])).sum(axis=1)

        return staircase, total
    q = rng.uniform(0.5, 4.0)
    return (lambda t: 1.0 + total * np.atleast_1d(np.asarray(t, dtype=float)) ** q), total


class TestFindPlateau:
    """Tests for the plateau finder on sampled monotone functions."""

    def test_constant_function(self):
        """Test that f = e stops at the midpoint of the first step."""
        ts = np.linspace(0.0, 1.0, 101)
        result = find_plateau(ts, np.full(len(ts), math.e), 0.0, 1.0)
        assert result.step == 1
        assert result.x == pytest.approx(0.05)
        assert result.N == pytest.approx(math.e)
        assert result.window == pytest.approx((0.0, 0.1))

    def test_fast_growth_takes_a_second_step(self):
        """Test that a first step growing by more than e is skipped."""
        ts = np.linspace(0.0, 1.0, 100001)
        values = np.exp(40.0 * ts) + math.e
        result = find_plateau(ts, values, 0.0, 1.0)
        assert result.step == 2
        assert result.x < 0.5
        lo, hi = result.window
        assert result.x == pytest.approx(0.5 * (lo + hi))
        inside = values[(ts >= lo) & (ts <= hi)]
        assert inside.min() >= result.N
        assert inside.max() <= math.e * result.N

    def test_sandwich_on_random_monotone_functions(self):
        """Test N <= f <= e^1.05 N on the returned window, re-read on a 10x denser grid."""
        for seed in range(1000):
            rng = np.random.default_rng(seed)
            log_f, total = random_log_profile(rng)
            count = int(math.ceil(40.0 * (1.0 + total) ** 2 * 1.25)) + 2
            ts = np.linspace(0.0, 1.0, count)
            result = find_plateau(ts, np.exp(log_f(ts)), 0.0, 1.0)
            lo, hi = result.window
            assert lo <= result.x <= hi
            assert result.x < 0.5
            dense = np.linspace(0.0, 1.0, 10 * (count - 1) + 1)
            inside = np.exp(log_f(dense[(dense >= lo) & (dense <= hi)]))
            assert len(inside) > 0
            assert np.all(inside >= result.N * (1 - 1e-12)), f"seed {seed}"
            assert np.all(inside <= math.exp(1.05) * result.N), f"seed {seed}"

    def test_coarse_sampling(self):
        """Test that gaps above (b - a)/(40 ln^2 f(b)) are rejected."""
        with pytest.raises(SamplingTooCoarse):
            find_plateau([0.0, 0.5, 1.0], [math.e] * 3, 0.0, 1.0)

    def test_samples_must_cover_interval(self):
        """Test that samples not reaching a are rejected."""
        ts = np.linspace(0.1, 1.0, 200)
        with pytest.raises(SamplingTooCoarse):
            find_plateau(ts, np.full(len(ts), math.e), 0.0, 1.0)

    def test_decreasing_function_rejected(self):
        """Test that a decreasing input is rejected."""
        ts = np.linspace(0.0, 1.0, 101)
        with pytest.raises(PreconditionError):
            find_plateau(ts, 10.0 - ts, 0.0, 1.0)

    def test_values_below_e_rejected(self):
        """Test that f < e on [a, b] is rejected."""
        ts = np.linspace(0.0, 1.0, 101)
        with pytest.raises(PreconditionError):
            find_plateau(ts, np.full(len(ts), 2.0), 0.0, 1.0)

    def test_envelope_is_running_max(self):
        """Test the monotone envelope."""
        np.testing.assert_array_equal(monotone_envelope([3.0, 2.0, 5.0, 4.0]), [3.0, 3.0, 5.0, 5.0])


class TestFrequencyWindow:
    """Tests for the frequency window around a ball."""

    def setup_method(self):
        self.f = re_z(30)

    def test_constant_frequency_window(self):
        """Test the window of Re z^30, whose frequency is constant 30.5."""
        window = find_frequency_window(self.f, [0.0, 0.0], 0.5)
        assert 0.5 <= window.s < 0.75
        assert 15.0 <= window.N <= 30.0
        assert window.N == pytest.approx(30.5 / 2)
        assert window.rel_halfwidth == pytest.approx(1e-3 / math.log(window.N) ** 2)
        assert window.beta_min == pytest.approx(30.5, abs=1e-9)
        assert window.beta_max <= 2 * math.e * window.N
        assert window.bracket_holds
        assert window.max_rel_halfwidth >= window.rel_halfwidth

    def test_window_rechecks(self):
        """Test that the reported window passes an independent re-check."""
        window = find_frequency_window(self.f, [0.0, 0.0], 0.5)
        assert window_holds(self.f, window, 16)

    def test_low_frequency_gate(self):
        """Test that beta(p, r/2) below the gate raises."""
        with pytest.raises(LowFrequencyError) as info:
            find_frequency_window(re_z(1), [0.0, 0.0], 0.5)
        assert info.value.exit_code == 2

    def test_gate_can_be_lowered(self):
        """Test that a lower gate admits a moderate frequency."""
        window = find_frequency_window(re_z(8), [0.0, 0.0], 0.5, gate=4.0)
        assert window.N == pytest.approx(8.5 / 2)

    def test_failed_bracket_is_logged(self, monkeypatch, caplog):
        """Test that a frequency dipping at 3r/2 keeps the window but logs the failed bracket."""
        def dipping_beta(f, p, t, order=None):
            return 5.0 if 0.6 <= t < 0.9 else 40.0

        monkeypatch.setattr("nodal_lab.windows.frequency_beta", dipping_beta)
        with caplog.at_level(logging.WARNING, logger="nodal_lab.windows"):
            window = find_frequency_window(self.f, [0.0, 0.0], 0.5)
        assert window.N == pytest.approx(20.0)
        assert window.beta_at_three_halves_r == 5.0
        assert not window.bracket_holds
        assert "Window bracket" in caplog.text

    def test_bracket_holds_quietly(self, caplog):
        """Test that a holding bracket logs no warning."""
        with caplog.at_level(logging.WARNING, logger="nodal_lab.windows"):
            window = find_frequency_window(self.f, [0.0, 0.0], 0.5)
        assert window.bracket_holds
        assert "Window bracket" not in caplog.text

    def test_nonpositive_radius(self):
        """Test that r <= 0 is rejected."""
        with pytest.raises(PreconditionError):
            find_frequency_window(self.f, [0.0, 0.0], 0.0)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
