import math
import warnings

import pytest

from edgeperf import energy
from edgeperf.energy import (
    CostBreakdown,
    CostParams,
    UsageSample,
    cost_per_million_tokens,
    decode_energy,
    decode_power,
    prefill_energy_per_token,
    prefill_power,
    total_energy,
)
from edgeperf.errors import (
    DomainError,
    ImplausibleWattsWarning,
    MissingCoefficient,
    UnitUndeclared,
)
from edgeperf.latency import decode_latency, prefill_latency, tbt


class TestPrefillPower:
    def test_constant_branch(self, p15):
        assert prefill_power(p15, 512) == pytest.approx(5.636)
        assert prefill_power(p15, 4096) == pytest.approx(5.636)

    def test_missing_for_8b(self, p8):
        with pytest.raises(MissingCoefficient):
            prefill_power(p8, 512)

    def test_domain(self, p15):
        with pytest.raises(DomainError):
            prefill_power(p15, 0)


class TestPrefillEnergyPerToken:
    def test_decay_branch(self, p15):
        assert prefill_energy_per_token(p15, 128) == pytest.approx(0.002148, rel=1e-3)

    def test_long_input_limit(self, p15):
        assert prefill_energy_per_token(p15, 100000) == pytest.approx(0.000923, rel=1e-6)

    def test_log_branch_8b(self, p8):
        assert prefill_energy_per_token(p8, 2048) == pytest.approx(0.020521, rel=1e-3)

    def test_branch_switch_at_threshold(self, p8):
        # Threshold itself evaluates on the decay branch; past it, the log fit.
        v = p8.prefill_energy.threshold
        at = prefill_energy_per_token(p8, int(v))
        decay = p8.prefill_energy.exp_A * math.exp(-p8.prefill_energy.exp_lambda * v)
        assert at == pytest.approx(decay + p8.prefill_energy.exp_C)


class TestDecodePower:
    def test_floor(self, p15):
        assert decode_power(p15, 32) == pytest.approx(5.9)
        assert decode_power(p15, 63) == pytest.approx(5.9)

    def test_log_branch(self, p15):
        assert decode_power(p15, 512) == pytest.approx(7.933, rel=1e-3)
        # Position 64 is already on the log branch.
        expected = 0.756538 * math.log(64) + 3.213711
        assert decode_power(p15, 64) == pytest.approx(expected)

    def test_nondecreasing(self, p15):
        values = [decode_power(p15, o) for o in range(64, 4097, 64)]
        assert all(lo <= hi for lo, hi in zip(values, values[1:]))

    def test_implausible_watts_warning(self, p14):
        with pytest.warns(ImplausibleWattsWarning):
            watts = decode_power(p14, 512)
        assert watts > 60.0

    def test_no_warning_in_plausible_range(self, p15):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            decode_power(p15, 4096)


class TestDecodeEnergy:
    def test_constant_regime_worked_value(self, p15):
        assert decode_energy(p15, 512, 32) == pytest.approx(4.5163, rel=1e-3)

    def test_constant_regime_is_power_times_latency(self, p15):
        for o in (1, 16, 63):
            product = 5.9 * decode_latency(p15, 512, o)
            assert abs(decode_energy(p15, 512, o) - product) <= 1e-9

    def test_zero_output(self, p15):
        assert decode_energy(p15, 512, 0) == 0.0

    def test_matches_definitional_sum(self, p15):
        i, o = 512, 200
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ImplausibleWattsWarning)
            summed = sum(
                decode_power(p15, k + 1) * tbt(p15, i + k) for k in range(o)
            )
        assert decode_energy(p15, i, o) == pytest.approx(summed, rel=1e-12)

    def test_monotone_in_output(self, p15):
        assert decode_energy(p15, 512, 64) > decode_energy(p15, 512, 32)

    def test_missing_power_model(self, registry):
        bare = registry.get("dsr1-qwen-14b-w4")
        stripped = type(bare)(id="x", param_count=1.0)
        with pytest.raises(MissingCoefficient):
            decode_energy(stripped, 128, 10)


class TestTotalEnergy:
    def test_prefill_only_worked_value(self, p15):
        joules = total_energy(p15, 128, 0)
        assert joules == pytest.approx(0.275, rel=2e-3)
        # Cross-model consistency: P * L lands within a few percent.
        pl = prefill_power(p15, 128) * prefill_latency(p15, 128)
        assert pl == pytest.approx(0.2753, rel=1e-3)

    def test_decomposition_exact(self, p15):
        joules = total_energy(p15, 128, 40)
        prefill_part = prefill_energy_per_token(p15, 128) * 128
        assert joules == prefill_part + decode_energy(p15, 128, 40)

    def test_unit_undeclared(self, p15):
        import dataclasses

        from edgeperf.profiles import EnergyUnit

        undeclared = dataclasses.replace(
            p15,
            prefill_energy=dataclasses.replace(
                p15.prefill_energy, unit=EnergyUnit.FITTED
            ),
        )
        with pytest.raises(UnitUndeclared):
            total_energy(undeclared, 128, 10)


class TestCost:
    def test_single_batch_figures(self):
        usage = UsageSample(tokens=195624, duration=4358, energy=0.0317)
        breakdown = cost_per_million_tokens(usage, CostParams())
        assert breakdown.energy_cost == pytest.approx(0.0243, abs=2e-3)
        assert breakdown.hardware_cost == pytest.approx(0.2785, abs=2e-3)
        assert breakdown.total == pytest.approx(0.3028, abs=2e-3)

    def test_batched_figures(self):
        usage = UsageSample(tokens=195624, duration=398, energy=0.003)
        breakdown = cost_per_million_tokens(usage, CostParams())
        assert breakdown.energy_cost == pytest.approx(0.0023, abs=2e-3)
        assert breakdown.hardware_cost == pytest.approx(0.0254, abs=2e-3)
        assert breakdown.total == pytest.approx(0.0277, abs=2e-3)

    def test_zero_prices(self):
        usage = UsageSample(tokens=1000, duration=10, energy=0.5)
        breakdown = cost_per_million_tokens(usage, CostParams(0.0, 0.0))
        assert breakdown.total == 0.0

    def test_linearity_in_electricity(self):
        usage = UsageSample(tokens=1000, duration=10, energy=0.5)
        single = cost_per_million_tokens(usage, CostParams(electricity=0.1))
        double = cost_per_million_tokens(usage, CostParams(electricity=0.2))
        assert double.energy_cost == 2 * single.energy_cost
        assert double.hardware_cost == single.hardware_cost

    def test_total_is_exact_sum(self):
        breakdown = CostBreakdown(energy_cost=0.1, hardware_cost=0.2)
        assert breakdown.total == 0.1 + 0.2

    def test_usage_validation(self):
        with pytest.raises(DomainError):
            UsageSample(tokens=0, duration=1.0, energy=0.0)
        with pytest.raises(DomainError):
            UsageSample(tokens=1, duration=0.0, energy=0.0)
        with pytest.raises(DomainError):
            UsageSample(tokens=1, duration=1.0, energy=-0.1)
        with pytest.raises(DomainError):
            CostParams(electricity=-0.1)
