import math
import random

import pytest

from edgeperf import fitting
from edgeperf.errors import (
    DegenerateDesign,
    InsufficientData,
    LengthMismatch,
    NoDecayDetectedWarning,
    ZeroActual,
)
from edgeperf.fitting import (
    ExpDecay,
    LogCurve,
    coefficients_to_json,
    fit_decode_latency,
    fit_exp_decay,
    fit_log_curve,
    fit_piecewise,
    fit_prefill_latency,
    mape,
)
from edgeperf.latency import padded_length
from edgeperf.profiles import (
    MeasurementRecord,
    Phase,
    PiecewiseEnergyModel,
    PiecewisePowerModel,
    load_measurements,
)
from edgeperf.profiles import builtin_profiles_path


def prefill_rows(a, b, c, lengths):
    rows = []
    for i in lengths:
        ipad = padded_length(i)
        rows.append(
            MeasurementRecord(
                phase=Phase.PREFILL,
                input_len=i,
                output_len=0,
                latency=a * ipad * ipad + b * ipad + c,
            )
        )
    return rows


def decode_rows(m, n, pairs):
    return [
        MeasurementRecord(
            phase=Phase.DECODE,
            input_len=i,
            output_len=o,
            latency=n * o + m * (i * o + o * (o - 1) / 2),
        )
        for i, o in pairs
    ]


class TestFitPrefillLatency:
    def test_noiseless_round_trip(self):
        rows = prefill_rows(1e-7, 2e-6, 0.05, range(64, 4097, 64))
        result = fit_prefill_latency(rows)
        c = result.coefficients
        assert c.a == pytest.approx(1e-7, rel=1e-9)
        assert c.b == pytest.approx(2e-6, rel=1e-9)
        assert c.c == pytest.approx(0.05, rel=1e-9)
        assert result.residual_sse == pytest.approx(0.0, abs=1e-15)

    def test_non_multiples_of_64_excluded(self):
        rows = prefill_rows(1e-7, 2e-6, 0.05, [128, 256, 512, 1024])
        # A wildly wrong off-grid row must not perturb the fit.
        rows.append(
            MeasurementRecord(phase=Phase.PREFILL, input_len=100, output_len=0, latency=99.0)
        )
        c = fit_prefill_latency(rows).coefficients
        assert c.a == pytest.approx(1e-7, rel=1e-9)

    def test_insufficient_distinct_padded_lengths(self):
        # 64 and 128 share a padded length, so only two remain.
        rows = prefill_rows(1e-7, 2e-6, 0.05, [64, 128, 256])
        with pytest.raises(InsufficientData):
            fit_prefill_latency(rows)

    def test_fit_then_repredict_14b(self):
        path = builtin_profiles_path().parent / "measurements" / "dsr1-qwen-14b-gpu.csv"
        records = [
            r
            for r in load_measurements(path)
            if r.phase is Phase.PREFILL and r.input_len <= 512
        ]
        result = fit_prefill_latency(records)
        c = result.coefficients
        for r in records:
            ipad = padded_length(r.input_len)
            predicted = c.a * ipad * ipad + c.b * ipad + c.c
            assert predicted == pytest.approx(r.latency, rel=0.05)

    def test_input_not_mutated(self):
        rows = prefill_rows(1e-7, 2e-6, 0.05, [128, 256, 512])
        snapshot = list(rows)
        fit_prefill_latency(rows)
        assert rows == snapshot


class TestFitDecodeLatency:
    def test_noiseless_round_trip(self):
        pairs = [(512, o) for o in (16, 64, 128, 512, 1024)]
        result = fit_decode_latency(decode_rows(1e-6, 0.05, pairs))
        assert result.coefficients.m == pytest.approx(1e-6, rel=1e-9)
        assert result.coefficients.n == pytest.approx(0.05, rel=1e-9)

    def test_14b_appendix_rows_recover_n(self):
        path = builtin_profiles_path().parent / "measurements" / "dsr1-qwen-14b-gpu.csv"
        records = load_measurements(path)
        result = fit_decode_latency(records)
        assert result.coefficients.n == pytest.approx(0.187, rel=0.03)

    def test_single_row(self):
        with pytest.raises(InsufficientData):
            fit_decode_latency(decode_rows(1e-6, 0.05, [(512, 128)]))

    def test_collinear_features(self):
        # (I=5, O=2) and (I=4, O=4) give proportional feature vectors.
        with pytest.raises(DegenerateDesign):
            fit_decode_latency(decode_rows(1e-6, 0.05, [(5, 2), (4, 4)]))


class TestFitLogCurve:
    def test_noiseless_round_trip(self):
        points = [(x, 0.7565 * math.log(x) + 3.2137) for x in (64, 128, 256, 512, 1024)]
        c = fit_log_curve(points).coefficients
        assert c.log_alpha == pytest.approx(0.7565, rel=1e-9)
        assert c.log_beta == pytest.approx(3.2137, rel=1e-9)

    def test_min_x_filters(self):
        points = [(1, 99.0)] + [(x, 2.0 * math.log(x) + 1.0) for x in (64, 256, 1024)]
        result = fit_log_curve(points, min_x=64)
        assert result.points_used == 3
        assert result.coefficients.log_alpha == pytest.approx(2.0, rel=1e-9)

    def test_all_equal_x(self):
        with pytest.raises(InsufficientData):
            fit_log_curve([(64, 1.0), (64, 2.0)])

    def test_constant_y(self):
        c = fit_log_curve([(x, 4.2) for x in (8, 64, 512)]).coefficients
        assert c.log_alpha == pytest.approx(0.0, abs=1e-12)
        assert c.log_beta == pytest.approx(4.2)


class TestFitExpDecay:
    def test_noiseless_round_trip(self):
        true = (0.07308, 0.03195, 0.000923)
        xs = [16, 32, 64, 96, 128, 192, 256, 512]
        points = [(x, true[0] * math.exp(-true[1] * x) + true[2]) for x in xs]
        c = fit_exp_decay(points).coefficients
        assert c.exp_A == pytest.approx(true[0], rel=1e-3)
        assert c.exp_lambda == pytest.approx(true[1], rel=1e-3)
        assert c.exp_C == pytest.approx(true[2], rel=1e-3)

    def test_constant_data_collapses(self):
        points = [(x, 3.0) for x in (1, 2, 4, 8, 16)]
        with pytest.warns(NoDecayDetectedWarning):
            result = fit_exp_decay(points)
        assert result.coefficients == ExpDecay(exp_A=0.0, exp_lambda=0.0, exp_C=3.0)

    def test_too_few_points(self):
        with pytest.raises(InsufficientData):
            fit_exp_decay([(1, 1.0), (2, 0.9), (3, 0.8)])

    def test_nonpositive_y(self):
        with pytest.raises(InsufficientData):
            fit_exp_decay([(1, 1.0), (2, 0.5), (3, -0.1), (4, 0.2)])


class TestFitPiecewise:
    def test_power_break_recovered(self):
        xs = [64, 128, 256, 400, 800, 1024, 2048, 3072, 4096]
        points = [
            (x, 5.6 if x <= 800 else 0.9 * math.log(x) + 0.1) for x in xs
        ]
        result = fit_piecewise(points, kind="power")
        model = result.coefficients
        assert isinstance(model, PiecewisePowerModel)
        assert model.threshold == 800
        assert model.floor_watts == pytest.approx(5.6, rel=1e-9)
        assert model.log_alpha == pytest.approx(0.9, rel=1e-6)

    def test_constant_data_degenerates(self):
        points = [(x, 5.6) for x in (64, 128, 256, 512, 1024, 2048)]
        model = fit_piecewise(points, kind="power").coefficients
        assert model.floor_watts == pytest.approx(5.6)
        assert math.isinf(model.threshold)

    def test_energy_break_recovered(self):
        xs = [16, 32, 64, 128, 256, 384, 512, 1024, 2048, 4096]
        def left(x):
            return 0.29 * math.exp(-0.03 * x) + 0.009
        def right(x):
            return 0.016 * math.log(x) - 0.07
        points = [(x, left(x) if x <= 384 else right(x)) for x in xs]
        model = fit_piecewise(points, kind="energy").coefficients
        assert isinstance(model, PiecewiseEnergyModel)
        assert model.threshold == 384
        assert model.log_alpha == pytest.approx(0.016, rel=1e-6)
        assert model.exp_lambda == pytest.approx(0.03, rel=1e-3)

    def test_too_few_points(self):
        with pytest.raises(InsufficientData):
            fit_piecewise([(x, 1.0) for x in range(5)], kind="power")

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            fit_piecewise([(x, 1.0) for x in range(1, 7)], kind="latency")


class TestMape:
    def test_identical(self):
        assert mape([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_single_element(self):
        assert mape([1.1], [1.0]) == pytest.approx(10.0)

    def test_scale_invariance(self):
        rng = random.Random(3)
        preds = [rng.uniform(1, 10) for _ in range(20)]
        actuals = [rng.uniform(1, 10) for _ in range(20)]
        base = mape(preds, actuals)
        for k in (0.5, 3.0, 1e6):
            scaled = mape([k * p for p in preds], [k * a for a in actuals])
            assert scaled == pytest.approx(base, rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            mape([1.0], [1.0, 2.0])
        with pytest.raises(LengthMismatch):
            mape([], [])

    def test_zero_actual(self):
        with pytest.raises(ZeroActual):
            mape([1.0], [0.0])


class TestCoefficientsToJson:
    def test_fragments(self):
        frag = coefficients_to_json(LogCurve(log_alpha=1.0, log_beta=2.0))
        assert frag == {"log_curve": {"log_alpha": 1.0, "log_beta": 2.0}}
        frag = coefficients_to_json(
            PiecewisePowerModel(floor_watts=5.9, threshold=64, log_alpha=0.7, log_beta=3.2)
        )
        assert frag["power"]["threshold"] == 64
        frag = coefficients_to_json(ExpDecay(exp_A=0.1, exp_lambda=0.03, exp_C=0.001))
        assert frag["exp_decay"]["exp_lambda"] == 0.03

    def test_unknown_type(self):
        with pytest.raises(TypeError):
            coefficients_to_json(object())
