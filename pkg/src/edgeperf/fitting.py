"""Coefficient estimation from measurement records, plus MAPE scoring.

All fits are least squares. The linear-in-parameter fits go through normal
equations with column scaling and fall back to an orthogonal decomposition
when the design is badly conditioned; the exponential decay is a grid search
over the rate with a golden-section refinement.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    DegenerateDesign,
    InsufficientData,
    LengthMismatch,
    NoDecayDetectedWarning,
    ZeroActual,
)
from .latency import padded_length
from .profiles import (
    DecodeLatencyCoeffs,
    EnergyUnit,
    MeasurementRecord,
    Phase,
    PiecewiseEnergyModel,
    PiecewisePowerModel,
    PrefillLatencyCoeffs,
)

Coefficients = Union[
    PrefillLatencyCoeffs,
    DecodeLatencyCoeffs,
    PiecewisePowerModel,
    PiecewiseEnergyModel,
    "LogCurve",
    "ExpDecay",
]

# Design-matrix condition estimate above which the normal equations are
# abandoned for an orthogonal (SVD) solve.
_COND_LIMIT = 1e8


@dataclass(frozen=True)
class LogCurve:
    """y = log_alpha * ln(x) + log_beta."""

    log_alpha: float
    log_beta: float


@dataclass(frozen=True)
class ExpDecay:
    """y = exp_A * exp(-exp_lambda * x) + exp_C."""

    exp_A: float
    exp_lambda: float
    exp_C: float


@dataclass(frozen=True)
class FitResult:
    coefficients: Coefficients
    residual_sse: float
    points_used: int


def _solve_least_squares(design: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Column-scaled normal equations with an SVD fallback for bad conditioning."""
    scale = np.linalg.norm(design, axis=0)
    scale[scale == 0] = 1.0
    scaled = design / scale
    if np.linalg.cond(scaled) > _COND_LIMIT:
        coef, *_ = np.linalg.lstsq(scaled, y, rcond=None)
    else:
        gram = scaled.T @ scaled
        coef = np.linalg.solve(gram, scaled.T @ y)
    coef = coef / scale
    residuals = design @ coef - y
    return coef, float(residuals @ residuals)


def fit_prefill_latency(records: Iterable[MeasurementRecord]) -> FitResult:
    """Fit the quadratic prefill model on padded lengths.

    Only prefill rows whose input length is a multiple of 64 participate, and
    each input length is replaced by its padded length before the regression.
    """
    rows = [
        r
        for r in records
        if r.phase is Phase.PREFILL and r.input_len % 64 == 0
    ]
    ipad = np.array([padded_length(r.input_len) for r in rows], dtype=np.float64)
    if len(set(ipad.tolist())) < 3:
        raise InsufficientData(
            f"need >= 3 distinct padded lengths, found {len(set(ipad.tolist()))}"
        )
    y = np.array([r.latency for r in rows], dtype=np.float64)
    design = np.column_stack([ipad**2, ipad, np.ones_like(ipad)])
    coef, sse = _solve_least_squares(design, y)
    return FitResult(
        coefficients=PrefillLatencyCoeffs(a=coef[0], b=coef[1], c=coef[2]),
        residual_sse=sse,
        points_used=len(rows),
    )


def fit_decode_latency(records: Iterable[MeasurementRecord]) -> FitResult:
    """Fit (m, n) by least squares on [O, I*O + O*(O-1)/2] with no intercept."""
    rows = [r for r in records if r.phase is Phase.DECODE and r.output_len > 0]
    feats = [
        (float(r.output_len), r.input_len * r.output_len + r.output_len * (r.output_len - 1) / 2)
        for r in rows
    ]
    if len(set(feats)) < 2:
        raise InsufficientData(f"need >= 2 distinct decode feature rows, found {len(set(feats))}")
    design = np.array([[f[1], f[0]] for f in feats], dtype=np.float64)
    if np.linalg.matrix_rank(design) < 2:
        raise DegenerateDesign("decode features are collinear")
    y = np.array([r.latency for r in rows], dtype=np.float64)
    coef, sse = _solve_least_squares(design, y)
    return FitResult(
        coefficients=DecodeLatencyCoeffs(m=coef[0], n=coef[1]),
        residual_sse=sse,
        points_used=len(rows),
    )


def fit_log_curve(points: Sequence[tuple[float, float]], min_x: float = 1.0) -> FitResult:
    """Fit y = alpha*ln(x) + beta over points with x >= min_x."""
    kept = [(x, y) for x, y in points if x >= min_x]
    if len({x for x, _ in kept}) < 2:
        raise InsufficientData(
            f"need >= 2 distinct x >= {min_x}, found {len({x for x, _ in kept})}"
        )
    x = np.array([p[0] for p in kept], dtype=np.float64)
    y = np.array([p[1] for p in kept], dtype=np.float64)
    design = np.column_stack([np.log(x), np.ones_like(x)])
    coef, sse = _solve_least_squares(design, y)
    return FitResult(
        coefficients=LogCurve(log_alpha=coef[0], log_beta=coef[1]),
        residual_sse=sse,
        points_used=len(kept),
    )


def _decay_sse_at(lam: float, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    basis = np.exp(-lam * x)
    design = np.column_stack([basis, np.ones_like(x)])
    coef, sse = _solve_least_squares(design, y)
    return sse, coef


def fit_exp_decay(points: Sequence[tuple[float, float]]) -> FitResult:
    """Fit y = A*exp(-lambda*x) + C.

    The rate is scanned on a geometric grid over [1e-5, 1], with (A, C)
    solved linearly at each candidate, then refined by golden section around
    the best grid cell. Collapses to the constant fit (with a warning) when
    the best decay amplitude is nonpositive.
    """
    if len(points) < 4:
        raise InsufficientData(f"need >= 4 points, found {len(points)}")
    x = np.array([p[0] for p in points], dtype=np.float64)
    y = np.array([p[1] for p in points], dtype=np.float64)
    if np.any(y <= 0):
        raise InsufficientData("all y values must be positive")

    grid = np.geomspace(1e-5, 1.0, 80)
    sses = [_decay_sse_at(lam, x, y)[0] for lam in grid]
    best = int(np.argmin(sses))

    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, len(grid) - 1)]
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc = _decay_sse_at(c, x, y)[0]
    fd = _decay_sse_at(d, x, y)[0]
    while (b - a) > 1e-6 * a:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = _decay_sse_at(c, x, y)[0]
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = _decay_sse_at(d, x, y)[0]
    lam = (a + b) / 2.0
    sse, coef = _decay_sse_at(lam, x, y)

    if coef[0] <= 0:
        mean = float(np.mean(y))
        warnings.warn(
            "no exponential decay detected; returning the constant fit",
            NoDecayDetectedWarning,
            stacklevel=2,
        )
        const_sse = float(np.sum((y - mean) ** 2))
        return FitResult(
            coefficients=ExpDecay(exp_A=0.0, exp_lambda=0.0, exp_C=mean),
            residual_sse=const_sse,
            points_used=len(points),
        )
    return FitResult(
        coefficients=ExpDecay(exp_A=float(coef[0]), exp_lambda=lam, exp_C=float(coef[1])),
        residual_sse=sse,
        points_used=len(points),
    )


def _constant_fit(y: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(y))
    return mean, float(np.sum((y - mean) ** 2))


def fit_piecewise(points: Sequence[tuple[float, float]], kind: str) -> FitResult:
    """Fit a two-regime model, selecting the breakpoint by combined SSE.

    ``kind`` is "power" (constant floor, then log) or "energy" (exponential
    decay, then log). Breakpoint candidates are the observed x values with at
    least three points on each side (four on the left for the decay branch);
    equal SSE prefers the smaller breakpoint. Data a single branch already
    explains degenerates to that branch with the breakpoint at max x.
    """
    if kind not in ("power", "energy"):
        raise ValueError(f"kind must be 'power' or 'energy', got {kind!r}")
    if len(points) < 6:
        raise InsufficientData(f"need >= 6 points, found {len(points)}")
    pts = sorted(points)
    xs = np.array([p[0] for p in pts], dtype=np.float64)
    ys = np.array([p[1] for p in pts], dtype=np.float64)
    min_left = 4 if kind == "energy" else 3

    def left_fit(mask) -> tuple[float, dict]:
        if kind == "power":
            floor, sse = _constant_fit(ys[mask])
            return sse, {"floor_watts": floor}
        result = fit_exp_decay(list(zip(xs[mask], ys[mask])))
        c = result.coefficients
        return result.residual_sse, {
            "exp_A": c.exp_A,
            "exp_lambda": c.exp_lambda,
            "exp_C": c.exp_C,
        }

    best = None  # (sse, breakpoint, left_params, right_params)
    candidates = sorted({float(x) for x in xs})
    for bp in candidates[:-1]:
        left = xs <= bp
        right = ~left
        if int(np.sum(left)) < min_left or int(np.sum(right)) < 3:
            continue
        if len({float(x) for x in xs[right]}) < 2:
            continue
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NoDecayDetectedWarning)
                sse_l, params_l = left_fit(left)
        except InsufficientData:
            continue
        log_fit = fit_log_curve(list(zip(xs[right], ys[right])), min_x=0.0)
        sse = sse_l + log_fit.residual_sse
        if best is None or sse < best[0] - 1e-15:
            best = (
                sse,
                bp,
                params_l,
                {
                    "log_alpha": log_fit.coefficients.log_alpha,
                    "log_beta": log_fit.coefficients.log_beta,
                },
            )

    # Single-branch alternative over the whole domain.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NoDecayDetectedWarning)
        single_sse, single_params = left_fit(np.ones_like(xs, dtype=bool))
    if best is None or single_sse <= best[0] + 1e-15:
        best = (single_sse, float(xs[-1]), single_params, {})

    sse, bp, params_l, params_r = best
    if kind == "power":
        coeffs: Coefficients = PiecewisePowerModel(
            floor_watts=params_l["floor_watts"],
            threshold=bp if params_r else math.inf,
            log_alpha=params_r.get("log_alpha"),
            log_beta=params_r.get("log_beta"),
        )
    else:
        coeffs = PiecewiseEnergyModel(
            threshold=bp if params_r else math.inf,
            exp_A=params_l["exp_A"],
            exp_lambda=params_l["exp_lambda"],
            exp_C=params_l["exp_C"],
            log_alpha=params_r.get("log_alpha"),
            log_beta=params_r.get("log_beta"),
            unit=EnergyUnit.FITTED,
        )
    return FitResult(coefficients=coeffs, residual_sse=sse, points_used=len(pts))


def mape(predictions: Sequence[float], actuals: Sequence[float]) -> float:
    """Mean absolute percentage error, as a percent."""
    if len(predictions) != len(actuals):
        raise LengthMismatch(
            f"{len(predictions)} predictions vs {len(actuals)} actuals"
        )
    if len(actuals) == 0:
        raise LengthMismatch("empty inputs")
    if any(a == 0 for a in actuals):
        raise ZeroActual("an actual value is zero; percentage error undefined")
    return 100.0 * float(
        np.mean([abs(p - a) / abs(a) for p, a in zip(predictions, actuals)])
    )


def coefficients_to_json(coefficients: Coefficients) -> dict:
    """Render fitted coefficients as a profile-file JSON fragment."""
    from .profiles import _energy_json, _power_json  # shared field naming

    if isinstance(coefficients, PrefillLatencyCoeffs):
        return {"prefill_latency": {"a": coefficients.a, "b": coefficients.b, "c": coefficients.c}}
    if isinstance(coefficients, DecodeLatencyCoeffs):
        return {"decode_latency": {"m": coefficients.m, "n": coefficients.n}}
    if isinstance(coefficients, PiecewisePowerModel):
        return {"power": _power_json(coefficients)}
    if isinstance(coefficients, PiecewiseEnergyModel):
        return {"energy": _energy_json(coefficients)}
    if isinstance(coefficients, LogCurve):
        return {"log_curve": {"log_alpha": coefficients.log_alpha, "log_beta": coefficients.log_beta}}
    if isinstance(coefficients, ExpDecay):
        return {
            "exp_decay": {
                "exp_A": coefficients.exp_A,
                "exp_lambda": coefficients.exp_lambda,
                "exp_C": coefficients.exp_C,
            }
        }
    raise TypeError(f"unsupported coefficient type {type(coefficients)!r}")
