"""
Plateaus of monotone functions and frequency windows.

find_plateau walks x_{i+1} = x_i + (b - a) / (10 ln^2 f(x_i)) from x_1 = a until
f grows by at most a factor e across a step. find_frequency_window applies it to
the running-max envelope of beta(p, .) on [r, 2r].
"""
import bisect
import logging
import math
from typing import Optional, Sequence

import numpy as np

from nodal_lab.config import settings
from nodal_lab.errors import ConvergenceError, LowFrequencyError, PreconditionError, SamplingTooCoarse
from nodal_lab.field import FieldOracle
from nodal_lab.growth import frequency_beta, parallel_map
from nodal_lab.models.windows import LayerWindow, PlateauResult

logger = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-12
GAP_SAFETY = 1.25


def monotone_envelope(values: Sequence[float]) -> np.ndarray:
    """Running maximum; nondecreasing by construction."""
    return np.maximum.accumulate(np.asarray(values, dtype=float))


class _SampledFunction:
    """Piecewise-constant reading of a sampled nondecreasing function."""

    def __init__(self, ts: Sequence[float], values: Sequence[float]):
        self.ts = [float(t) for t in ts]
        self.values = [float(v) for v in values]

    def floor(self, x: float) -> float:
        i = bisect.bisect_right(self.ts, x) - 1
        return self.values[max(i, 0)]

    def ceil(self, x: float) -> float:
        i = bisect.bisect_left(self.ts, x)
        return self.values[min(i, len(self.ts) - 1)]


def find_plateau(ts: Sequence[float], values: Sequence[float], a: float, b: float) -> PlateauResult:
    """First midpoint (x_i + x_{i+1})/2 whose step satisfies N <= f <= eN, N = f(x_i)."""
    if not a < b:
        raise PreconditionError(f"need a < b, got [{a}, {b}]")
    if len(ts) != len(values) or len(ts) < 2:
        raise PreconditionError("need at least two samples with matching values")
    t = np.asarray(ts, dtype=float)
    v = np.asarray(values, dtype=float)
    if np.any(np.diff(t) <= 0):
        raise PreconditionError("sample locations must be strictly increasing")
    if t[0] > a or t[-1] < b:
        raise SamplingTooCoarse(f"samples cover [{t[0]:.6g}, {t[-1]:.6g}], not [{a:.6g}, {b:.6g}]")

    inside = (t >= a) & (t <= b)
    if np.any(v[inside] < math.e * (1 - MONOTONE_SLACK)) or v[t <= a][-1] < math.e * (1 - MONOTONE_SLACK):
        raise PreconditionError("f must be at least e on [a, b]")
    if np.any(np.diff(v) < -MONOTONE_SLACK * np.abs(v[1:])):
        raise PreconditionError("f must be nondecreasing")

    fn = _SampledFunction(t, v)
    log_fb = math.log(fn.ceil(b))
    max_gap = (b - a) / (40.0 * log_fb * log_fb)
    lo_idx = max(int(np.searchsorted(t, a, side="right")) - 1, 0)
    hi_idx = int(np.searchsorted(t, b, side="left"))
    gaps = np.diff(t[lo_idx:hi_idx + 1])
    if len(gaps) and gaps.max() >= max_gap:
        raise SamplingTooCoarse(
            f"largest sample gap {gaps.max():.3e} is not below (b - a)/(40 ln^2 f(b)) = {max_gap:.3e}"
        )

    half = 0.5 * (a + b)
    x_i = a
    step = 1
    while True:
        N = fn.floor(x_i)
        log_n = math.log(N)
        x_next = x_i + (b - a) / (10.0 * log_n * log_n)
        x = 0.5 * (x_i + x_next)
        if x >= half:
            raise ConvergenceError(
                f"plateau sequence reached (a + b)/2 = {half:.6g} after {step} steps"
            )
        upper = fn.ceil(x_next)
        if upper <= math.e * N:
            logger.debug(f"Plateau at step {step}: x={x:.6g}, N={N:.6g}")
            return PlateauResult(
                x=x, N=N, window=(x_i, min(x_next, b)), a=a, b=b, step=step, upper=upper
            )
        x_i = x_next
        step += 1


def _beta_samples(f: FieldOracle, p: np.ndarray, ts: Sequence[float], order: Optional[int]) -> np.ndarray:
    return np.array(parallel_map(lambda t: frequency_beta(f, p, t, order), list(ts)))


def _sandwich(betas: np.ndarray, N: float, slack_exponent: float = 1.0) -> bool:
    return bool(np.all(betas >= N * (1 - MONOTONE_SLACK)) and np.all(betas <= 2 * math.e**slack_exponent * N))


def find_frequency_window(
    f: FieldOracle,
    p: Sequence[float],
    r: float,
    gate: Optional[float] = None,
    order: Optional[int] = None,
    verification_samples: Optional[int] = None,
) -> LayerWindow:
    """Radius s in [r, 3r/2) and level N >= 5 with N <= beta(p, t) <= 2eN near s."""
    p = np.asarray(p, dtype=float)
    gate = settings.FREQUENCY_GATE if gate is None else gate
    verification_samples = verification_samples or settings.WINDOW_VERIFICATION_SAMPLES
    if r <= 0:
        raise PreconditionError(f"radius must be positive, got {r}")
    f.check_ball(p, 2 * r, "window ball B(p, 2r)")

    beta_half = frequency_beta(f, p, 0.5 * r, order)
    if beta_half <= gate:
        raise LowFrequencyError(beta_half, gate)

    beta_top = frequency_beta(f, p, 2 * r, order)
    log_top = math.log(max(beta_top, math.e))
    count = int(math.ceil(40.0 * log_top * log_top * GAP_SAFETY)) + 1
    ts = np.concatenate([[0.5 * r], np.linspace(r, 2 * r, count)])
    betas = _beta_samples(f, p, ts, order)
    envelope = monotone_envelope(betas)

    plateau = find_plateau(ts, envelope, r, 2 * r)
    s = plateau.x
    N = plateau.N / 2.0
    rel = settings.WINDOW_REL_HALFWIDTH_FACTOR / math.log(N) ** 2

    check_ts = np.linspace(s * (1 - rel), s * (1 + rel), verification_samples)
    check = _beta_samples(f, p, check_ts, order)
    if not _sandwich(check, N):
        raise ConvergenceError(
            f"window sandwich failed at s={s:.6g}: beta in [{check.min():.6g}, {check.max():.6g}], N={N:.6g}"
        )

    # widest relative window on which the dense samples keep the sandwich
    ok = (envelope >= N) & (envelope <= 2 * math.e * N)
    order_by_distance = np.argsort(np.abs(ts - s))
    widest = min(s - 0.5 * r, 2 * r - s) / s
    for k in order_by_distance:
        if not ok[k]:
            widest = abs(ts[k] - s) / s
            break

    beta_r = float(betas[1])
    beta_32 = frequency_beta(f, p, 1.5 * r, order)
    bracket = beta_r / 10.0 <= N <= 2.0 * beta_32
    logger.info(f"Frequency window at p={p.tolist()}, r={r:.4g}: s={s:.6g}, N={N:.6g}")
    if not bracket:
        logger.warning(
            f"Window bracket beta(r)/10 <= N <= 2 beta(3r/2) fails at p={p.tolist()}, r={r:.4g}: "
            f"beta(r)={beta_r:.6g}, N={N:.6g}, beta(3r/2)={beta_32:.6g}"
        )
    return LayerWindow(
        center=p.tolist(),
        r=r,
        s=s,
        N=N,
        rel_halfwidth=rel,
        max_rel_halfwidth=max(widest, rel),
        verification_samples=verification_samples,
        beta_min=float(check.min()),
        beta_max=float(check.max()),
        beta_at_r=beta_r,
        beta_at_three_halves_r=beta_32,
        bracket_holds=bracket,
    )


def window_holds(
    f: FieldOracle,
    window: LayerWindow,
    samples: int,
    slack_exponent: float = 1.0,
    order: Optional[int] = None,
) -> bool:
    """Re-check N <= beta <= 2 e^slack N on ``samples`` points of the window."""
    p = np.asarray(window.center, dtype=float)
    ts = np.linspace(window.s * (1 - window.rel_halfwidth), window.s * (1 + window.rel_halfwidth), samples)
    return _sandwich(_beta_samples(f, p, ts, order), window.N, slack_exponent)
