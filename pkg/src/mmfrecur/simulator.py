"""Driver for the order-driven market model with long-memory order flow."""

import random
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ParameterError, SimulationError
from .lob import BUY, SELL, DEFAULT_TICK, OrderBook
from .stochastic import StudentParams, aaft_correlate, gen_order_signs, sample_student

__all__ = [
    "DEFAULT_CANCEL_RATE",
    "ModelParams",
    "ReturnSeries",
    "standardize",
    "derive_seeds",
    "run_simulation",
    "calibrate_cancel_rate",
    "pilot_depth",
    "DESK_STEPS",
    "PAPER_STEPS",
]

# Mean resting depth is roughly 0.4 / rate. Deeper books (rate <= 0.01,
# depth >= 40) give anti-persistent returns (DFA ~ 0.3-0.4), so the default
# trades book depth (~16 orders) for uncorrelated returns.
# calibrate_cancel_rate() recovers a rate for any target depth.
DEFAULT_CANCEL_RATE = 0.03

DESK_STEPS = 200_000
PAPER_STEPS = 2_000_000


@dataclass(frozen=True)
class ModelParams:
    hurst_s: float
    hurst_x: float
    seed: int
    student: StudentParams = field(default_factory=StudentParams)
    steps: int = DESK_STEPS
    cancel_rate: float = DEFAULT_CANCEL_RATE
    tick: float = DEFAULT_TICK
    warmup: int = 10_000
    refill_half_spread: float = 0.01

    def __post_init__(self):
        for name in ("hurst_s", "hurst_x"):
            h = getattr(self, name)
            if not 0.0 < h < 1.0:
                raise ParameterError(f"{name} must lie in (0, 1), got {h}")
        if not self.steps > self.warmup >= 0:
            raise ParameterError(f"need steps > warmup >= 0, got {self.steps}, {self.warmup}")
        if not 0.0 <= self.cancel_rate <= 1.0:
            raise ParameterError(f"cancel_rate must lie in [0, 1], got {self.cancel_rate}")
        if not 0.0 < self.tick <= self.student.scale:
            raise ParameterError(f"tick must lie in (0, student.scale], got {self.tick}")
        if not self.refill_half_spread > 0:
            raise ParameterError("refill_half_spread must be positive")
        if int(self.seed) < 0:
            raise ParameterError("seed must be non-negative")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        student = data.pop("student", None)
        if isinstance(student, dict):
            student = StudentParams(**student)
        if student is not None:
            data["student"] = student
        return cls(**data)

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class ReturnSeries:
    values: np.ndarray
    raw_std: float
    params: ModelParams
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.values)


def standardize(raw):
    """Divide by the sample standard deviation (n - 1 denominator).

    The mean is not removed. Returns ``(values, std)``.
    """
    x = np.asarray(raw, dtype=float)
    if x.size < 2:
        raise ParameterError("need at least two values to standardize")
    std = float(np.std(x, ddof=1))
    if not std > 0:
        raise ParameterError("zero-variance series cannot be standardized")
    return x / std, std


def derive_seeds(seed):
    """Independent sub-seeds for signs, raw prices, the AAFT reference and cancellation."""
    children = np.random.SeedSequence(int(seed)).spawn(4)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def _order_flow(params):
    s_signs, s_raw, s_ref, s_cancel = derive_seeds(params.seed)
    signs = gen_order_signs(params.steps, params.hurst_s, s_signs)
    raw = sample_student(params.steps, params.student, s_raw)
    prices = aaft_correlate(raw, params.hurst_x, s_ref).values
    return signs, prices, random.Random(s_cancel)


def run_simulation(params, event_log=None, record_depth=False):
    """Run one realisation and return the standardized mid-price log returns.

    A return is recorded at every event where the mid log-price changes;
    returns recorded before ``params.warmup`` events are dropped.
    """
    signs, prices, cancel_rng = _order_flow(params)
    book = OrderBook(params.tick, event_log=event_log)
    book.bootstrap()

    rate = params.cancel_rate
    warmup = params.warmup
    place = book.place_order
    sweep = book.cancel_sweep
    refill = book.refill
    half_spread = params.refill_half_spread
    returns = []
    depth_sum = 0
    refills = 0
    prev_mid2 = book.last_mid_ticks2
    for t in range(params.steps):
        place(BUY if signs[t] > 0 else SELL, float(prices[t]), t)
        sweep(rate, cancel_rng)
        bid = book._best(BUY)
        ask = book._best(SELL)
        if bid is None or ask is None:
            refills += refill(half_spread, t)
            bid = book._best(BUY)
            ask = book._best(SELL)
        mid2 = bid + ask
        if mid2 != prev_mid2:
            if t >= warmup:
                returns.append(mid2 - prev_mid2)
            prev_mid2 = mid2
        depth_sum += len(book)

    diagnostics = {
        "events": params.steps,
        "returns_recorded": len(returns),
        "mean_depth": depth_sum / params.steps,
        "final_depth": len(book),
        "trades": book.n_trades,
        "cancellations": book.n_cancelled,
        "refills": refills,
        "anchor_fallbacks": book.n_anchor_fallbacks,
    }
    if record_depth:
        diagnostics["book"] = book
    if len(returns) < 2:
        raise SimulationError("run produced fewer than two returns", diagnostics)
    raw = np.asarray(returns, dtype=float) * (0.5 * params.tick)
    try:
        values, std = standardize(raw)
    except ParameterError as exc:
        raise SimulationError(str(exc), diagnostics) from None
    return ReturnSeries(values=values, raw_std=std, params=params, diagnostics=diagnostics)


def pilot_depth(rate, steps=100_000, seed=0, **overrides):
    """Mean resting depth of a pilot run at H_s = H_x = 0.5."""
    params = ModelParams(hurst_s=0.5, hurst_x=0.5, seed=seed, steps=steps,
                         cancel_rate=rate, warmup=0, **overrides)
    try:
        return run_simulation(params).diagnostics["mean_depth"]
    except SimulationError as exc:
        return exc.diagnostics["mean_depth"]


def calibrate_cancel_rate(target_depth=16.0, lo=1e-4, hi=0.2, steps=100_000, seed=0, iters=20):
    """Bisect the cancellation rate so the pilot mean depth hits ``target_depth``.

    Depth decreases monotonically with the rate; the search is on a log scale.
    """
    for _ in range(iters):
        mid = float(np.sqrt(lo * hi))
        if pilot_depth(mid, steps=steps, seed=seed) > target_depth:
            lo = mid
        else:
            hi = mid
    return float(np.sqrt(lo * hi))
