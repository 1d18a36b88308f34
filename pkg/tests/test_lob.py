import io
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from mmfrecur.errors import BookStateError, ParameterError
from mmfrecur.lob import BUY, SELL, OrderBook, Rested, TradeEvent


class NaiveBook:
    """Reference book: a flat list of (id, side, tick) scanned on every query."""

    def __init__(self):
        self.orders = []  # in arrival order
        self.next_id = 0
        self.last_trade = None
        self.last_mid2 = None

    def best(self, side):
        ticks = [t for _, s, t in self.orders if s == side]
        if not ticks:
            return None
        return max(ticks) if side == BUY else min(ticks)

    def _mid(self):
        b, a = self.best(BUY), self.best(SELL)
        if b is not None and a is not None:
            self.last_mid2 = b + a

    def seed(self, side, tick):
        self.orders.append((self.next_id, side, tick))
        self.next_id += 1
        self._mid()

    def place(self, side, x_ticks):
        anchor = self.best(side)
        if anchor is None:
            anchor = self.last_trade if self.last_trade is not None else self.last_mid2 // 2
        off = math.ceil(x_ticks - 0.5)
        price = anchor + off if side == BUY else anchor - off
        opp = self.best(-side)
        if opp is not None and (price >= opp if side == BUY else price <= opp):
            victim = next(o for o in self.orders if o[1] == -side and o[2] == opp)
            self.orders.remove(victim)
            self.last_trade = opp
            self._mid()
            return ("trade", opp, victim[0])
        self.orders.append((self.next_id, side, price))
        self.next_id += 1
        self._mid()
        return ("rest", price, self.next_id - 1)

    def cancel(self, oid):
        self.orders = [o for o in self.orders if o[0] != oid]
        self._mid()

    def snapshot(self):
        out = {BUY: {}, SELL: {}}
        for oid, side, tick in self.orders:
            out[side].setdefault(tick, []).append(oid)
        return {side: dict(sorted(levels.items())) for side, levels in out.items()}


def fresh(half=10):
    book = OrderBook(tick=1.0)
    book.bootstrap(half_spread=half)
    return book


def test_bootstrap_and_mid():
    book = fresh()
    assert (book.best_bid_tick, book.best_ask_tick) == (-10, 10)
    assert book.mid_log_price() == 0.0


def test_mid_example():
    book = OrderBook(tick=1e-4)
    book.add_resting(BUY, 100)
    book.add_resting(SELL, 102)
    assert book.mid_log_price() == pytest.approx(101 * 1e-4)


def test_mid_one_sided_absent():
    book = OrderBook()
    book.add_resting(BUY, 5)
    assert book.mid_log_price() is None


def test_negative_x_buy_rests_behind_bid():
    book = fresh()
    book.cancel_sweep(1.0, random.Random(0))
    book.add_resting(BUY, -10)  # ask side empty
    out = book.place_order(BUY, -3.0, 1)
    assert isinstance(out, Rested)
    assert out.price_tick < -10
    assert book.best_ask_tick is None


def test_buy_spanning_spread_trades_at_ask():
    book = fresh()
    book.add_resting(SELL, 10)
    before = len(book.snapshot()[SELL][10])
    out = book.place_order(BUY, 20.0, 1)
    assert isinstance(out, TradeEvent)
    assert out.price_tick == 10 and out.aggressor_side == BUY
    assert len(book.snapshot()[SELL][10]) == before - 1


def test_scripted_six_orders():
    book = fresh()  # ids 0 (bid -10) and 1 (ask 10)
    book.place_order(BUY, 2.0, 1)       # rests at -8, id 2
    book.place_order(SELL, 3.0, 2)      # rests at 7, id 3
    t = book.place_order(BUY, 15.0, 3)  # -8 + 15 = 7 reaches the ask: trades id 3
    assert (t.price_tick, t.resting_id) == (7, 3)
    book.place_order(SELL, -1.0, 4)     # 10 + 1 = 11, id 4
    book.place_order(BUY, 0.5, 5)       # half rounds down for a buy: -8, id 5
    t = book.place_order(SELL, 18.0, 6)  # 10 - 18 = -8 reaches the bid: oldest is id 2
    assert (t.price_tick, t.resting_id) == (-8, 2)
    assert book.snapshot() == {BUY: {-10: [0], -8: [5]}, SELL: {10: [1], 11: [4]}}
    assert book.mid_log_price() == 1.0
    assert (book.n_placed, book.n_trades, book.n_executed, book.n_cancelled, len(book)) == (8, 2, 4, 0, 4)


def test_rounding_halves_away_from_spread():
    book = fresh()
    assert book.price_for(BUY, 2.5) == -10 + 2   # 2.5 ticks above the bid rounds down
    assert book.price_for(SELL, 2.5) == 10 - 2   # 2.5 ticks below the ask rounds up
    assert book.price_for(BUY, 2.6) == -7
    assert book.price_for(SELL, -0.5) == 11      # 10.5 also rounds away from the spread
    assert book.price_for(BUY, -0.5) == -11


def test_mid_matches_level_maps():
    book = fresh()
    rng = np.random.default_rng(1)
    for t in range(200):
        book.place_order(BUY if rng.random() < 0.5 else SELL, float(rng.normal(0, 4)), t)
    snap = book.snapshot()
    bid = max(snap[BUY]) if snap[BUY] else None
    ask = min(snap[SELL]) if snap[SELL] else None
    expected = None if bid is None or ask is None else 0.5 * (bid + ask)
    assert book.mid_log_price() == expected


def test_anchor_fallback_to_last_trade():
    book = fresh()
    book.place_order(SELL, 25.0, 1)   # 10 - 25 = -15 <= -10: trades the only bid
    assert book.best_bid_tick is None and book.last_trade_tick == -10
    assert book.price_for(BUY, 1.0) == -9
    assert book.n_anchor_fallbacks == 1


def test_anchor_missing_raises():
    with pytest.raises(BookStateError):
        OrderBook().place_order(BUY, 0.0, 0)


def test_add_resting_refuses_cross():
    book = fresh()
    with pytest.raises(BookStateError):
        book.add_resting(BUY, 10)


def test_refill_restores_both_sides():
    book = fresh()
    book.cancel_sweep(1.0, random.Random(0))
    assert book.refill(half_spread=10) == 2
    assert (book.best_bid_tick, book.best_ask_tick) == (-10, 10)


def test_refill_stays_behind_opposite_side():
    book = fresh()
    book.add_resting(SELL, 3)
    book.cancel(0)
    book.refill(half_spread=10)  # last mid before the cancel was (-10 + 3) / 2
    assert book.best_bid_tick < book.best_ask_tick


def test_cancel_unknown_raises():
    with pytest.raises(BookStateError):
        fresh().cancel(99)


def test_cancel_rate_zero_and_one():
    book = fresh()
    for t in range(20):
        book.place_order(BUY, -float(t), t)
    snap = book.snapshot()
    assert book.cancel_sweep(0.0, random.Random(1)) == []
    assert book.snapshot() == snap
    book.cancel_sweep(1.0, random.Random(1))
    assert len(book) == 0


def test_cancel_rate_validated():
    with pytest.raises(ParameterError):
        fresh().cancel_sweep(1.5, random.Random(0))


def _thousand_orders():
    book = OrderBook(tick=1.0)
    for i in range(500):
        book.add_resting(BUY, -1 - i % 50)
        book.add_resting(SELL, 1 + i % 50)
    return book


def test_cancel_count_binomial_band():
    lo, hi = 30, 70
    # exact binomial mass outside [30, 70] for n = 1000, p = 0.05
    outside = stats.binom.cdf(lo - 1, 1000, 0.05) + stats.binom.sf(hi, 1000, 0.05)
    assert outside < 5e-3
    for seed in range(20):
        n = len(_thousand_orders().cancel_sweep(0.05, random.Random(seed)))
        assert lo <= n <= hi


def test_cancel_counts_follow_binomial():
    counts = [len(_thousand_orders().cancel_sweep(0.05, random.Random(s))) for s in range(400)]
    # chi-square goodness of fit on pooled bins of binomial(1000, 0.05)
    edges = [-0.5, 39.5, 44.5, 48.5, 52.5, 56.5, 61.5, 1000.5]
    obs = np.histogram(counts, bins=edges)[0]
    cdf = stats.binom.cdf(np.floor(edges[1:]), 1000, 0.05) - stats.binom.cdf(np.floor(edges[:-1]), 1000, 0.05)
    exp = 400 * cdf / cdf.sum()
    assert stats.chisquare(obs, exp).pvalue > 1e-3
    assert np.mean(counts) == pytest.approx(50, abs=1.5)


def test_cancel_sweep_each_order_equally_likely():
    hits = np.zeros(1000)
    for s in range(300):
        book = _thousand_orders()
        ids = book.cancel_sweep(0.05, random.Random(s))
        hits[ids] += 1
    # first and second half of the id space get the same share
    assert hits[:500].sum() / hits.sum() == pytest.approx(0.5, abs=0.02)


def test_event_log_lines():
    buf = io.StringIO()
    book = OrderBook(tick=1.0, event_log=buf)
    book.bootstrap(half_spread=10)
    book.place_order(BUY, 30.0, 1)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "0\tseed\tbuy\t-10\t-10\t"
    assert lines[-1] == "2\ttrade\tbuy\t10\t-10\t"


ops = st.lists(
    st.one_of(
        st.tuples(st.just("place"), st.sampled_from([BUY, SELL]), st.floats(-6, 12)),
        st.tuples(st.just("cancel"), st.integers(0, 10 ** 6), st.just(0.0)),
    ),
    min_size=1, max_size=120,
)


@given(ops)
@settings(max_examples=150, deadline=None)
def test_matches_naive_reference(script):
    book = fresh(half=3)
    ref = NaiveBook()
    ref.seed(BUY, -3)
    ref.seed(SELL, 3)
    for t, (kind, a, x) in enumerate(script):
        if kind == "place":
            if book.best_bid_tick is None and book.best_ask_tick is None and book.last_trade_tick is None \
                    and book.last_mid_ticks2 is None:
                continue
            out = book.place_order(a, x, t)
            r = ref.place(a, x)
            if isinstance(out, TradeEvent):
                assert r == ("trade", out.price_tick, out.resting_id)
            else:
                assert r == ("rest", out.price_tick, out.order_id)
        else:
            resting = sorted(book.snapshot()[BUY].items()) + sorted(book.snapshot()[SELL].items())
            ids = [i for _, q in resting for i in q]
            if not ids:
                continue
            oid = ids[a % len(ids)]
            book.cancel(oid)
            ref.cancel(oid)
        assert book.snapshot() == ref.snapshot()
        b, s = book.best_bid_tick, book.best_ask_tick
        if b is not None and s is not None:
            assert b < s
        assert book.n_placed - book.n_executed - book.n_cancelled == len(book)


@given(ops, st.sampled_from([BUY, SELL]), st.floats(-6, 2))
@settings(max_examples=100, deadline=None)
def test_place_then_cancel_restores(script, side, x):
    book = fresh(half=3)
    rng = random.Random(0)
    for t, (kind, a, y) in enumerate(script):
        if kind == "place":
            book.place_order(a, y, t)
        else:
            book.cancel_sweep(0.1, rng)
        if book.best_bid_tick is None or book.best_ask_tick is None:
            book.refill(half_spread=3)
    snap = book.snapshot()
    quotes = (book.best_bid_tick, book.best_ask_tick)
    out = book.place_order(side, x, 10 ** 6)
    if isinstance(out, Rested):
        book.cancel(out.order_id)
        assert book.snapshot() == snap
        assert (book.best_bid_tick, book.best_ask_tick) == quotes


@given(st.lists(st.tuples(st.sampled_from([BUY, SELL]), st.floats(-5, 15)), max_size=300),
       st.floats(0.0, 0.3), st.integers(0, 1000))
@settings(max_examples=80, deadline=None)
def test_fifo_and_uncrossed_under_random_flow(flow, rate, seed):
    book = fresh(half=3)
    rng = random.Random(seed)
    for t, (side, x) in enumerate(flow):
        book.place_order(side, x, t)
        book.cancel_sweep(rate, rng)
        if book.best_bid_tick is None or book.best_ask_tick is None:
            book.refill(half_spread=3, time=t)
        b, a = book.best_bid_tick, book.best_ask_tick
        assert b < a
    for side, levels in book.snapshot().items():
        for tick, q in levels.items():
            times = [book.order(i).entry_time for i in q]
            assert times == sorted(times)
            assert all(book.order(i).log_price == tick and book.order(i).side == side for i in q)
    assert book.n_placed - book.n_executed - book.n_cancelled == len(book)
