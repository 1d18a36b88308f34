"""Price-time priority limit order book for unit-size orders.

Prices are integer tick indices; a log-price is ``tick_index * tick``.
Each price level is an insertion-ordered dict of order ids, so the first
key is the oldest order at that level. Best quotes are tracked with heaps
that are cleaned lazily when a level empties.
"""

import heapq
import math
from dataclasses import dataclass

from .errors import BookStateError, ParameterError

__all__ = ["BUY", "SELL", "Order", "TradeEvent", "Rested", "OrderBook", "DEFAULT_TICK"]

BUY = 1
SELL = -1
DEFAULT_TICK = 1e-4


@dataclass(frozen=True)
class Order:
    id: int
    side: int
    log_price: int  # tick index
    entry_time: int


@dataclass(frozen=True)
class TradeEvent:
    time: int
    price_tick: int
    aggressor_side: int
    resting_id: int


@dataclass(frozen=True)
class Rested:
    order_id: int
    price_tick: int


def _side_name(side):
    return "buy" if side == BUY else "sell"


class OrderBook:
    """Two-sided book of unit orders with price-time priority matching.

    A new order's price is set relative to the best quote on its own side:
    ``pi = pi_b + x`` for a buy and ``pi = pi_a - x`` for a sell. If that
    price reaches the opposite best quote, one unit is executed against the
    oldest order there and the incoming order is consumed; otherwise it
    rests. When the own side is empty the anchor falls back to the last
    trade price, then to the last mid price.

    ``event_log``, if given, is a text stream receiving one tab-separated
    line per event: index, type, side, tick, best bid, best ask.
    """

    def __init__(self, tick=DEFAULT_TICK, event_log=None):
        if not tick > 0:
            raise ParameterError(f"tick must be positive, got {tick}")
        self.tick = float(tick)
        self._levels = {BUY: {}, SELL: {}}
        self._heaps = {BUY: [], SELL: []}  # bids stored negated
        self._orders = {}
        self._resting = []  # order ids, for uniform random access
        self._slot = {}
        self._next_id = 0
        self._event_index = 0
        self.event_log = event_log
        self.last_trade_tick = None
        self.last_mid_ticks2 = None  # twice the mid, in ticks, to stay integral
        self.n_placed = 0
        self.n_executed = 0  # orders filled: both the aggressor and the resting order
        self.n_trades = 0
        self.n_cancelled = 0
        self.n_anchor_fallbacks = 0

    # -- quotes -----------------------------------------------------------

    def _best(self, side):
        heap = self._heaps[side]
        levels = self._levels[side]
        while heap:
            key = heap[0]
            price = -key if side == BUY else key
            if price in levels:
                return price
            heapq.heappop(heap)
        return None

    @property
    def best_bid_tick(self):
        return self._best(BUY)

    @property
    def best_ask_tick(self):
        return self._best(SELL)

    def mid_log_price(self):
        """Mid log-price, or None when either side is empty."""
        bid = self._best(BUY)
        ask = self._best(SELL)
        if bid is None or ask is None:
            return None
        return 0.5 * (bid + ask) * self.tick

    def depth(self, side=None):
        if side is None:
            return len(self._orders)
        return sum(len(q) for q in self._levels[side].values())

    def __len__(self):
        return len(self._orders)

    def __contains__(self, order_id):
        return order_id in self._orders

    def order(self, order_id):
        return self._orders[order_id]

    def snapshot(self):
        """Resting orders as ``{side: {tick: [ids in priority order]}}``."""
        return {
            side: {p: list(q) for p, q in sorted(levels.items())}
            for side, levels in self._levels.items()
        }

    def _update_mid(self):
        bid = self._best(BUY)
        ask = self._best(SELL)
        if bid is not None and ask is not None:
            self.last_mid_ticks2 = bid + ask

    def _log(self, kind, side, tick):
        if self.event_log is not None:
            bid, ask = self._best(BUY), self._best(SELL)
            self.event_log.write(
                f"{self._event_index}\t{kind}\t{_side_name(side)}\t{tick}\t"
                f"{'' if bid is None else bid}\t{'' if ask is None else ask}\n"
            )
        self._event_index += 1

    # -- resting orders ---------------------------------------------------

    def _insert(self, side, price, time):
        oid = self._next_id
        self._next_id += 1
        levels = self._levels[side]
        queue = levels.get(price)
        if queue is None:
            queue = levels[price] = {}
            heapq.heappush(self._heaps[side], -price if side == BUY else price)
        queue[oid] = time
        self._orders[oid] = Order(oid, side, price, time)
        self._slot[oid] = len(self._resting)
        self._resting.append(oid)
        return oid

    def _remove(self, oid):
        order = self._orders.pop(oid)
        levels = self._levels[order.side]
        queue = levels[order.log_price]
        del queue[oid]
        if not queue:
            del levels[order.log_price]
        # swap-remove from the random-access list
        slot = self._slot.pop(oid)
        last = self._resting.pop()
        if last != oid:
            self._resting[slot] = last
            self._slot[last] = slot
        return order

    def add_resting(self, side, price_tick, time=0):
        """Insert an order directly at ``price_tick`` without matching.

        Used to seed the book; refuses prices that would cross it.
        """
        price_tick = int(price_tick)
        opp = self._best(-side)
        if opp is not None and (price_tick >= opp if side == BUY else price_tick <= opp):
            raise BookStateError("resting order would cross the book")
        oid = self._insert(side, price_tick, time)
        self.n_placed += 1
        self._update_mid()
        self._log("seed", side, price_tick)
        return oid

    def bootstrap(self, half_spread=0.01, time=0):
        """Seed one bid and one ask at log-prices -half_spread and +half_spread."""
        k = int(round(half_spread / self.tick))
        self.add_resting(BUY, -k, time)
        self.add_resting(SELL, k, time)

    def refill(self, half_spread=0.01, time=0):
        """Re-seed an empty side with one order ``half_spread`` away from the last mid.

        Returns the number of orders added (0, 1 or 2).
        """
        k = int(round(half_spread / self.tick))
        added = 0
        for side in (BUY, SELL):
            if self._best(side) is not None:
                continue
            if self.last_mid_ticks2 is None:
                raise BookStateError("cannot refill a book that never had a mid price")
            centre = self.last_mid_ticks2 // 2
            opp = self._best(-side)
            price = centre - k if side == BUY else centre + k
            # keep the refilled quote behind the surviving opposite side
            if opp is not None:
                price = min(price, opp - 1) if side == BUY else max(price, opp + 1)
            self.add_resting(side, price, time)
            added += 1
        return added

    # -- order flow -------------------------------------------------------

    def _anchor(self, side):
        best = self._best(side)
        if best is not None:
            return best
        if self.last_trade_tick is not None:
            self.n_anchor_fallbacks += 1
            return self.last_trade_tick
        if self.last_mid_ticks2 is not None:
            self.n_anchor_fallbacks += 1
            return self.last_mid_ticks2 // 2
        raise BookStateError(f"no quote to anchor a {_side_name(side)} order")

    def price_for(self, side, x):
        """Tick index of an order with relative log-price ``x``.

        Halves round away from the spread: down for buys, up for sells.
        """
        anchor = self._anchor(side)
        u = x / self.tick
        if side == BUY:
            return anchor + math.ceil(u - 0.5)
        return anchor - math.ceil(u - 0.5)

    def place_order(self, side, x, time):
        """Submit a unit order at relative price ``x``.

        Returns ``Rested`` or, when the price reaches the opposite best
        quote, a ``TradeEvent`` for the single unit executed.
        """
        price = self.price_for(side, x)
        self.n_placed += 1
        opp = self._best(-side)
        if opp is not None and (price >= opp if side == BUY else price <= opp):
            queue = self._levels[-side][opp]
            resting_id = next(iter(queue))
            self._remove(resting_id)
            self.n_executed += 2
            self.n_trades += 1
            self.last_trade_tick = opp
            self._update_mid()
            self._log("trade", side, opp)
            return TradeEvent(time=time, price_tick=opp, aggressor_side=side, resting_id=resting_id)
        oid = self._insert(side, price, time)
        self._update_mid()
        self._log("limit", side, price)
        return Rested(order_id=oid, price_tick=price)

    def cancel(self, order_id):
        """Withdraw one resting order; returns the removed ``Order``."""
        if order_id not in self._orders:
            raise BookStateError(f"order {order_id} is not resting")
        order = self._remove(order_id)
        self.n_cancelled += 1
        self._update_mid()
        self._log("cancel", order.side, order.log_price)
        return order

    def cancel_sweep(self, rate, rng):
        """Cancel each resting order independently with probability ``rate``.

        ``rng`` is a ``random.Random``. Cancelled positions are found by
        geometric skipping, so the cost is proportional to the number of
        cancellations rather than to the book depth.
        """
        if not 0.0 <= rate <= 1.0:
            raise ParameterError(f"cancellation rate must lie in [0, 1], got {rate}")
        n = len(self._resting)
        if n == 0 or rate == 0.0:
            return []
        if rate == 1.0:
            chosen = list(self._resting)
        else:
            log_keep = math.log1p(-rate)
            chosen = []
            pos = -1
            while True:
                # float skip first: a tiny rate makes it overflow an int
                skip = math.log(1.0 - rng.random()) / log_keep
                if pos + 1 + skip >= n:
                    break
                pos += 1 + int(skip)
                chosen.append(self._resting[pos])
        for oid in chosen:
            self.cancel(oid)
        return chosen
