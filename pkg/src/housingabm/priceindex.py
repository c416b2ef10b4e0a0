"""Price statistics: monthly means, moving average, repeat-sales index.

The index follows the repeat-sales regression of Bailey, Muth and Nourse:
log price ratios of consecutive sales of the same house are regressed on
month dummies (+1 at the second sale, -1 at the first), with the base month
coefficient fixed at zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "monthly_mean",
    "moving_average",
    "bmn_index",
    "annual_change",
    "RepeatSalesIndex",
]


def monthly_mean(prices: np.ndarray) -> float:
    """Arithmetic mean deal price of one month; NaN when there were no deals."""
    prices = np.asarray(prices, dtype=float)
    if prices.size == 0:
        return float("nan")
    return float(prices.mean())


def moving_average(values, window: int = 12) -> np.ndarray:
    """Trailing mean over the defined (non-NaN) entries in each window.

    A window with no defined entries yields NaN.
    """
    values = np.asarray(values, dtype=float)
    defined = np.isfinite(values)
    filled = np.where(defined, values, 0.0)
    kernel = np.ones(window)
    sums = np.convolve(filled, kernel)[: values.size]
    counts = np.convolve(defined.astype(float), kernel)[: values.size]
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(counts > 0, sums / np.where(counts > 0, counts, 1.0), np.nan)
    return out


class RepeatSalesIndex:
    """Incremental repeat-sales index over a fixed month range [0, n_months).

    Sales are appended as they happen; the normal-equation blocks update
    incrementally, so re-solving each month is cheap.
    """

    def __init__(self, n_months: int):
        self.n_months = n_months
        # Column j corresponds to month j+1 (month 0 is the base, fixed at 0).
        self._gram = np.zeros((n_months - 1, n_months - 1))
        self._rhs = np.zeros(n_months - 1)
        self._touched = np.zeros(n_months, dtype=bool)
        self._touched[0] = True  # base month is identified by construction
        self._last_sale_month: dict[int, int] = {}
        self._last_sale_price: dict[int, float] = {}
        self.n_pairs = 0

    def add_sales(self, house_ids, prices, month: int) -> None:
        house_ids = np.asarray(house_ids)
        prices = np.asarray(prices, dtype=float)
        # Canonical within-month order, so the caller's ordering is irrelevant.
        order = np.lexsort((prices, house_ids))
        for house, price in zip(house_ids[order], prices[order]):
            house = int(house)
            if house in self._last_sale_month:
                self._add_pair(self._last_sale_month[house], self._last_sale_price[house],
                               month, price)
            self._last_sale_month[house] = month
            self._last_sale_price[house] = price

    def _add_pair(self, m1: int, p1: float, m2: int, p2: float) -> None:
        if m1 == m2 or p1 <= 0 or p2 <= 0:
            return
        y = np.log(p2 / p1)
        j2 = m2 - 1  # dummy +1
        j1 = m1 - 1  # dummy -1 (absent when m1 is the base month)
        self._gram[j2, j2] += 1.0
        self._rhs[j2] += y
        if m1 > 0:
            self._gram[j1, j1] += 1.0
            self._gram[j1, j2] -= 1.0
            self._gram[j2, j1] -= 1.0
            self._rhs[j1] -= y
        self._touched[m1] = True
        self._touched[m2] = True
        self.n_pairs += 1

    def log_index(self, upto: int | None = None) -> np.ndarray:
        """Log-index for months [0, upto]; untouched months are interpolated
        log-linearly between identified neighbours (flat at the ends)."""
        upto = self.n_months - 1 if upto is None else upto
        if self.n_pairs == 0:
            return np.zeros(upto + 1)
        cols = np.nonzero(self._touched[1:])[0]
        gram = self._gram[np.ix_(cols, cols)]
        rhs = self._rhs[cols]
        try:
            coef = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            coef = np.linalg.pinv(gram) @ rhs
        if not np.all(np.isfinite(coef)):
            coef = np.linalg.pinv(gram) @ rhs
        log_full = np.zeros(self.n_months)
        log_full[cols + 1] = coef
        months = np.arange(upto + 1)
        known = np.nonzero(self._touched[: upto + 1])[0]
        return np.interp(months, known, log_full[known])

    def index(self, upto: int | None = None) -> np.ndarray:
        return np.exp(self.log_index(upto))


def bmn_index(months, house_ids, prices, n_months: int) -> np.ndarray:
    """Repeat-sales index from a transaction log; base month 0 has index 1.

    ``months``/``house_ids``/``prices`` are parallel arrays of every sale.
    Within-month ordering does not affect pairing: sales are processed in
    month order, and two sales of one house in the same month are ignored
    as a pair (zero holding period).
    """
    months = np.asarray(months)
    house_ids = np.asarray(house_ids)
    prices = np.asarray(prices, dtype=float)
    acc = RepeatSalesIndex(n_months)
    for month in np.unique(months):
        mask = months == month
        acc.add_sales(house_ids[mask], prices[mask], int(month))
    return acc.index()


def annual_change(index: np.ndarray, t: int) -> float:
    """Year-over-year index change using completed months only: the ratio of
    the index at t-1 to t-13, minus 1; zero during warm-up."""
    if t < 13:
        return 0.0
    index = np.asarray(index, dtype=float)
    return float(index[t - 1] / index[t - 13] - 1.0)
