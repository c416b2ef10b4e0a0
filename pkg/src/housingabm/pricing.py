"""Bid and list price formation with the trend-following feedback."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "bid_candidates",
    "decide_bid",
    "buyer_urgency",
    "seller_urgency",
    "comparable_quality",
    "comparable_quality_bulk",
    "list_price",
]


def bid_candidates(
    income,
    wealth,
    urgency,
    bid_factor,
    downpayment_wealth,
    loan_value,
    debt_income,
    approval_rate,
    mortgage_income_coeff,
    mortgage_income_exponent,
    lvr_mean,
    mortgage_rate,
    owning_expense_rate,
    aptitude,
    delta_hpi,
    denominator_floor=0.005,
):
    """The three bid-price candidates.

    P1 capitalises the income-implied borrowing capacity at the effective
    annual carrying-cost rate, shifted by the trend feedback; P2 caps the
    downpayment by wealth; P3 caps debt service by income.  The P1
    denominator is clamped below at ``denominator_floor``.

    Returns (P1, P2, P3, clamped) where ``clamped`` flags floored denominators.
    """
    annual_income = 12.0 * np.asarray(income, dtype=float)
    raw = lvr_mean * mortgage_rate + owning_expense_rate - aptitude * delta_hpi
    clamped = raw < denominator_floor
    denom = max(raw, denominator_floor)
    p1 = (
        np.asarray(bid_factor, dtype=float)
        * mortgage_income_coeff
        * annual_income ** mortgage_income_exponent
        * np.asarray(urgency, dtype=float)
        / denom
    )
    p2 = np.asarray(downpayment_wealth, dtype=float) * np.asarray(wealth, dtype=float) / (
        1.0 - np.asarray(loan_value, dtype=float)
    )
    p3 = np.asarray(debt_income, dtype=float) * annual_income / (
        np.asarray(loan_value, dtype=float) * np.asarray(approval_rate, dtype=float)
    )
    return p1, p2, p3, clamped


def decide_bid(p1, p2, p3, expectation_downshift, eligible=True):
    """Bid at min(P1, P2, P3) when that price clears the downshift gate.

    Returns (bid_price, will_bid) arrays; ``eligible`` masks agents allowed
    to bid at all (e.g. below the portfolio cap).
    """
    p1 = np.asarray(p1, dtype=float)
    bid = np.minimum(np.minimum(p1, p2), p3)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(p1 > 0, bid / np.where(p1 > 0, p1, 1.0), 0.0)
    will_bid = (ratio > expectation_downshift) & (bid > 0) & eligible
    return bid, will_bid


def buyer_urgency(months_since_sale, urgency_value, window_months):
    """Elevated urgency in the configured window after selling a house."""
    mss = np.asarray(months_since_sale)
    recent = (mss >= 0) & (mss < window_months)
    out = np.where(recent, urgency_value, 1.0)
    return float(out) if out.ndim == 0 else out


def seller_urgency(owner_wealth, vacant_valence, urgency_value):
    """Discounted listing urgency under financial stress or a vacant rental."""
    stressed = (np.asarray(owner_wealth) < 0) | np.asarray(vacant_valence)
    out = np.where(stressed, urgency_value, 1.0)
    return float(out) if out.ndim == 0 else out


def comparable_quality(house: int, qualities: np.ndarray, k: int = 10) -> float:
    """Mean quality of the k nearest houses by |quality difference|.

    Excludes the house itself; ties in distance break toward the smaller
    house id.  With fewer than k other houses, all of them are used.
    """
    qualities = np.asarray(qualities, dtype=float)
    n = qualities.size
    if n == 1:
        return float(qualities[house])
    others = np.delete(np.arange(n), house)
    dist = np.abs(qualities[others] - qualities[house])
    order = np.lexsort((others, dist))
    chosen = others[order[:k]]
    return float(qualities[chosen].mean())


def comparable_quality_bulk(houses: np.ndarray, qualities: np.ndarray, k: int = 10) -> np.ndarray:
    """Vector of comparable_quality for many query houses.

    The k nearest neighbours by quality form a contiguous window in quality
    order, so each query reduces to picking the best of k+1 candidate
    windows; window sums come from a prefix sum.  Queries with distance ties
    at the k-th neighbour fall back to an exact walk with the id tie-break.
    """
    houses = np.asarray(houses)
    qualities = np.asarray(qualities, dtype=float)
    n = qualities.size
    m = houses.size
    if m == 0:
        return np.empty(0)
    if n <= k + 1:
        if n == 1:
            return qualities[houses].astype(float)
        total = qualities.sum()
        return (total - qualities[houses]) / (n - 1)

    ids = np.arange(n)
    order = np.lexsort((ids, qualities))  # by quality then id
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    sorted_q = qualities[order]
    sorted_id = ids[order]
    csum = np.concatenate([[0.0], np.cumsum(sorted_q)])

    p = pos[houses]
    q = sorted_q[p]
    j = np.arange(k + 1)
    left = p[:, None] - (k - j)
    right = p[:, None] + j
    valid = (left >= 0) & (right < n)
    lq = sorted_q[np.clip(left, 0, n - 1)]
    rq = sorted_q[np.clip(right, 0, n - 1)]
    # Edge distances of each candidate window's picked elements (self excluded).
    dl = np.where(left < p[:, None], q[:, None] - lq, 0.0)
    dr = np.where(right > p[:, None], rq - q[:, None], 0.0)
    cost = np.where(valid, np.maximum(dl, dr), np.inf)
    best = np.argmin(cost, axis=1)
    rows = np.arange(m)
    kth = cost[rows, best]
    bl = left[rows, best]
    br = right[rows, best]
    out = (csum[br + 1] - csum[bl] - q) / k

    # Ambiguity: several windows at the minimal cost, or an element just
    # outside the window tied at the k-th distance.
    multi = (cost == kth[:, None]).sum(axis=1) > 1
    tie_left = (bl > 0) & (q - sorted_q[np.maximum(bl - 1, 0)] == kth)
    tie_right = (br < n - 1) & (sorted_q[np.minimum(br + 1, n - 1)] - q == kth)
    for qi in np.nonzero(multi | tie_left | tie_right)[0]:
        out[qi] = _comparable_exact(int(p[qi]), sorted_q, sorted_id, n, k)
    return out


def _comparable_exact(p: int, sorted_q: np.ndarray, sorted_id: np.ndarray,
                      n: int, k: int) -> float:
    """Exact sorted-neighbour walk with the id tie-break at the k-th distance."""
    q = sorted_q[p]
    left, right = p - 1, p + 1
    picked: list[int] = []
    kth = 0.0
    while len(picked) < k and (left >= 0 or right < n):
        dl = q - sorted_q[left] if left >= 0 else np.inf
        dr = sorted_q[right] - q if right < n else np.inf
        if dl <= dr:
            picked.append(left)
            kth = dl
            left -= 1
        else:
            picked.append(right)
            kth = dr
            right += 1
    ties = [i for i in picked if abs(sorted_q[i] - q) == kth]
    while left >= 0 and q - sorted_q[left] == kth:
        ties.append(left)
        left -= 1
    while right < n and sorted_q[right] - q == kth:
        ties.append(right)
        right += 1
    firm = [i for i in picked if abs(sorted_q[i] - q) < kth]
    slots = min(k, n - 1) - len(firm)
    ties.sort(key=lambda i: sorted_id[i])
    chosen = firm + ties[:slots]
    return float(sorted_q[chosen].mean()) if chosen else float(q)


def list_price(comp_quality, sold_to_list, urgency, months_listed,
               list_factor, sold_list_exponent, months_listed_exponent):
    """List price: premium over comparable quality, scaled by the market's
    sold-to-list ratio and discounted with time on market."""
    return (
        np.asarray(list_factor, dtype=float)
        * np.asarray(comp_quality, dtype=float)
        * np.asarray(sold_to_list, dtype=float) ** np.asarray(sold_list_exponent, dtype=float)
        * np.asarray(urgency, dtype=float)
        / (1.0 + np.asarray(months_listed, dtype=float)) ** np.asarray(months_listed_exponent, dtype=float)
    )
