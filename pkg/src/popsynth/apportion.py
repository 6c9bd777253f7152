"""Integer apportionment with exact totals."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence


def largest_remainder(weights: Sequence[int], total: int) -> list[int]:
    """Split ``total`` into integers proportional to ``weights``.

    Uses exact integer arithmetic: each share is floored and the leftover
    units go to the largest remainders, ties to the lower index. When all
    weights are zero the split is uniform.

    >>> largest_remainder([1, 1, 1], 10)
    [4, 3, 3]
    """
    if total < 0:
        raise ValueError("total must be non-negative")
    n = len(weights)
    if n == 0:
        if total:
            raise ValueError("cannot apportion a nonzero total over no weights")
        return []
    if any(w < 0 for w in weights):
        raise ValueError("weights must be non-negative")
    wsum = sum(weights)
    if wsum == 0:
        weights = [1] * n
        wsum = n
    shares = []
    rems = []
    for i, w in enumerate(weights):
        q, r = divmod(w * total, wsum)
        shares.append(q)
        rems.append((-r, i))
    left = total - sum(shares)
    for _, i in sorted(rems)[:left]:
        shares[i] += 1
    return shares


def bounded_allocation(weights: Sequence[int], lower: Sequence[int], units: Sequence[int],
                       total: int) -> list[int]:
    """Allocate ``total`` over items that each consume ``units[i]`` per count.

    Counts are proportional to the weights (one common scale factor) except
    where that would fall below ``lower``; those items are pinned at their
    bound and the rest rescaled. The result satisfies
    ``sum(units[i] * x[i]) == total`` and ``x[i] >= lower[i]``. At least one
    item must have unit 1 so odd residuals can always be placed.
    """
    n = len(weights)
    if sum(u * lb for u, lb in zip(units, lower)) > total:
        raise ValueError("lower bounds exceed the total")
    if 1 not in units:
        raise ValueError("need at least one unit-size item")
    w = list(weights)
    if sum(w) == 0:
        w = [1] * n
    fixed = [False] * n
    while True:
        rem = total - sum(units[i] * lower[i] for i in range(n) if fixed[i])
        wfree = sum(units[i] * w[i] for i in range(n) if not fixed[i])
        if wfree == 0:
            scale = Fraction(0)
        else:
            scale = Fraction(rem, wfree)
        newly = [i for i in range(n) if not fixed[i] and scale * w[i] < lower[i]]
        if not newly:
            break
        for i in newly:
            fixed[i] = True
    exact = [Fraction(lower[i]) if fixed[i] else scale * w[i] for i in range(n)]
    counts = [int(x) for x in exact]  # floor: all values are non-negative
    residual = total - sum(u * c for u, c in zip(units, counts))
    order = sorted(range(n), key=lambda i: (-(exact[i] - counts[i]), -w[i], i))
    for i in order:
        if units[i] <= residual and exact[i] > counts[i]:
            counts[i] += 1
            residual -= units[i]
    # leftovers (e.g. when pinned or zero-weight items absorb nothing) go to
    # unit-size items, heaviest first
    ones = sorted((i for i in range(n) if units[i] == 1), key=lambda i: (-w[i], i))
    k = 0
    while residual > 0:
        counts[ones[k % len(ones)]] += 1
        residual -= 1
        k += 1
    return counts
