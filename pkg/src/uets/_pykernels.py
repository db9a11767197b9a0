"""Pure-Python combinatorial kernels.

Every function here has a compiled twin in ``_ckernels.pyx`` with the same
signature and results. Inputs are integer tables indexed by bitmask; callers
scale rational values to a common denominator first.
"""

from __future__ import annotations

from typing import Optional, Sequence


def minmax_partition(table: Sequence[int], n: int, k: int, cap: int) -> tuple[int, list[int]]:
    """Min over partitions of items ``0..n-1`` into at most ``k`` blocks of size
    at most ``cap`` of the largest block value ``table[mask]``.

    Returns ``(value, labels)`` where ``labels`` is the lexicographically
    smallest restricted growth string attaining the optimum. ``table`` must be
    monotone under inclusion; partial blocks are pruned on their current value.
    """
    if n == 0:
        return 0, []
    if k * cap < n or k < 1:
        raise ValueError("no partition satisfies the block count and size cap")
    lower = max(table[1 << i] for i in range(n))
    blocks = [0] * k
    sizes = [0] * k
    labels = [0] * n
    best = -1
    best_labels: list[int] = []

    # pass 1: optimal value, strict improvement only
    def search(i: int, used: int, cur: int) -> bool:
        nonlocal best, best_labels
        if i == n:
            best = cur
            best_labels = labels[:]
            return best <= lower
        bit = 1 << i
        top = used + 1 if used < k else used
        for b in range(top):
            if sizes[b] >= cap:
                continue
            c = table[blocks[b] | bit]
            nxt = c if c > cur else cur
            if best >= 0 and nxt >= best:
                continue
            blocks[b] |= bit
            sizes[b] += 1
            labels[i] = b
            stop = search(i + 1, used + 1 if b == used else used, nxt)
            blocks[b] ^= bit
            sizes[b] -= 1
            if stop:
                return True
        return False

    search(0, 0, 0)
    target = best

    # pass 2: first string in lexicographic order meeting the optimum
    def first(i: int, used: int) -> bool:
        if i == n:
            return True
        bit = 1 << i
        top = used + 1 if used < k else used
        for b in range(top):
            if sizes[b] >= cap or table[blocks[b] | bit] > target:
                continue
            blocks[b] |= bit
            sizes[b] += 1
            labels[i] = b
            if first(i + 1, used + 1 if b == used else used):
                return True
            blocks[b] ^= bit
            sizes[b] -= 1
        return False

    for b in range(k):
        blocks[b] = 0
        sizes[b] = 0
    if first(0, 0):
        return target, labels[:]
    return target, best_labels


def held_karp_all(dist: Sequence[Sequence[int]]) -> list[int]:
    """Optimal closed tour through point 0 and every subset of points ``1..P-1``.

    Entry ``mask`` of the result covers the points ``{0} | {i+1 : bit i of mask}``.
    """
    p = len(dist)
    m = p - 1
    if m <= 0:
        return [0]
    full = 1 << m
    inf = float("inf")
    dp = [[inf] * m for _ in range(full)]
    for j in range(m):
        dp[1 << j][j] = dist[0][j + 1]
    for mask in range(1, full):
        row = dp[mask]
        for j in range(m):
            cur = row[j]
            if cur == inf:
                continue
            dj = dist[j + 1]
            for nxt in range(m):
                bit = 1 << nxt
                if mask & bit:
                    continue
                cand = cur + dj[nxt + 1]
                target = dp[mask | bit]
                if cand < target[nxt]:
                    target[nxt] = cand
    tours = [0] * full
    for mask in range(1, full):
        row = dp[mask]
        tours[mask] = min(row[j] + dist[j + 1][0] for j in range(m) if mask >> j & 1)
    return tours


def subadditive_violation(table: Sequence[int], n: int) -> Optional[tuple[int, int]]:
    """First disjoint pair ``(X, Y)`` with ``table[X] + table[Y] < table[X | Y]``."""
    for s in range(1, 1 << n):
        low = s & -s
        rest = s ^ low
        ts = table[s]
        sub = rest
        while True:
            x = sub | low
            if x != s:
                y = s ^ x
                if table[x] + table[y] < ts:
                    return x, y
            if sub == 0:
                break
            sub = (sub - 1) & rest
    return None


def monotone_violation(table: Sequence[int], n: int) -> Optional[tuple[int, int]]:
    """First pair ``(X, Y)`` with ``X`` a one-element-smaller subset of ``Y`` and ``table[X] > table[Y]``."""
    for s in range(1, 1 << n):
        ts = table[s]
        for i in range(n):
            bit = 1 << i
            if s & bit and table[s ^ bit] > ts:
                return s ^ bit, s
    return None


def closure_table(table: Sequence[int], n: int) -> list[int]:
    """Cheapest split of every mask into blocks, each paying its own table value."""
    out = [0] * (1 << n)
    for s in range(1, 1 << n):
        low = s & -s
        rest = s ^ low
        best = table[s]
        sub = rest
        while True:
            x = sub | low
            if x != s:
                cand = table[x] + out[s ^ x]
                if cand < best:
                    best = cand
            if sub == 0:
                break
            sub = (sub - 1) & rest
        out[s] = best
    return out
