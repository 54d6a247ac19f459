"""Pure-Python kernels; semantics must match mtforge._kernels bit for bit.

These are the hot inner loops of the toolkit: subword merge application,
adjacent-pair counting during merge learning, and the capacity-constrained
expert assignment of the token router. The compiled twin in _kernels.pyx
implements the exact same integer algorithms; tests assert parity.
"""

import numpy as np


def make_merge_table(entries):
    """Build a pair-merge lookup.

    entries: iterable of (left_id, right_id, rank, merged_id). Lower rank
    means the merge was learned earlier and applies first.
    """
    return {(left, right): (rank, merged) for left, right, rank, merged in entries}


def encode_word(table, ids):
    """Apply merges to one word (list of symbol ids) in learned order.

    Repeatedly merges the lowest-rank adjacent pair, left to right, until no
    adjacent pair is mergeable. Equivalent to replaying the merge list in
    order because a merge can only create pairs of strictly higher rank.
    """
    ids = list(ids)
    while len(ids) >= 2:
        best_rank = -1
        best_pair = None
        for i in range(len(ids) - 1):
            hit = table.get((ids[i], ids[i + 1]))
            if hit is not None and (best_rank < 0 or hit[0] < best_rank):
                best_rank, best_pair = hit[0], (ids[i], ids[i + 1])
        if best_pair is None:
            break
        merged = table[best_pair][1]
        out = []
        i = 0
        n = len(ids)
        while i < n:
            if i + 1 < n and ids[i] == best_pair[0] and ids[i + 1] == best_pair[1]:
                out.append(merged)
                i += 2
            else:
                out.append(ids[i])
                i += 1
        ids = out
    return ids


def count_pairs(flat_ids, offsets, freqs):
    """Count adjacent symbol pairs over a word list.

    flat_ids: concatenated symbol ids of all words; offsets[i]:offsets[i+1]
    delimits word i; freqs[i] is its corpus frequency. Returns a dict
    (left_id, right_id) -> total count.
    """
    counts = {}
    n_words = len(offsets) - 1
    for w in range(n_words):
        start, end = offsets[w], offsets[w + 1]
        f = freqs[w]
        for i in range(start, end - 1):
            key = (int(flat_ids[i]), int(flat_ids[i + 1]))
            counts[key] = counts.get(key, 0) + int(f)
    return counts


def assign_capacity(top1, top2, num_experts, capacity):
    """Two-pass capacity-constrained assignment.

    Pass 1 seats every token's first-choice expert in token order. Pass 2
    seats second choices, serving tokens whose first choice overflowed
    before tokens that already hold a seat (again in token order). Returns
    (keep1, keep2, load) as uint8/uint8/int64 arrays.
    """
    n = len(top1)
    keep1 = np.zeros(n, dtype=np.uint8)
    keep2 = np.zeros(n, dtype=np.uint8)
    load = np.zeros(num_experts, dtype=np.int64)
    for t in range(n):
        e = int(top1[t])
        if load[e] < capacity:
            keep1[t] = 1
            load[e] += 1
    for t in range(n):
        if not keep1[t]:
            e = int(top2[t])
            if load[e] < capacity:
                keep2[t] = 1
                load[e] += 1
    for t in range(n):
        if keep1[t]:
            e = int(top2[t])
            if load[e] < capacity:
                keep2[t] = 1
                load[e] += 1
    return keep1, keep2, load
