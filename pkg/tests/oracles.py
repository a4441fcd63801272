"""Independent reference computations used by the tests.

These deliberately avoid the library's n-gram helpers: windows are built by
index arithmetic and counts by quadratic scanning.
"""

import math


def windows(seq, n):
    out = []
    i = 0
    while i + n <= len(seq):
        out.append(tuple(seq[j] for j in range(i, i + n)))
        i += 1
    return out


def level_windows(comment, level, n):
    if level == "word":
        return windows(list(comment.tokens.tokens), n)
    if level == "pos":
        return windows(list(comment.pos_tags), n)
    out = []
    for tok in comment.tokens.tokens:
        out += windows(list(tok), n)
    return out


def brute_counts(comments, level, n):
    """Quadratic: each distinct window is counted by scanning all windows."""
    all_w = []
    for c in comments:
        all_w += level_windows(c, level, n)
    counts = {}
    for w in all_w:
        if w not in counts:
            counts[w] = sum(1 for v in all_w if v == w)
    return counts


def brute_sim(comment, class_comments, level, n):
    class_w = []
    for c in class_comments:
        class_w += level_windows(c, level, n)
    total = 0.0
    for w in level_windows(comment, level, n):
        k = sum(1 for v in class_w if v == w)
        total += math.log(k if k > 0 else 1) / math.log(2)
    return total
