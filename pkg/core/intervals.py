"""
Half-open interval algebra on integer-second spans.

A span is a `(start, end)` tuple meaning [start, end). Every function returns
merged, sorted, non-empty spans.
"""
from typing import Iterable, List, Sequence, Tuple

Span = Tuple[int, int]


def merge(spans: Iterable[Span]) -> List[Span]:
    """Sort and merge overlapping or touching spans; empty spans are dropped."""
    ordered = sorted((s, e) for s, e in spans if e > s)
    merged: List[Span] = []
    for start, end in ordered:
        if merged and start <= merged[-1][1]:
            if end > merged[-1][1]:
                merged[-1] = (merged[-1][0], end)
        else:
            merged.append((start, end))
    return merged


def clip(spans: Iterable[Span], lo: int, hi: int) -> List[Span]:
    """Restrict spans to [lo, hi)."""
    return merge((max(s, lo), min(e, hi)) for s, e in spans)


def subtract(spans: Iterable[Span], removed: Iterable[Span]) -> List[Span]:
    """Set difference spans \\ removed, splitting spans where needed."""
    base = merge(spans)
    cuts = merge(removed)
    result: List[Span] = []
    j = 0
    for start, end in base:
        cursor = start
        while j < len(cuts) and cuts[j][1] <= cursor:
            j += 1
        k = j
        while k < len(cuts) and cuts[k][0] < end:
            cut_start, cut_end = cuts[k]
            if cut_start > cursor:
                result.append((cursor, cut_start))
            cursor = max(cursor, cut_end)
            if cursor >= end:
                break
            k += 1
        if cursor < end:
            result.append((cursor, end))
    return result


def intersect(a: Iterable[Span], b: Iterable[Span]) -> List[Span]:
    """Intersection of two span sets."""
    left, right = merge(a), merge(b)
    result: List[Span] = []
    i = j = 0
    while i < len(left) and j < len(right):
        start = max(left[i][0], right[j][0])
        end = min(left[i][1], right[j][1])
        if start < end:
            result.append((start, end))
        if left[i][1] < right[j][1]:
            i += 1
        else:
            j += 1
    return result


def intersect_all(groups: Sequence[Iterable[Span]]) -> List[Span]:
    """Spans covered by every group; empty when there are no groups."""
    if not groups:
        return []
    acc = merge(groups[0])
    for group in groups[1:]:
        acc = intersect(acc, group)
        if not acc:
            break
    return acc


def union(*groups: Iterable[Span]) -> List[Span]:
    return merge(span for group in groups for span in group)


def measure(spans: Iterable[Span]) -> int:
    """Total length of the union of spans."""
    return sum(e - s for s, e in merge(spans))
