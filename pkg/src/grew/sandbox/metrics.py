"""Ranking and watermark metrics over recommendation lists."""
import math

from grew.verifier import count_green


def _items(lst):
    return list(getattr(lst, "items", lst))


def _check_k(K):
    if K < 1:
        raise ValueError("K must be >= 1")


def recall_at_k(lists, targets, K):
    _check_k(K)
    lists, targets = list(lists), list(targets)
    if len(lists) != len(targets):
        raise ValueError("one held-out target per list is required")
    if not lists:
        return 0.0
    hits = sum(int(t) in _items(l)[:K] for l, t in zip(lists, targets))
    return hits / len(lists)


def ndcg_at_k(lists, targets, K):
    """Single-relevant-item NDCG: ``1/log2(rank + 1)`` at 1-based rank <= K."""
    _check_k(K)
    lists, targets = list(lists), list(targets)
    if len(lists) != len(targets):
        raise ValueError("one held-out target per list is required")
    if not lists:
        return 0.0
    total = 0.0
    for l, t in zip(lists, targets):
        top = _items(l)[:K]
        if int(t) in top:
            total += 1.0 / math.log2(top.index(int(t)) + 2)
    return total / len(lists)


def agreement_at_k(teacher_lists, student_lists, K):
    _check_k(K)
    teacher_lists, student_lists = list(teacher_lists), list(student_lists)
    if len(teacher_lists) != len(student_lists):
        raise ValueError("teacher and student lists are not aligned")
    if not teacher_lists:
        return 0.0
    total = 0.0
    for t, s in zip(teacher_lists, student_lists):
        if hasattr(t, "user_id") and hasattr(s, "user_id") and t.user_id != s.user_id:
            raise ValueError(f"misaligned users {t.user_id} vs {s.user_id}")
        total += len(set(_items(t)[:K]) & set(_items(s)[:K])) / K
    return total / len(teacher_lists)


def green_hit_rate(lists, key, coords, pcfg):
    g, n = count_green(lists, key, coords, pcfg)
    if n == 0:
        raise ValueError("no recommended items to count")
    return g / n
