"""Hot row-wise kernels.

Every kernel exists twice: a numba version (``*_nb``) and a numpy version
(``*_np``). The module-level names dispatch to one of them according to
``grew._backend.HAS_NUMBA``. Both are kept importable so the benchmark and
the backend-agreement tests can call them side by side.
"""
import numpy as np

from grew._backend import HAS_NUMBA, njit

# ---------------------------------------------------------------- green mask
# gamma == 0 means an empty green set, even for items whose hash is exactly 0


def green_rows_np(coords, seeds, omega, gamma):
    phase = (coords[None, :] + seeds[:, None]) * omega
    return (np.abs(np.sin(phase)) <= gamma) & (gamma > 0.0)


@njit
def green_rows_nb(coords, seeds, omega, gamma):
    n_rows = seeds.shape[0]
    n_items = coords.shape[0]
    out = np.zeros((n_rows, n_items), dtype=np.bool_)
    if gamma <= 0.0:
        return out
    for r in range(n_rows):
        s = seeds[r]
        for i in range(n_items):
            out[r, i] = abs(np.sin((coords[i] + s) * omega)) <= gamma
    return out


def count_green_np(item_ids, item_seeds, coords, omega, gamma):
    if gamma <= 0.0:
        return 0
    h = np.abs(np.sin((coords[item_ids] + item_seeds) * omega))
    return int(np.count_nonzero(h <= gamma))


@njit
def count_green_nb(item_ids, item_seeds, coords, omega, gamma):
    n = 0
    if gamma <= 0.0:
        return n
    for j in range(item_ids.shape[0]):
        if abs(np.sin((coords[item_ids[j]] + item_seeds[j]) * omega)) <= gamma:
            n += 1
    return n


# ------------------------------------------------------------------- top-k


def topk_rows_np(scores, k):
    # stable sort on the negated scores keeps ascending item id among ties
    order = np.argsort(-scores, axis=1, kind="stable")
    return order[:, :k].astype(np.int64)


@njit
def _topk_row(row, k):
    neg = -row
    kth = np.partition(neg, k - 1)[k - 1]
    picked = np.empty(k, dtype=np.int64)
    n = 0
    for i in range(neg.shape[0]):
        if neg[i] < kth:
            picked[n] = i
            n += 1
    for i in range(neg.shape[0]):
        if n == k:
            break
        if neg[i] == kth:
            picked[n] = i
            n += 1
    # picked is in ascending id order, so a stable sort keeps id order on ties
    order = np.argsort(neg[picked], kind="mergesort")
    return picked[order]


@njit
def topk_rows_nb(scores, k):
    n_rows = scores.shape[0]
    out = np.empty((n_rows, k), dtype=np.int64)
    for r in range(n_rows):
        out[r, :] = _topk_row(scores[r], k)
    return out


# --------------------------------------------------------------- injection


def watermark_rows_np(scores, green, k_cand, top_k, beta, alpha_global):
    n_finite = np.isfinite(scores).sum(axis=1)
    if np.any(n_finite < max(k_cand, top_k)):
        raise ValueError("row has fewer finite scores than k_cand/top_k")
    neg = -scores
    thresh = -np.partition(neg, k_cand - 1, axis=1)[:, k_cand - 1]
    if top_k == 1:
        alpha_local = np.zeros(scores.shape[0])
    else:
        top = -np.sort(np.partition(neg, top_k - 1, axis=1)[:, :top_k], axis=1)
        w = np.exp(top - top[:, :1])
        p = w / w.sum(axis=1, keepdims=True)
        plogp = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
        ent = -plogp.sum(axis=1) / np.log(top_k)
        alpha_local = np.clip(ent, 0.0, 1.0) ** beta
    mask = (scores >= thresh[:, None]) & green
    out = scores + (alpha_global * alpha_local)[:, None] * mask
    return out, alpha_local, thresh


@njit
def watermark_rows_nb(scores, green, k_cand, top_k, beta, alpha_global):
    n_rows, n_items = scores.shape
    out = scores.copy()
    alpha_local = np.zeros(n_rows)
    thresh = np.empty(n_rows)
    need = max(k_cand, top_k)
    for r in range(n_rows):
        row = scores[r]
        n_finite = 0
        for i in range(n_items):
            if np.isfinite(row[i]):
                n_finite += 1
        if n_finite < need:
            raise ValueError("row has fewer finite scores than k_cand/top_k")
        part = np.partition(-row, k_cand - 1)
        thresh[r] = -part[k_cand - 1]
        if top_k > 1:
            # top_k <= k_cand, so the top_k largest scores sit in the partitioned head
            head = np.sort(part[:k_cand])[:top_k]
            top_max = -head[0]
            tot = 0.0
            for j in range(top_k):
                tot += np.exp(-head[j] - top_max)
            ent = 0.0
            for j in range(top_k):
                p = np.exp(-head[j] - top_max) / tot
                if p > 0.0:
                    ent -= p * np.log(p)
            ent /= np.log(top_k)
            ent = min(max(ent, 0.0), 1.0)
            alpha_local[r] = ent ** beta
        bump = alpha_global * alpha_local[r]
        for i in range(n_items):
            if green[r, i] and row[i] >= thresh[r]:
                out[r, i] = row[i] + bump
    return out, alpha_local, thresh


# --------------------------------------------------------- student counts


def accumulate_transitions_np(counts, contexts, items, weights):
    np.add.at(counts, (np.repeat(contexts, items.shape[1]), items.ravel()),
              np.tile(weights, items.shape[0]))
    return counts


@njit
def accumulate_transitions_nb(counts, contexts, items, weights):
    for r in range(items.shape[0]):
        c = contexts[r]
        for j in range(items.shape[1]):
            counts[c, items[r, j]] += weights[j]
    return counts


if HAS_NUMBA:
    green_rows = green_rows_nb
    count_green_flat = count_green_nb
    topk_rows = topk_rows_nb
    watermark_rows = watermark_rows_nb
    accumulate_transitions = accumulate_transitions_nb
else:
    green_rows = green_rows_np
    count_green_flat = count_green_np
    topk_rows = topk_rows_np
    watermark_rows = watermark_rows_np
    accumulate_transitions = accumulate_transitions_np
