"""Teacher scorer, watermarked serving, calibration, and the extraction student."""
from dataclasses import dataclass
import math

import numpy as np

from grew import kernels
from grew.injector import GlobalController, update_controller
from grew.partition import green_matrix, step_seeds
from grew.verifier import RecommendationList

_CHUNK = 2048


@dataclass
class TeacherScorer:
    embeddings: np.ndarray
    popularity: np.ndarray
    rho: float = 0.8
    lambda_pop: float = 0.1

    @classmethod
    def from_catalog(cls, catalog, rho=0.8, lambda_pop=0.1):
        return cls(catalog.embeddings, catalog.popularity, rho=rho, lambda_pop=lambda_pop)

    @property
    def n_items(self):
        return self.embeddings.shape[0]

    def context(self, history):
        h = np.asarray(history, dtype=np.int64)
        w = self.rho ** np.arange(h.size - 1, -1, -1, dtype=np.float64)
        return (w / w.sum()) @ self.embeddings[h]

    def score_batch(self, histories):
        if any(len(h) == 0 for h in histories):
            raise ValueError("teacher needs a non-empty history")
        U = np.stack([self.context(h) for h in histories])
        d = self.embeddings.shape[1]
        Z = U @ self.embeddings.T / math.sqrt(d)
        if self.lambda_pop:
            Z += self.lambda_pop * np.log(self.popularity)
        for r, h in enumerate(histories):
            Z[r, h] = -np.inf
        return Z


def score_next(teacher, history):
    return teacher.score_batch([list(history)])[0]


@dataclass(frozen=True)
class Watermark:
    """Everything needed to watermark served logits with a frozen controller."""
    key: object
    coords: np.ndarray
    pcfg: object
    icfg: object
    alpha_global: float


def _chunks(n, size=_CHUNK):
    for lo in range(0, n, size):
        yield lo, min(n, lo + size)


def serve_topk(scorer, histories, K, watermark=None):
    """Top-K item matrix for a batch of histories, optionally watermarked."""
    out = np.empty((len(histories), K), dtype=np.int64)
    for lo, hi in _chunks(len(histories)):
        hs = histories[lo:hi]
        Z = scorer.score_batch(hs)
        if watermark is not None:
            wm = watermark
            G = green_matrix(wm.coords, step_seeds(wm.key, hs, wm.pcfg), wm.pcfg)
            Z, _, _ = kernels.watermark_rows(Z, G, int(wm.icfg.k_cand), int(wm.icfg.top_k),
                                             float(wm.icfg.beta), float(wm.alpha_global))
        out[lo:hi] = kernels.topk_rows(Z, K)
    return out


def recommend(scorer, history, K, watermark=None, user_id=0):
    if K < 1:
        raise ValueError("K must be >= 1")
    items = serve_topk(scorer, [list(history)], K, watermark)[0]
    return RecommendationList(user_id=user_id, history=history, items=items)


def recommend_all(scorer, histories, K, watermark=None, user_ids=None):
    top = serve_topk(scorer, histories, K, watermark)
    ids = range(len(histories)) if user_ids is None else user_ids
    return [RecommendationList(user_id=u, history=h, items=row)
            for u, h, row in zip(ids, histories, top)]


# ---------------------------------------------------------------- calibration


class CandidatePool:
    """Per-row boundary candidates, precomputed once for repeated serving.

    Items strictly below the k_cand-th logit are never masked and can never
    overtake a boundary item, so the watermarked top-K only depends on the
    boundary set. Rows are padded with ``-inf`` scores.
    """

    def __init__(self, Z, green, icfg):
        _, self.alpha_local, thresh = kernels.watermark_rows(
            Z, green, int(icfg.k_cand), int(icfg.top_k), float(icfg.beta), 0.0)
        inb = Z >= thresh[:, None]
        width = int(inb.sum(axis=1).max())
        n = Z.shape[0]
        self.ids = np.zeros((n, width), dtype=np.int64)
        self.z = np.full((n, width), -np.inf)
        self.green = np.zeros((n, width), dtype=bool)
        for r in range(n):
            idx = np.flatnonzero(inb[r])
            self.ids[r, :idx.size] = idx
            self.z[r, :idx.size] = Z[r, idx]
            self.green[r, :idx.size] = green[r, idx]

    def green_rate(self, rows, alpha_global, K):
        zp = self.z[rows] + (alpha_global * self.alpha_local[rows])[:, None] * self.green[rows]
        order = np.argsort(-zp, axis=1, kind="stable")[:, :K]
        return float(np.take_along_axis(self.green[rows], order, axis=1).mean())


def calibrate(scorer, histories, key, coords, pcfg, icfg, ctrl, n_batches=500,
              batch_size=100, trace=None):
    """Run the feedback loop over validation batches; returns the final controller.

    Batches cycle through ``histories`` in order. When ``trace`` is a list,
    ``(alpha_global, running_rate, r_curr)`` is appended after every update.
    """
    if n_batches < 1:
        raise ValueError("n_batches must be >= 1")
    Z = scorer.score_batch(histories)
    G = green_matrix(coords, step_seeds(key, histories, pcfg), pcfg)
    pool = CandidatePool(Z, G, icfg)
    n = len(histories)
    starts = list(range(0, n, batch_size))
    for b in range(n_batches):
        lo = starts[b % len(starts)]
        rows = np.arange(lo, min(n, lo + batch_size))
        r_curr = pool.green_rate(rows, ctrl.alpha_global, icfg.top_k)
        ctrl = update_controller(ctrl, r_curr)
        if trace is not None:
            trace.append((ctrl.alpha_global, ctrl.running_rate, r_curr))
    return ctrl


def initial_controller(icfg, eta=0.05, tau=0.65, momentum=0.9):
    return GlobalController.from_config(icfg, eta=eta, tau=tau, momentum=momentum)


# -------------------------------------------------------------------- student


def _lcm_upto(k):
    out = 1
    for i in range(1, k + 1):
        out = out * i // math.gcd(out, i)
    return out


class StudentModel:
    """Last-item transition counts harvested from black-box Top-K answers.

    Reciprocal-rank weights are stored as integers scaled by lcm(1..K), so
    accumulation is exact and independent of log order.
    """

    def __init__(self, n_items, K, smoothing=1.0):
        self.n_items = n_items
        self.K = K
        self.smoothing = smoothing
        self.scale = _lcm_upto(K)
        self.counts = np.zeros((n_items, n_items), dtype=np.int64)
        self.item_counts = np.zeros(n_items, dtype=np.int64)

    def score_batch(self, histories):
        last = np.array([h[-1] for h in histories], dtype=np.int64)
        pop = (self.item_counts + 1.0) / (self.item_counts.sum() + self.n_items)
        Z = self.counts[last] / self.scale + self.smoothing * pop[None, :]
        for r, h in enumerate(histories):
            Z[r, h] = -np.inf
        return Z


def train_student(query_logs, n_items, smoothing=1.0):
    logs = list(query_logs)
    if not logs:
        raise ValueError("student needs at least one query log")
    K = max(len(r.items) for r in logs)
    model = StudentModel(n_items, K, smoothing)
    weights = np.array([model.scale // (j + 1) for j in range(K)], dtype=np.int64)
    by_len = {}
    for r in logs:
        if not r.history:
            continue
        by_len.setdefault(len(r.items), []).append(r)
    for k, recs in by_len.items():
        items = np.array([r.items for r in recs], dtype=np.int64)
        ctx = np.array([r.history[-1] for r in recs], dtype=np.int64)
        kernels.accumulate_transitions(model.counts, ctx, items, weights[:k].copy())
        np.add.at(model.item_counts, items.ravel(), 1)
    return model
