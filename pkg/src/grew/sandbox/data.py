"""Synthetic catalog and interaction generators."""
from dataclasses import dataclass
import math

import numpy as np


@dataclass
class SyntheticCatalog:
    embeddings: np.ndarray
    cluster_of: np.ndarray
    popularity: np.ndarray
    centers: np.ndarray
    rng_seed: int
    params: dict

    @property
    def n_items(self):
        return self.embeddings.shape[0]

    @property
    def d(self):
        return self.embeddings.shape[1]


@dataclass
class InteractionLog:
    sequences: np.ndarray  # (n_users, seq_len) item ids
    clusters: np.ndarray   # (n_users, seq_len) cluster of each step
    rng_seed: int
    params: dict

    @property
    def n_users(self):
        return self.sequences.shape[0]

    def histories(self, holdout=1):
        """Per-user prefixes with the last ``holdout`` items removed."""
        return [row[:-holdout].tolist() for row in self.sequences]

    def targets(self, holdout=1):
        return self.sequences[:, -holdout].copy()



def cluster_distances(E, cluster_of, max_items=600):
    """Mean within-cluster and between-cluster pairwise distances (subsampled)."""
    idx = np.arange(min(max_items, E.shape[0]))
    X, c = E[idx], cluster_of[idx]
    sq = (X * X).sum(1)
    D = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0))
    same = c[:, None] == c[None, :]
    off = ~np.eye(len(idx), dtype=bool)
    within = D[same & off]
    between = D[~same]
    return (float(within.mean()) if within.size else 0.0,
            float(between.mean()) if between.size else math.nan)


def gen_catalog(n_items=2000, d=32, n_clusters=8, spread=1.0, rng_seed=0,
                center_scale=1.0, popularity_sigma=1.0):
    if n_clusters < 1 or n_items < n_clusters:
        raise ValueError("need n_items >= n_clusters >= 1")
    if d < 1:
        raise ValueError("d must be >= 1")
    if spread < 0 or center_scale <= 0:
        raise ValueError("spread must be >= 0 and center_scale > 0")
    rng = np.random.default_rng(rng_seed)
    centers = rng.normal(0.0, center_scale, size=(n_clusters, d))
    if n_clusters > 1:
        cd = np.linalg.norm(centers[:, None] - centers[None, :], axis=-1)
        if np.any(cd[~np.eye(n_clusters, dtype=bool)] == 0.0):
            raise RuntimeError("duplicate cluster centers")
    cluster_of = rng.permutation(np.arange(n_items) % n_clusters).astype(np.int64)
    E = centers[cluster_of] + spread * rng.normal(size=(n_items, d))
    popularity = rng.lognormal(0.0, popularity_sigma, size=n_items)
    popularity /= popularity.sum()
    if n_clusters > 1:
        within, between = cluster_distances(E, cluster_of)
        if not within < between:
            raise RuntimeError(f"mixture not separated: within {within:.3f} >= between {between:.3f}")
    params = dict(n_items=n_items, d=d, n_clusters=n_clusters, spread=spread,
                  center_scale=center_scale, popularity_sigma=popularity_sigma)
    return SyntheticCatalog(embeddings=E, cluster_of=cluster_of, popularity=popularity,
                            centers=centers, rng_seed=rng_seed, params=params)


def gen_interactions(catalog, n_users=2000, seq_len=20, p_stay=0.8, rng_seed=0,
                     sharpness=1.0, rho=0.8, pop_weight=0.1):
    """Cluster-sticky random walks.

    Each step keeps the current cluster with probability ``p_stay`` and jumps
    to a uniformly chosen other cluster otherwise. The next item is drawn
    within the cluster with probability proportional to
    ``popularity**pop_weight * exp(sharpness * <u, e_j> / sqrt(d))`` where
    ``u`` is the ``rho``-decayed mean of the items seen so far; items already
    seen are never repeated. The first item is drawn by popularity alone.
    """
    if seq_len < 2 or n_users < 1:
        raise ValueError("need seq_len >= 2 and n_users >= 1")
    if not 0.0 <= p_stay <= 1.0:
        raise ValueError("p_stay must lie in [0, 1]")
    E, cl = catalog.embeddings, catalog.cluster_of
    n_items, d = E.shape
    n_clusters = int(cl.max()) + 1
    sizes = np.bincount(cl, minlength=n_clusters)
    if sizes.min() < seq_len:
        raise ValueError("every cluster needs at least seq_len items")
    rng = np.random.default_rng(rng_seed)
    log_pop = np.log(catalog.popularity)
    seqs = np.empty((n_users, seq_len), dtype=np.int64)
    clus = np.empty((n_users, seq_len), dtype=np.int64)
    seen = np.zeros((n_users, n_items), dtype=bool)
    rows = np.arange(n_users)

    cur = rng.integers(0, n_clusters, n_users)
    logits = np.broadcast_to(log_pop, (n_users, n_items)).copy()
    num = np.zeros((n_users, d))
    den = 0.0
    for t in range(seq_len):
        if t > 0:
            stay = rng.random(n_users) < p_stay
            if n_clusters > 1:
                jump = (cur + rng.integers(1, n_clusters, n_users)) % n_clusters
                cur = np.where(stay, cur, jump)
            num = rho * num + E[seqs[:, t - 1]]
            den = rho * den + 1.0
            logits = sharpness * ((num / den) @ E.T) / math.sqrt(d) + pop_weight * log_pop
        gumbel = -np.log(-np.log(rng.random((n_users, n_items)) + 1e-300) + 1e-300)
        s = np.where((cl[None, :] == cur[:, None]) & ~seen, logits + gumbel, -np.inf)
        pick = np.argmax(s, axis=1)
        seqs[:, t] = pick
        clus[:, t] = cur
        seen[rows, pick] = True
    params = dict(n_users=n_users, seq_len=seq_len, p_stay=p_stay, sharpness=sharpness,
                  rho=rho, pop_weight=pop_weight)
    return InteractionLog(sequences=seqs, clusters=clus, rng_seed=rng_seed, params=params)


def persistence_rate(log):
    """Fraction of consecutive steps that stay in the same cluster."""
    c = log.clusters
    return float((c[:, 1:] == c[:, :-1]).mean())
