"""File formats: embeddings (binary or CSV) and line-delimited JSON logs."""
import csv
import json
import struct

import os

import numpy as np

from grew.sandbox.data import InteractionLog, SyntheticCatalog
from grew.verifier import RecommendationList

EMB_MAGIC = b"GREWEMB1"
_HEADER = struct.Struct("<8sII")


def write_embeddings_bin(path, E):
    E = np.ascontiguousarray(E, dtype="<f8")
    if E.ndim != 2:
        raise ValueError("embeddings must be a 2-D matrix")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(EMB_MAGIC, E.shape[0], E.shape[1]))
        fh.write(E.tobytes(order="C"))


def read_embeddings_bin(path):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated embeddings header")
        magic, n, d = _HEADER.unpack(head)
        if magic != EMB_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        body = fh.read()
    if len(body) != 8 * n * d:
        raise ValueError(f"{path}: expected {8 * n * d} payload bytes, got {len(body)}")
    E = np.frombuffer(body, dtype="<f8").reshape(n, d).astype(np.float64)
    _check_embeddings(E, path)
    return E


def write_embeddings_csv(path, E):
    E = np.asarray(E, dtype=np.float64)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["item_id"] + [f"e{j}" for j in range(E.shape[1])])
        for i, row in enumerate(E):
            # repr round-trips doubles exactly
            w.writerow([i] + [repr(float(x)) for x in row])


def read_embeddings_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "item_id":
        raise ValueError(f"{path}: missing 'item_id,e0,...' header")
    d = len(rows[0]) - 1
    if d < 1 or rows[0][1:] != [f"e{j}" for j in range(d)]:
        raise ValueError(f"{path}: malformed header {rows[0]}")
    body = rows[1:]
    E = np.empty((len(body), d), dtype=np.float64)
    seen = np.zeros(len(body), dtype=bool)
    for row in body:
        if len(row) != d + 1:
            raise ValueError(f"{path}: row has {len(row)} fields, expected {d + 1}")
        i = int(row[0])
        if not 0 <= i < len(body) or seen[i]:
            raise ValueError(f"{path}: item ids must be dense 0..{len(body) - 1}")
        seen[i] = True
        E[i] = [float(x) for x in row[1:]]
    _check_embeddings(E, path)
    return E


def read_embeddings(path):
    path = str(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(EMB_MAGIC))
    if magic == EMB_MAGIC:
        return read_embeddings_bin(path)
    return read_embeddings_csv(path)


def _check_embeddings(E, path):
    if E.shape[0] < 1 or E.shape[1] < 1:
        raise ValueError(f"{path}: empty embedding matrix")
    if not np.all(np.isfinite(E)):
        raise ValueError(f"{path}: non-finite embedding values")


# ------------------------------------------------------------------ JSONL


def dumps(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_jsonl(path, records, header=None):
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(dumps({"header": header}) + "\n")
        for rec in records:
            fh.write(dumps(rec) + "\n")


def read_jsonl(path):
    """Return ``(header_or_None, records)``."""
    header, records = None, []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{n}: {exc}") from None
            if "header" in rec:
                header = rec["header"]
            else:
                records.append(rec)
    return header, records


def parse_recommendation(rec):
    missing = {"user_id", "history", "items"} - set(rec)
    if missing:
        raise ValueError(f"recommendation record missing {sorted(missing)}")
    return RecommendationList(user_id=int(rec["user_id"]), history=rec["history"],
                              items=rec["items"])


def read_recommendations(path):
    header, records = read_jsonl(path)
    return header, [parse_recommendation(r) for r in records]


def write_recommendations(path, lists, header=None):
    write_jsonl(path, (r.to_record() for r in lists), header=header)


# ------------------------------------------------------- sandbox artifacts

CATALOG_BIN = "catalog.bin"
CATALOG_JSON = "catalog.json"
INTERACTIONS = "interactions.jsonl"


def write_catalog(directory, catalog):
    write_embeddings_bin(os.path.join(directory, CATALOG_BIN), catalog.embeddings)
    side = {"cluster_of": catalog.cluster_of.tolist(),
            "popularity": [float(p) for p in catalog.popularity],
            "rng_seed": int(catalog.rng_seed), "params": catalog.params}
    with open(os.path.join(directory, CATALOG_JSON), "w", encoding="utf-8") as fh:
        fh.write(dumps(side) + "\n")


def read_catalog(directory):
    E = read_embeddings_bin(os.path.join(directory, CATALOG_BIN))
    path = os.path.join(directory, CATALOG_JSON)
    with open(path, encoding="utf-8") as fh:
        side = json.load(fh)
    cluster_of = np.asarray(side["cluster_of"], dtype=np.int64)
    popularity = np.asarray(side["popularity"], dtype=np.float64)
    if cluster_of.shape != (E.shape[0],) or popularity.shape != (E.shape[0],):
        raise ValueError(f"{path}: sidecar does not match {E.shape[0]} embeddings")
    return SyntheticCatalog(embeddings=E, cluster_of=cluster_of, popularity=popularity,
                            centers=None, rng_seed=int(side["rng_seed"]),
                            params=side["params"])


def write_interactions(path, log, header=None):
    """One leave-one-out record per user: history plus the held-out target as ``items``."""
    recs = ({"user_id": u, "history": row[:-1].tolist(), "items": [int(row[-1])],
             "clusters": c.tolist()}
            for u, (row, c) in enumerate(zip(log.sequences, log.clusters)))
    write_jsonl(path, recs, header=dict(header or {}, rng_seed=int(log.rng_seed),
                                        params=log.params))


def read_interactions(path):
    header, recs = read_jsonl(path)
    if not recs:
        raise ValueError(f"{path}: no interaction records")
    recs = sorted(recs, key=lambda r: int(r["user_id"]))
    seqs = np.array([r["history"] + r["items"] for r in recs], dtype=np.int64)
    clus = np.array([r["clusters"] for r in recs], dtype=np.int64)
    if seqs.ndim != 2 or clus.shape != seqs.shape:
        raise ValueError(f"{path}: ragged interaction sequences")
    header = header or {}
    return InteractionLog(sequences=seqs, clusters=clus, rng_seed=int(header.get("rng_seed", 0)),
                          params=header.get("params", {})), header
