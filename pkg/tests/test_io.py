import numpy as np
import pytest

from grew import io
from grew.sandbox.data import gen_catalog, gen_interactions
from grew.verifier import RecommendationList


@pytest.fixture
def E():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(25, 5))
    M[0, 0] = 1e-310      # subnormal
    M[1, 1] = -0.0
    M[2, 2] = 1 / 3
    return M


def test_binary_round_trip(tmp_path, E):
    p = tmp_path / "e.bin"
    io.write_embeddings_bin(p, E)
    assert p.stat().st_size == 16 + 8 * E.size
    assert p.read_bytes()[:8] == b"GREWEMB1"
    F = io.read_embeddings(p)
    assert F.tobytes() == E.tobytes()


def test_csv_round_trip_matches_binary(tmp_path, E):
    io.write_embeddings_csv(tmp_path / "e.csv", E)
    io.write_embeddings_bin(tmp_path / "e.bin", E)
    a = io.read_embeddings(tmp_path / "e.csv")
    b = io.read_embeddings(tmp_path / "e.bin")
    assert a.tobytes() == b.tobytes() == E.tobytes()
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == "item_id,e0,e1,e2,e3,e4"


def test_csv_rows_may_come_in_any_order(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("item_id,e0,e1\n1,3.0,4.0\n0,1.0,2.0\n")
    assert io.read_embeddings_csv(p).tolist() == [[1.0, 2.0], [3.0, 4.0]]


@pytest.mark.parametrize("text", [
    "id,e0\n0,1.0\n",
    "item_id,e0\n0,1.0\n0,2.0\n",
    "item_id,e0\n0,1.0,2.0\n",
    "item_id,e0\n0,nan\n",
    "item_id,e0\n5,1.0\n",
])
def test_csv_rejects_malformed(tmp_path, text):
    p = tmp_path / "e.csv"
    p.write_text(text)
    with pytest.raises(ValueError):
        io.read_embeddings_csv(p)


def test_binary_rejects_bad_magic_and_truncation(tmp_path, E):
    p = tmp_path / "e.bin"
    io.write_embeddings_bin(p, E)
    raw = p.read_bytes()
    p.write_bytes(b"NOTMAGIC" + raw[8:])
    with pytest.raises(ValueError):
        io.read_embeddings_bin(p)
    p.write_bytes(raw[:-3])
    with pytest.raises(ValueError):
        io.read_embeddings_bin(p)


def test_recommendation_jsonl_round_trip(tmp_path):
    lists = [RecommendationList(u, [u, u + 1], [u + 2, u + 3]) for u in range(5)]
    p = tmp_path / "r.jsonl"
    io.write_recommendations(p, lists, header={"alpha_global": 0.5})
    header, back = io.read_recommendations(p)
    assert header == {"alpha_global": 0.5}
    assert back == lists
    assert p.read_text().splitlines()[1] == '{"history":[0,1],"items":[2,3],"user_id":0}'


def test_jsonl_errors(tmp_path):
    p = tmp_path / "r.jsonl"
    p.write_text('{"user_id": 1, "history": [1]}\n')
    with pytest.raises(ValueError, match="missing"):
        io.read_recommendations(p)
    p.write_text('{"user_id": 1,\n')
    with pytest.raises(ValueError, match=":1:"):
        io.read_jsonl(p)


def test_catalog_and_interactions_round_trip(tmp_path):
    cat = gen_catalog(60, 4, 3, rng_seed=2)
    log = gen_interactions(cat, n_users=10, seq_len=5, p_stay=0.7, rng_seed=3)
    io.write_catalog(tmp_path, cat)
    io.write_interactions(tmp_path / io.INTERACTIONS, log)
    cat2 = io.read_catalog(tmp_path)
    log2, header = io.read_interactions(tmp_path / io.INTERACTIONS)
    assert cat2.embeddings.tobytes() == cat.embeddings.tobytes()
    assert np.array_equal(cat2.cluster_of, cat.cluster_of)
    assert cat2.popularity.tobytes() == cat.popularity.tobytes()
    assert cat2.params == cat.params and cat2.rng_seed == 2
    assert np.array_equal(log2.sequences, log.sequences)
    assert np.array_equal(log2.clusters, log.clusters)
    assert log2.params == log.params and header["rng_seed"] == 3
