import pytest

from grew.config import RunConfig
from grew.partition import SecretKey
from grew.sandbox.pipeline import Experiment

# arbitrary fixed owner key used by every sandbox test
OWNER_KEY = 12345


@pytest.fixture(scope="session")
def owner_key():
    return SecretKey(OWNER_KEY)


@pytest.fixture(scope="session")
def sandbox(owner_key):
    """Default sandbox world: calibrated watermark plus clean and watermarked lists."""
    ex = Experiment(RunConfig(), owner_key)
    ctrl = ex.controller()
    wm = ex.watermark(ctrl)
    return {"ex": ex, "ctrl": ctrl, "trace": list(ex.trace), "wm": wm,
            "clean": ex.serve(), "marked": ex.serve(wm)}


@pytest.fixture(scope="session")
def small_cfg():
    return RunConfig(n_items=400, d=16, n_clusters=4, n_users=300, seq_len=8, k_cand=40,
                     top_k=10, calib_batches=60, calib_batch_size=50, attack_sequences=200,
                     attack_length=6)
