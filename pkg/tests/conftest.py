import numpy as np
import pytest

from ssfuse.blocks import init_weights
from ssfuse.layout import FeatureMap
from ssfuse.tensor import Tensor


@pytest.fixture(autouse=True)
def single_thread(monkeypatch):
    # FD probes run inline so failures surface with a plain traceback
    monkeypatch.setenv("SSFUSE_THREADS", "1")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_map(rng):
    def make(shape=(2, 4, 4)):
        return FeatureMap(Tensor(rng.standard_normal(shape)))

    return make


@pytest.fixture
def pair(random_map):
    return random_map(), random_map()


@pytest.fixture
def weights():
    return init_weights(2, 2, seed=7, delta_bias=True)


@pytest.fixture
def write_config(tmp_path):
    """Writes a key=value run config under ``tmp_path`` with the ledger and log kept there too."""

    def write(name="run.cfg", **values):
        values.setdefault("ledger", tmp_path / "ledger.db")
        values.setdefault("log_file", tmp_path / "ssfuse.log")
        values.setdefault("f_v", tmp_path / "f_v.sst")
        values.setdefault("f_t", tmp_path / "f_t.sst")
        values.setdefault("out", tmp_path / "fused.sst")
        path = tmp_path / name
        lines = ["# generated by the test suite"]
        lines += [f"{key} = {value}" for key, value in values.items()]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return write
