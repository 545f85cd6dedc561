import numpy as np
import pytest

from app.core.errors import CheckpointError, ConfigError
from app.schemas.training import ScorerName, TrainConfig
from app.services.checkpoint_service import load_checkpoint, save_checkpoint
from app.services.embedding_service import EmbeddingTable


@pytest.fixture
def complex_table(rng):
    return EmbeddingTable.initialize(ScorerName.COMPLEX, 3, ["Pedestrian", "Run", "video_0044_ped1-12"], ["MOTION"], rng)


class TestCheckpoint:

    def test_save_and_load(self, tmp_path, complex_table):
        cfg = TrainConfig(scorer=ScorerName.COMPLEX, k=3, seed=7)
        path = tmp_path / "model.rkge"
        save_checkpoint(complex_table, path, cfg)
        table, loaded_cfg = load_checkpoint(path)
        assert table == complex_table
        assert loaded_cfg == cfg

    def test_without_config(self, tmp_path, rng):
        table = EmbeddingTable.initialize(ScorerName.TRANSE, 4, ["a", "b"], ["r"], rng)
        path = tmp_path / "nested" / "model.rkge"
        save_checkpoint(table, path)
        loaded, cfg = load_checkpoint(path)
        assert cfg is None
        assert np.array_equal(loaded.entity_vectors, table.entity_vectors)

    def test_non_ascii_ids(self, tmp_path, rng):
        table = EmbeddingTable.initialize(ScorerName.TRANSE, 2, ["Fußgänger", "b"], ["räumlich"], rng)
        save_checkpoint(table, tmp_path / "m.rkge")
        assert load_checkpoint(tmp_path / "m.rkge")[0].entities == ["Fußgänger", "b"]

    def test_bad_magic(self, tmp_path, complex_table):
        path = tmp_path / "model.rkge"
        save_checkpoint(complex_table, path)
        path.write_bytes(b"XXXX" + path.read_bytes()[4:])
        with pytest.raises(CheckpointError, match="bad magic"):
            load_checkpoint(path)

    def test_truncated(self, tmp_path, complex_table):
        path = tmp_path / "model.rkge"
        save_checkpoint(complex_table, path)
        path.write_bytes(path.read_bytes()[:-20])
        with pytest.raises(CheckpointError, match="unexpected end"):
            load_checkpoint(path)

    def test_trailing_bytes(self, tmp_path, complex_table):
        path = tmp_path / "model.rkge"
        save_checkpoint(complex_table, path)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(CheckpointError, match="trailing bytes"):
            load_checkpoint(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_checkpoint(tmp_path / "missing.rkge")
