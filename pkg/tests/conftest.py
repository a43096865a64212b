import pytest

from scholar_rag.config import AppConfig
from scholar_rag.embedding import EmbedderConfig
from scholar_rag.engine import RagEngine

from helpers import SAMPLE_ROWS, TEST_DIM, jsonl_bytes


@pytest.fixture
def app_config(tmp_path) -> AppConfig:
    return AppConfig(data_dir=tmp_path / "data", embedder=EmbedderConfig(dim=TEST_DIM))


@pytest.fixture
def engine(app_config) -> RagEngine:
    eng = RagEngine(app_config)
    yield eng
    eng.close()


@pytest.fixture
def ingested_engine(engine) -> RagEngine:
    engine.ingest(jsonl_bytes(SAMPLE_ROWS))
    return engine
