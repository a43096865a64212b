"""One-file TOML configuration with SCHOLAR_RAG_* environment overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - version-dependent import
    import tomli as tomllib

from .embedding import DEFAULT_DIM, EmbedderConfig
from .rag import DEFAULT_BUDGET_CHARS
from .recommend import LlmConfig

DEFAULT_K = 5
DEFAULT_MAX_K = 100
DEFAULT_MAX_AUTHORS = 10


@dataclass
class AppConfig:
    data_dir: Path = Path("scholar-rag-data")
    listen_host: str = "127.0.0.1"
    listen_port: int = 8350
    k_default: int = DEFAULT_K
    max_k: int = DEFAULT_MAX_K
    max_authors: int = DEFAULT_MAX_AUTHORS
    prompt_budget: int = DEFAULT_BUDGET_CHARS
    template_path: Path | None = None
    ui_dir: Path | None = None
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    llm: LlmConfig = field(default_factory=LlmConfig)

    @property
    def corpus_dir(self) -> Path:
        return self.data_dir / "corpus"

    @property
    def index_path(self) -> Path:
        return self.data_dir / "index.bin"


# env var -> (section or None, key); values are parsed with the key's type.
ENV_OVERRIDES: dict[str, tuple[str | None, str]] = {
    "SCHOLAR_RAG_DATA_DIR": (None, "data_dir"),
    "SCHOLAR_RAG_LISTEN_HOST": (None, "listen_host"),
    "SCHOLAR_RAG_LISTEN_PORT": (None, "listen_port"),
    "SCHOLAR_RAG_K": (None, "k_default"),
    "SCHOLAR_RAG_MAX_AUTHORS": (None, "max_authors"),
    "SCHOLAR_RAG_PROMPT_BUDGET": (None, "prompt_budget"),
    "SCHOLAR_RAG_TEMPLATE_PATH": (None, "template_path"),
    "SCHOLAR_RAG_UI_DIR": (None, "ui_dir"),
    "SCHOLAR_RAG_EMBEDDER_BACKEND": ("embedder", "backend"),
    "SCHOLAR_RAG_EMBEDDER_URL": ("embedder", "url"),
    "SCHOLAR_RAG_EMBEDDER_DIM": ("embedder", "dim"),
    "SCHOLAR_RAG_EMBEDDER_TIMEOUT": ("embedder", "timeout"),
    "SCHOLAR_RAG_EMBEDDER_MAX_BATCH": ("embedder", "max_batch"),
    "SCHOLAR_RAG_EMBEDDER_MAX_CONCURRENCY": ("embedder", "max_concurrency"),
    "SCHOLAR_RAG_LLM_URL": ("llm", "url"),
    "SCHOLAR_RAG_LLM_MODEL": ("llm", "model"),
    "SCHOLAR_RAG_LLM_TIMEOUT": ("llm", "timeout"),
    "SCHOLAR_RAG_LLM_MAX_CONCURRENCY": ("llm", "max_concurrency"),
}


def load_config(path: str | Path | None = None, environ: dict[str, str] | None = None) -> AppConfig:
    """Build the configuration from an optional TOML file plus env overrides."""
    raw: dict = {}
    if path is not None:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    environ = os.environ if environ is None else environ
    for var, (section, key) in ENV_OVERRIDES.items():
        value = environ.get(var)
        if value is None:
            continue
        if section is None:
            raw[key] = value
        else:
            raw.setdefault(section, {})[key] = value
    emb = raw.get("embedder", {})
    llm = raw.get("llm", {})
    return AppConfig(
        data_dir=Path(raw.get("data_dir", "scholar-rag-data")),
        listen_host=str(raw.get("listen_host", "127.0.0.1")),
        listen_port=int(raw.get("listen_port", 8350)),
        k_default=int(raw.get("k_default", DEFAULT_K)),
        max_k=int(raw.get("max_k", DEFAULT_MAX_K)),
        max_authors=int(raw.get("max_authors", DEFAULT_MAX_AUTHORS)),
        prompt_budget=int(raw.get("prompt_budget", DEFAULT_BUDGET_CHARS)),
        template_path=Path(raw["template_path"]) if raw.get("template_path") else None,
        ui_dir=Path(raw["ui_dir"]) if raw.get("ui_dir") else None,
        embedder=EmbedderConfig(
            backend=str(emb.get("backend", "deterministic-test")),
            endpoint_url=str(emb.get("url", "")),
            dim=int(emb.get("dim", DEFAULT_DIM)),
            timeout=float(emb.get("timeout", 30.0)),
            max_batch=int(emb.get("max_batch", 32)),
            max_concurrency=int(emb.get("max_concurrency", 4)),
        ),
        llm=LlmConfig(
            endpoint_url=str(llm.get("url", "")),
            model=str(llm.get("model", "llama3.2")),
            timeout=float(llm.get("timeout", 120.0)),
            max_concurrency=int(llm.get("max_concurrency", 2)),
        ),
    )
