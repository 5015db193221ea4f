from __future__ import annotations

import json
import shutil
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"


@pytest.fixture(scope="session")
def repo_root() -> Path:
    return REPO_ROOT


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture()
def planted_config(tmp_path: Path) -> Path:
    """Copy of the bundled planted-corpus run config, rooted in tmp_path."""
    src = FIXTURES / "planted"
    cfg = json.loads((src / "config.json").read_text(encoding="utf-8"))
    cfg["output_root"] = str(tmp_path / "out")
    shutil.copy(src / "corpus.jsonl", tmp_path / "corpus.jsonl")
    cfg["datasets"][0]["path"] = "corpus.jsonl"
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg, indent=2), encoding="utf-8")
    return path
