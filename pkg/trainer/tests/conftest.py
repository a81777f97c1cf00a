from __future__ import annotations

import subprocess
import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[2]
GRAMMAR_DIR = REPO_ROOT / "src" / "mlmoracle" / "grammars"
ORACLE_CMD = [sys.executable, "-m", "mlmoracle.cli"]


def run_oracle(*args: str) -> None:
    proc = subprocess.run([*ORACLE_CMD, *map(str, args)], capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"reference pipeline failed: {proc.stderr}")


@pytest.fixture(scope="session")
def g3_artifacts(tmp_path_factory) -> Path:
    """Small reference run + corpus for the two-sentence toy language."""
    root = tmp_path_factory.mktemp("g3_artifacts")
    grammar = GRAMMAR_DIR / "g3.grammar"
    run_oracle("sweep", grammar, "--k", "1", "2", "--out-dir", root / "run")
    run_oracle(
        "sample", grammar, "--train", "300", "--valid", "120", "--test", "0",
        "--seed", "0", "--out-dir", root / "corpus",
    )
    return root


@pytest.fixture(scope="session")
def midlang_corpus(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("midlang_corpus")
    run_oracle(
        "sample", GRAMMAR_DIR / "midlang.grammar", "--train", "400", "--valid", "0",
        "--test", "0", "--seed", "0", "--out-dir", root,
    )
    return root
