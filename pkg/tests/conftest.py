import json
from pathlib import Path

import pytest

from guidedec.align import build_alignment
from guidedec.toy import load_toy_pair
from guidedec.types import Storyline

REPO = Path(__file__).resolve().parent.parent
FIXTURES = REPO / "fixtures"


@pytest.fixture(scope="session")
def toy4_path() -> Path:
    return FIXTURES / "toy4.json"


@pytest.fixture(scope="session")
def storyland_path() -> Path:
    return FIXTURES / "storyland.json"


@pytest.fixture(scope="session")
def toy4(toy4_path):
    return load_toy_pair(toy4_path)


@pytest.fixture(scope="session")
def storyland(storyland_path):
    return load_toy_pair(storyland_path)


@pytest.fixture(scope="session")
def toy4_alignment(toy4):
    ar, mlm = toy4
    return build_alignment(ar.vocabulary, mlm.vocabulary)


@pytest.fixture(scope="session")
def toy4_storyline(toy4) -> Storyline:
    ar, _ = toy4
    return Storyline.from_strings(["b c", "d"], ar.tokenizer)


@pytest.fixture(scope="session")
def demo_tasks_path() -> Path:
    return FIXTURES / "demo_tasks.jsonl"


@pytest.fixture(scope="session")
def demo_phrases(demo_tasks_path) -> list[str]:
    phrases: list[str] = []
    with open(demo_tasks_path, encoding="utf-8") as fh:
        for line in fh:
            phrases.extend(json.loads(line)["guide_phrases"])
    return phrases
