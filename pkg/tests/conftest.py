import pathlib

import pytest

CORPUS = pathlib.Path(__file__).parent / "corpus"


def corpus_text(name: str) -> str:
    return (CORPUS / name).read_text()


def corpus_files() -> list[pathlib.Path]:
    return sorted(CORPUS.glob("*.t2"))


@pytest.fixture
def ex0_text() -> str:
    return corpus_text("ex0.t2")
