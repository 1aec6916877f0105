from pathlib import Path

import pytest

from plotcloze.corpus import Corpus

from fixturelib import make_credit_card_corpus, write_raw_layout


@pytest.fixture
def credit_card_corpus() -> Corpus:
    return make_credit_card_corpus()


@pytest.fixture
def raw_layout(tmp_path: Path) -> tuple[Path, Path]:
    return write_raw_layout(tmp_path)
