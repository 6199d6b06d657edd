from pathlib import Path

import pytest

from tablesync.dataset import iter_instance_dirs, load_instance
from tablesync.gateway import Gateway
from tablesync.stub import StubBackend, StubRuleSet
from tablesync.tables import InfoTable, TableRow

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def lexicon_dir() -> Path:
    return FIXTURES / "lexicons"


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return FIXTURES / "corpus"


@pytest.fixture(scope="session")
def rules(lexicon_dir) -> StubRuleSet:
    return StubRuleSet.from_dir(lexicon_dir)


@pytest.fixture()
def stub_gateway(rules) -> Gateway:
    return Gateway(StubBackend(rules))


@pytest.fixture(scope="session")
def instances(corpus_dir):
    return [load_instance(d) for d in iter_instance_dirs(corpus_dir)]


@pytest.fixture()
def mk_table():
    def make(pairs, lang="en", entity="Entity", category="City", revision_tag=None) -> InfoTable:
        rows = tuple(TableRow(k, v) for k, v in pairs)
        return InfoTable(entity, lang, category, rows, revision_tag)

    return make
