import pytest

from readerfix import build_fixture


@pytest.fixture(scope="session")
def fixture_paths(tmp_path_factory) -> dict:
    return build_fixture(tmp_path_factory.mktemp("interchange"))
