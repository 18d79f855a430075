import pytest

from trialbench.dataset import serialize_database
from trialbench.demo import demo_snapshot


@pytest.fixture(scope="session")
def snapshot():
    return demo_snapshot()


@pytest.fixture(scope="session")
def db_path(tmp_path_factory, snapshot):
    path = tmp_path_factory.mktemp("corpus") / "demo.jsonl"
    path.write_text(serialize_database(snapshot), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def client(db_path):
    from fastapi.testclient import TestClient

    from trialbench.service import create_app

    with TestClient(create_app(str(db_path))) as c:
        yield c
