from pathlib import Path

import pytest

from services.groups import build_combing, builtin_group
from services.report_store import report_store
from services.settings import Settings, settings

GROUP_DIR = Path(__file__).resolve().parent.parent / "data" / "groups"


@pytest.fixture(autouse=True)
def restore_settings():
    """main.run and budget tests mutate the global settings; put them back"""
    saved = settings.model_dump()
    storage_dir = report_store.storage_dir
    yield
    for name in Settings.model_fields:
        setattr(settings, name, saved[name])
    report_store.use(storage_dir)


@pytest.fixture
def group_dir() -> Path:
    return GROUP_DIR


@pytest.fixture
def f2():
    return builtin_group("f2")


@pytest.fixture
def z2():
    return builtin_group("z2")


@pytest.fixture
def z3():
    return builtin_group("z3")


@pytest.fixture
def s3():
    return builtin_group("s3")


@pytest.fixture
def d_inf():
    return builtin_group("d_inf")


@pytest.fixture
def z_squared():
    return builtin_group("z_squared")


def geodesic(spec):
    return build_combing(spec, "geodesic")[0]


def words(spec, *texts):
    return [spec.alphabet.parse(t) for t in texts]
