from __future__ import annotations

import pytest

from plantquery import plantdb
from plantquery.audit import AuditStore
from plantquery.config import packaged_data_path
from plantquery.nl2sql import SchemaCatalog, load_examples_file
from plantquery.toolkit import default_domains, default_jargon, default_registry

SEED = 42


@pytest.fixture()
def seeded_db(tmp_path):
    db = plantdb.init_schema(tmp_path / "plant.db")
    plantdb.seed_fixture(db, SEED)
    return db


@pytest.fixture()
def audit_store(tmp_path):
    return AuditStore(tmp_path / "audit.db")


@pytest.fixture()
def registry():
    return default_registry()


@pytest.fixture()
def domains(registry):
    return default_domains(registry)


@pytest.fixture()
def jargon():
    return default_jargon()


@pytest.fixture()
def catalog(seeded_db):
    return SchemaCatalog.from_db(seeded_db)


@pytest.fixture()
def examples():
    return load_examples_file(packaged_data_path("examples_index.json"))
