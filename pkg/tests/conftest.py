"""Shared fixtures: the random-program corpus and scenario datasets."""

from __future__ import annotations

import pytest

from proxyaudit import fixtures
from proxyaudit.detect import AuditConfig

# Thresholds for the random-program corpus, chosen once from the observed
# measure distribution: they produce a few witnesses per program while every
# measured value stays > 5e-4 away from either threshold, so float noise
# cannot flip a witness in or out.
CORPUS_EPSILON = 0.08
CORPUS_DELTA = 0.08


@pytest.fixture(scope="session")
def corpus_data():
    return fixtures.corpus_dataset()


@pytest.fixture(scope="session")
def corpus_programs():
    return fixtures.corpus_programs()


@pytest.fixture(scope="session")
def corpus_cfg():
    return AuditConfig(
        protected="z",
        epsilon=CORPUS_EPSILON,
        delta=CORPUS_DELTA,
        influence="exact",
        max_bins=256,
    )


@pytest.fixture(scope="session")
def masked_data():
    return fixtures.masked_redlining_dataset()


@pytest.fixture(scope="session")
def income_data():
    return fixtures.income_scenario_dataset()
