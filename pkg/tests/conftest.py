from __future__ import annotations

from pathlib import Path

import pytest

from depfuse import parse_observations

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def affiliations_csv() -> str:
    return (DATA / "affiliations_snapshot.csv").read_text()


@pytest.fixture(scope="session")
def affiliations(affiliations_csv):
    return parse_observations(affiliations_csv)


@pytest.fixture(scope="session")
def affiliations_s123(affiliations):
    return affiliations.restrict_sources(["s1", "s2", "s3"])


@pytest.fixture(scope="session")
def history_csv() -> str:
    return (DATA / "affiliations_history.csv").read_text()


@pytest.fixture(scope="session")
def history(history_csv):
    return parse_observations(history_csv)


@pytest.fixture(scope="session")
def ratings_csv() -> str:
    return (DATA / "movie_ratings.csv").read_text()


@pytest.fixture(scope="session")
def ratings(ratings_csv):
    return parse_observations(ratings_csv)


# the s1 column is the up-to-date truth in both affiliation fixtures
S1_TRUTH = {
    "suciu": "uw",
    "halevy": "google",
    "balazinska": "uw",
    "dalvi": "yahoo!",
    "dong": "at&t",
}


@pytest.fixture(scope="session")
def s1_truth():
    return dict(S1_TRUTH)
