import time

import numpy as np
import pytest

from vagreeks.harness import desk_scale
from vagreeks.portfolio import Gender, Rider, VaContract


def make_contract(cid=0, rider=Rider.GMDB_GMWB, gender=Gender.MALE, age=40, av=2e5, guarantee=2.5e5,
                  rate=0.05, maturity=15) -> VaContract:
    gmwb = rider is Rider.GMDB_GMWB
    return VaContract(cid, rider, gender, age, float(av), float(guarantee),
                      float(guarantee) if gmwb else 0.0, rate, maturity)


def random_contracts(rng: np.random.Generator, count: int, id_offset: int = 0) -> list[VaContract]:
    out = []
    for k in range(count):
        rider = Rider.GMDB_GMWB if rng.random() < 0.5 else Rider.GMDB
        gender = Gender.FEMALE if rng.random() < 0.5 else Gender.MALE
        out.append(
            make_contract(
                id_offset + k, rider, gender, int(rng.integers(20, 61)), rng.uniform(1e4, 5e5),
                rng.uniform(5e3, 6e5), float(rng.choice([0.04, 0.06, 0.08])), int(rng.integers(10, 26)),
            )
        )
    return out


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []
# wall-clock seconds of each desk-scale compare run
DESK_SECONDS: list[float] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def desk_runs(tmp_path_factory):
    """Two independent desk-scale ``compare`` runs with the same master seed."""
    from click.testing import CliRunner

    from vagreeks.harness.cli import main

    dirs = []
    for name in ("run_a", "run_b"):
        out = tmp_path_factory.mktemp(name)
        t0 = time.perf_counter()
        result = CliRunner().invoke(main, ["--output-dir", str(out), "compare"])
        DESK_SECONDS.append(time.perf_counter() - t0)
        assert result.exit_code == 0, result.output
        dirs.append(out)
    return dirs


@pytest.fixture(scope="session")
def desk_data(desk_runs):
    from vagreeks.harness import prepare

    return prepare(desk_scale(), desk_runs[0] / "cache")


def distinct_nearest_queries(rng, reps, distance, count: int, margin: float = 1.2):
    """Random queries whose nearest representative is unambiguous.

    The second-nearest distance must exceed the nearest by ``margin``; at
    ``p = 100`` the runner-up weight is then below ``margin**-100``.
    """
    out = []
    while len(out) < count:
        batch = random_contracts(rng, 2 * count, id_offset=10**6 + len(out))
        d = np.sort(distance.matrix(batch, reps), axis=1)
        keep = d[:, 1] > margin * d[:, 0]
        out.extend(c for c, k in zip(batch, keep) if k)
    return out[:count]
