import pytest
from hypothesis import HealthCheck, settings

from opinionfix import netgraph

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# acceptance tests record one verdict per criterion here; printed after the run
CRITERIA = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA):
        ok, label = CRITERIA[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {label}")


def small_graph_zoo():
    return {
        "K2": netgraph.complete(2),
        "K4": netgraph.complete(4),
        "P3": netgraph.path(3),
        "ring6": netgraph.ring(6),
        "star5": netgraph.star(5),
        "rnd6w": netgraph.random_connected(6, 0.4, seed=3, weighted=True),
        "rnd7": netgraph.random_connected(7, 0.3, seed=5),
    }


@pytest.fixture(scope="session")
def zoo():
    return small_graph_zoo()
