import numpy as np
import pytest

from commexplore.gridworld import OccupancyGrid, make_environment


def random_grid(rng: np.random.Generator, shape=(30, 30), p_block=0.25, p_window=0.0, res=1.0) -> OccupancyGrid:
    """Random closed-world map; a fraction of blocked cells become rf-only windows."""
    blocked = rng.random(shape) < p_block
    window = blocked & (rng.random(shape) < p_window)
    trav = ~blocked
    rf = trav | window
    for a in (trav, rf):
        a[0, :] = a[-1, :] = a[:, 0] = a[:, -1] = False
    return OccupancyGrid(trav, rf, res)


@pytest.fixture(scope="session")
def envs():
    return {name: make_environment(name) for name in ("tunnel", "window", "yjunction")}


# --- acceptance reporting ---

_CRITERIA: list[tuple[int, str, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        _CRITERIA.append((marker.args[0], marker.args[1], "PASS" if rep.passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, verdict, detail in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {number} {verdict}  {title}" + (f"  [{detail}]" if detail else ""))
