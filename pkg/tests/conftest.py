import pytest

from amrecho.experiment import build_scenario, demo_config

# acceptance lines collected by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def demo_scenario():
    return build_scenario(demo_config())


def small_config(**over):
    """Cheap variant of the demo scenario (coarser ensemble and depth grid)."""
    d = demo_config().to_dict()
    d["ensemble"].update(M=64, panels=2)
    d["grid"].update(m_slices=64)
    for k, v in over.items():
        d[k] = v
    from amrecho.experiment import from_dict

    return from_dict(d, check=False)


@pytest.fixture(scope="session")
def small_scenario():
    return build_scenario(small_config())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
