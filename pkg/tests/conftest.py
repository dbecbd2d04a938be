import pytest

from zeta_arclen import riemann_core as rc
from zeta_arclen.window import EvalWindow


@pytest.fixture(scope="session")
def window_1e6_50():
    return EvalWindow(1e6, 50.0)


@pytest.fixture(scope="session")
def arc_report_1e6_50(window_1e6_50):
    return rc.arc_length_numeric(window_1e6_50)
