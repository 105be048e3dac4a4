from fractions import Fraction as F

import pytest

from gapsolitons.bloch import PeriodicPotential
from gapsolitons.cme import CarrierSet, gamma_tensor, symmetric_four_mode_model

# acceptance criterion number -> (PASS/FAIL, detail), filled by the report hook
CRITERIA = {}

EX41_K = [(F(-1, 5), F(-2, 5)), (F(1, 5), F(2, 5)), (F(1, 5), F(-2, 5)), (F(-1, 5), F(2, 5))]


@pytest.fixture
def ex41_carriers():
    """Band-4 carriers of V = cos x1 cos x2 at the four (+-0.2, +-0.4) wavevectors."""
    return CarrierSet.from_bloch(PeriodicPotential.cosine_product(2), [(4, k) for k in EX41_K], 12)


@pytest.fixture(scope="session")
def ex41_gamma():
    cs = CarrierSet.from_bloch(PeriodicPotential.cosine_product(2), [(4, k) for k in EX41_K], 12)
    return gamma_tensor(cs, PeriodicPotential.constant(1.0, 2))


@pytest.fixture
def ex41_model(ex41_gamma):
    """Hand-authored N = 4 model with alpha = (3, 1, 1), v = (0, 1), w = (1, 0)."""
    return symmetric_four_mode_model(3, 1, 1, (0, 1), (1, 0), gamma=ex41_gamma)


@pytest.fixture(scope="session")
def ex41_edge(ex41_gamma):
    from gapsolitons.dispersion import band_edge

    return band_edge(symmetric_four_mode_model(3, 1, 1, (0, 1), (1, 0), gamma=ex41_gamma), 2, [0.0, 0.0])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    detail = dict(item.user_properties).get("detail", "")
    if rep.failed and not detail:
        detail = str(call.excinfo.value).splitlines()[0] if call.excinfo else "error"
    n = mark.args[0]
    if rep.when == "call" or rep.failed:
        CRITERIA[n] = ("PASS" if rep.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        status, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
