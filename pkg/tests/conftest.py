import math

import pytest

from sfwmarray.array import ArraySpec, envelope_of_guide, first_zero_after_peak, propagate
from sfwmarray.io import default_config_path, load_materials, materials_for, parse_config, recipe_inputs
from sfwmarray.recipe import DESIGN_NOMINAL, fit_design_dispersion, run_recipe

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def lib():
    return load_materials()


@pytest.fixture(scope="session")
def channels():
    return fit_design_dispersion(DESIGN_NOMINAL)


@pytest.fixture(scope="session")
def reference_config():
    return parse_config(default_config_path())


@pytest.fixture(scope="session")
def reference_inputs(reference_config):
    return recipe_inputs(reference_config, materials_for(reference_config))


@pytest.fixture(scope="session")
def reference_report(reference_inputs):
    return run_recipe(reference_inputs)


@pytest.fixture(scope="session")
def guide7_envelope():
    """Guide 7 of a 20-guide array excited at guide 8, C = pi/500, cut at the first zero."""
    c = math.pi / 500
    probe = ArraySpec.single(20, c, 2000.0, 8)
    length = first_zero_after_peak(envelope_of_guide(propagate(probe), 7), probe.length)
    return envelope_of_guide(propagate(ArraySpec.single(20, c, length, 8)), 7)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
