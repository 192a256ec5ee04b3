import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tutorkit.evalsim import fraction_layout, square25_layout
from tutorkit.wm import Value, close_relations, from_tutor_state


@pytest.fixture
def fraction_tree():
    return fraction_layout()


@pytest.fixture
def square25_tree():
    return square25_layout()


def make_wm(tree, closed=True, **fields):
    """Working memory over a layout from keyword field values."""
    state = {k.replace("_", "-"): Value.parse(v) for k, v in fields.items()}
    wm = from_tutor_state(state, tree)
    return close_relations(wm) if closed else wm


@pytest.fixture
def multiplication_wm(fraction_tree):
    # the worked multiplication example: 3/4 x 5/6
    return make_wm(fraction_tree, num1=3, den1=4, op="x", num2=5, den2=6)
