import os

import numpy as np
import pytest
import yaml

from fracostro.lagrangian_dsl import Coord, Mom, Time, XDeriv, evaluate, parse, to_text, walk

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")
CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "configs")


@pytest.fixture
def golden():
    def load(name):
        with open(os.path.join(GOLDEN_DIR, f"{name}.yml")) as f:
            return yaml.safe_load(f)

    return load


@pytest.fixture
def config_path():
    def path(name):
        return os.path.join(CONFIG_DIR, name)

    return path


def variable_names(*exprs):
    return sorted(
        {to_text(node) for expr in exprs for node in walk(expr) if isinstance(node, Coord | Mom | XDeriv | Time)}
    )


@pytest.fixture
def equivalent():
    """Compare two expressions by evaluating them at seeded random complex bindings."""

    def check(left, right, params, trials=5, rtol=1e-10):
        if isinstance(left, str):
            left = parse(left, params=set(params))
        if isinstance(right, str):
            right = parse(right, params=set(params))
        rng = np.random.default_rng(7)
        names = variable_names(left, right)
        for _ in range(trials):
            bindings = {name: complex(*rng.uniform(-1, 1, 2)) for name in names}
            a = evaluate(left, bindings, params)
            b = evaluate(right, bindings, params)
            if not np.isclose(a, b, rtol=rtol, atol=rtol):
                return False
        return True

    return check
