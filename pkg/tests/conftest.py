import textwrap

import numpy as np
import pytest

from nsdde.model import builtin_example_sec5

SEC5_CONFIG = """\
[model]
name = sec5

[scheme]
tau = 1.0
m_steps = 100
theta = 1.0
horizon = 8.0

[ensemble]
n_paths = 2000
p_moment = 2.0
seed = 42
window = [2.0, 8.0]

[chain]
generator = [[-1.0, 1.0], [1.0, -1.0]]
i0 = 1
"""


@pytest.fixture
def sec5():
    return builtin_example_sec5()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def write_config(tmp_path):
    def _write(text, name="run.cfg"):
        p = tmp_path / name
        p.write_text(textwrap.dedent(text))
        return p

    return _write
