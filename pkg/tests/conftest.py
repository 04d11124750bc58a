import sys

import numpy as np
import pytest

from qmal.corpus import CorpusConfig, build_pe, generate_file


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def sample_pes():
    """A handful of generated files of both classes with their ground-truth layouts."""
    config = CorpusConfig()
    return [generate_file(config, i % 2, i) for i in range(12)]


@pytest.fixture
def text_rsrc_pe():
    text = bytes(range(256)) * 3
    rsrc = bytes([7]) * 1000
    return build_pe([(".text", text), (".rsrc", rsrc)]), text, rsrc


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=_criterion_order):
            terminalreporter.write_line(line)


def _criterion_order(line):
    tag = line.split("criterion")[1].split(":")[0].strip()
    digits = "".join(c for c in tag if c.isdigit())
    return int(digits), tag
