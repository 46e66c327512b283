import sys

import numpy as np
import pytest

from oracles import BRIDGE_TEXT, BRIDGE_P0
from relibat.network import parse_network


@pytest.fixture
def bridge():
    return parse_network(BRIDGE_TEXT)


@pytest.fixture
def t0_probs():
    return np.array(BRIDGE_P0)


@pytest.fixture
def bridge_file(tmp_path):
    path = tmp_path / "bridge.net"
    lines = ["# bridge network with sample initial reliabilities", "4 5"]
    for (u, v), p in zip([(1, 2), (1, 3), (2, 3), (2, 4), (3, 4)], BRIDGE_P0):
        lines.append(f"{u} {v} {p}")
    path.write_text("\n".join(lines) + "\n")
    return path


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module and module.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(module.RESULTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
