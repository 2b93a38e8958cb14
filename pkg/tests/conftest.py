import shutil

import pytest

from mcore.core.workspace import Workspace

if shutil.which("z3") is None:
    pytest.exit("tests need the z3 executable on PATH (pip install z3-solver)", returncode=4)


@pytest.fixture
def ws(tmp_path):
    return Workspace(tmp_path / "ws")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda l: int(l.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
