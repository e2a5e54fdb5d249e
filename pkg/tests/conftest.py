import os
import shutil
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))


def pytest_configure(config):
    if shutil.which("node") is None and not os.environ.get("EXTSLEUTH_NODE"):
        raise pytest.UsageError(
            "node executable required (dynamic analysis and the ES parser "
            "run on Node.js); install Node >= 18 or set EXTSLEUTH_NODE"
        )


@pytest.fixture()
def store_dir(tmp_path):
    return str(tmp_path / "store")
