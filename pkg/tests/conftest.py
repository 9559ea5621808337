import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from georelay.scenario import load_config


@pytest.fixture()
def default_config():
    return load_config(None)
