import hashlib
import os

import numpy as np
import pytest

from seasynth.scene import SceneSpec


def tree_hash(root) -> str:
    """SHA-256 over sorted relative paths and file bytes below ``root``."""
    h = hashlib.sha256()
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in sorted(filenames):
            path = os.path.join(dirpath, name)
            h.update(os.path.relpath(path, root).encode())
            h.update(b"\0")
            with open(path, "rb") as fh:
                h.update(fh.read())
            h.update(b"\0")
    return h.hexdigest()


def small_scene(**overrides) -> SceneSpec:
    """A 48x48 scene with one lodging whale; cheap enough for unit tests."""
    d = {
        "camera": {"width": 48, "height": 48, "altitude": 60.0},
        "objects_of_interest": [{"source": "parametric", "pose": "lodging"}],
    }
    for k, v in overrides.items():
        if isinstance(v, dict) and isinstance(d.get(k), dict):
            d[k] = {**d[k], **v}
        else:
            d[k] = v
    return SceneSpec.from_dict(d)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number])
