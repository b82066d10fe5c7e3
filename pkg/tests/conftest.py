import numpy as np
import pytest
from PIL import Image


def checkerboard(rng, size=64):
    cell = int(rng.integers(3, 9))
    oy, ox = rng.integers(0, cell, size=2)
    yy, xx = np.mgrid[0:size, 0:size]
    board = (((yy + oy) // cell + (xx + ox) // cell) % 2).astype(np.float64)
    lo, hi = sorted(rng.integers(20, 236, size=2))
    hi = max(hi, lo + 60)
    img = lo + board * (hi - lo) + rng.normal(0, 4, size=(size, size))
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def uniform_noise(rng, size=64):
    return rng.integers(0, 256, size=(size, size), dtype=np.uint8)


def write_texture_dataset(root, per_class=40, size=64, seed=7):
    """Two texture classes: checkerboards and uniform noise."""
    rng = np.random.default_rng(seed)
    for name, maker in (("checker", checkerboard), ("noise", uniform_noise)):
        d = root / name
        d.mkdir(parents=True)
        for k in range(per_class):
            Image.fromarray(maker(rng, size)).save(d / f"{name}_{k:03d}.png")
    return root


@pytest.fixture(scope="session")
def texture_dataset(tmp_path_factory):
    return write_texture_dataset(tmp_path_factory.mktemp("textures"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# --- acceptance summary: one line per criterion --------------------------------

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "acceptance", None)
    if marker is None:
        return
    number, title = marker
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        outcome = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        _ACCEPTANCE[number] = (title, outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("acceptance")
    if m is not None:
        rep.acceptance = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, outcome = _ACCEPTANCE[number]
        terminalreporter.write_line(f"[{outcome}] criterion {number}: {title}")
