import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def texture(kind, size=64, seed=0):
    """Small deterministic test textures."""
    r = np.random.default_rng(seed)
    y, x = np.mgrid[0:size, 0:size].astype(float)
    if kind == "noise":
        return r.uniform(0, 255, (size, size))
    if kind == "grating":
        return 128 + 100 * np.sin(2 * np.pi * (x * 0.8 + y * 0.6) / 9.0)
    if kind == "checker":
        return np.where((x // 6 + y // 6) % 2 == 0, 200.0, 50.0) + r.normal(0, 3, (size, size))
    if kind == "blobs":
        from scipy import ndimage
        f = np.zeros((size, size))
        f[r.integers(0, size, 40), r.integers(0, size, 40)] = 1
        return 255 * ndimage.gaussian_filter(f, 2.5, mode="wrap") / 0.02
    raise ValueError(kind)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
