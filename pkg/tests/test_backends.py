"""The numba kernels and their numpy twins must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import texture
from texfuse import kernels
from texfuse._backend import HAVE_NUMBA
from texfuse.classify import train_linear_svm_ovr
from texfuse.densesift import PatchGridConfig, extract_image_rootsifts
from texfuse.lbp import LbpConfig, lbp_code_map
from texfuse.pricolbp import TemplateSet, pricolbp_descriptor

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")

NAMES = {"lbp_codes": "lbp_codes", "pricolbp": "pricolbp_accumulate", "sift_bins": "sift_bins",
         "dcd_epoch": "dcd_epoch", "dcd_epoch_primal": "dcd_epoch_primal"}




def _run(fn):
    out = {}
    for name, table in (("numba", kernels.NUMBA_KERNELS), ("numpy", kernels.NUMPY_KERNELS)):
        saved = {a: getattr(kernels, a) for a in NAMES.values()}
        try:
            for key, attr in NAMES.items():
                setattr(kernels, attr, table[key])
            out[name] = fn()
        finally:
            for a, f in saved.items():
                setattr(kernels, a, f)
    return out["numba"], out["numpy"]


@pytest.mark.parametrize("P,R", [(8, 1.0), (8, 2.0), (16, 2.0), (4, 1.5)])
def test_lbp_codes_bitwise(P, R):
    img = texture("noise", 40, seed=P)
    a, b = _run(lambda: lbp_code_map(img, LbpConfig(P, R)))
    assert np.array_equal(a, b)


def test_pricolbp_bitwise():
    img = texture("blobs", 48, seed=3)
    a, b = _run(lambda: pricolbp_descriptor(img, LbpConfig(), TemplateSet.preset("ten")))
    assert np.array_equal(a, b)


def test_sift_bins_bitwise():
    img = texture("checker", 64, seed=1)
    cfg = PatchGridConfig(41, 4, (1.5, 2.25), 64)
    a, b = _run(lambda: extract_image_rootsifts(img, cfg).data)
    assert np.array_equal(a, b)


def test_dcd_epoch_bitwise(rng):
    X = rng.normal(size=(30, 5))
    y = np.where(rng.random(30) < 0.5, 1.0, -1.0)
    K = X @ X.T + 1
    order = rng.permutation(30)
    outs = []
    for table in (kernels.NUMBA_KERNELS, kernels.NUMPY_KERNELS):
        alpha, f = np.zeros(30), np.zeros(30)
        for _ in range(5):
            table["dcd_epoch"](K, y, alpha, f, 1.0, order)
        outs.append((alpha, f))
    assert np.array_equal(outs[0][0], outs[1][0]) and np.array_equal(outs[0][1], outs[1][1])


def test_dcd_primal_epoch_close(rng):
    X = np.hstack([rng.normal(size=(30, 5)), np.ones((30, 1))])
    y = np.where(rng.random(30) < 0.5, 1.0, -1.0)
    q = np.einsum("ij,ij->i", X, X)
    order = rng.permutation(30)
    outs = []
    for table in (kernels.NUMBA_KERNELS, kernels.NUMPY_KERNELS):
        alpha, w = np.zeros(30), np.zeros(6)
        for _ in range(5):
            table["dcd_epoch_primal"](X, y, alpha, w, 1.0, order, q)
        outs.append((alpha, w))
    # dot products may be summed in a different order
    np.testing.assert_allclose(outs[0][0], outs[1][0], rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(outs[0][1], outs[1][1], rtol=1e-10, atol=1e-12)


def test_svm_models_agree(rng):
    X = rng.normal(size=(60, 8))
    y = rng.integers(0, 3, 60)
    a, b = _run(lambda: train_linear_svm_ovr(X, y, C=1.0))
    assert np.array_equal(a.W, b.W) and np.array_equal(a.b, b.b)


def test_env_flag_selects_numpy():
    env = dict(os.environ, TEXFUSE_BACKEND="numpy")
    code = "import texfuse, texfuse.kernels as k; print(texfuse.backend_name(), k.lbp_codes is k._lbp_codes_numpy)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "True"]
