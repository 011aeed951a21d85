import numpy as np
import pytest

from conftest import texture
from texfuse.gabor import GaborBankConfig, convolve, gabor_kernel, pricolgbp, pricolgbp_dim
from texfuse.lbp import LbpConfig
from texfuse.pricolbp import TemplateSet, pricolbp_descriptor


@pytest.mark.parametrize("scale", [1, 2, 3, 7])
def test_kernel_zero_mean_and_symmetry(scale):
    k = gabor_kernel(scale)
    assert abs(k.sum()) < 1e-9
    assert abs(np.abs(k).sum() - 1) < 1e-12
    np.testing.assert_allclose(k, k[::-1, :], atol=1e-15)
    assert k.shape[0] == 2 * int(np.ceil(3 * 0.56 * 4 * scale)) + 1


def test_constant_response_is_zero():
    out = convolve(np.full((30, 30), 77.0), gabor_kernel(2), normalize=False)
    assert np.abs(out).max() < 1e-6


def test_convolve_examples():
    a = np.random.default_rng(0).uniform(0, 255, (9, 10))
    delta = np.zeros((3, 3))
    delta[1, 1] = 1
    np.testing.assert_array_equal(convolve(a, delta, normalize=False), a)
    assert np.all(convolve(a, np.zeros((3, 3))).data == 0)
    imp = np.zeros((9, 9))
    imp[4, 4] = 1
    out = convolve(imp, np.ones((3, 3)), normalize=False)
    expect = np.zeros((9, 9))
    expect[3:6, 3:6] = 1
    np.testing.assert_allclose(out, expect, atol=1e-12)


def test_convolve_against_direct_sum():
    rng = np.random.default_rng(1)
    a = rng.uniform(0, 255, (8, 9))
    k = rng.normal(size=(3, 5))
    got = convolve(a, k, normalize=False)
    p = np.pad(a, ((1, 1), (2, 2)), mode="edge")
    ref = np.array([[np.sum(p[y:y + 3, x:x + 5] * k) for x in range(9)] for y in range(8)])
    np.testing.assert_allclose(got, ref, rtol=1e-10, atol=1e-9)


def test_kernel_too_large():
    with pytest.raises(ValueError):
        convolve(np.zeros((20, 20)), gabor_kernel(3))


def test_unknown_scale():
    with pytest.raises(ValueError):
        gabor_kernel(9)


def test_dimensions():
    assert pricolgbp_dim(7, 10) == 47200
    assert pricolgbp_dim(2, 1) == 1770
    a = texture("grating", 64)
    v = pricolgbp(a, LbpConfig(), TemplateSet(((2, 0),)), GaborBankConfig(scales=(1, 2)))
    assert v.shape == (1770,)
    for blk in v.reshape(3, 590):
        assert abs(blk.sum() - 1) < 1e-12


def test_empty_bank_reduces_to_pricolbp():
    a = texture("noise", 32)
    v = pricolgbp(a, bank=GaborBankConfig(scales=()))
    np.testing.assert_array_equal(v, pricolbp_descriptor(a))


def test_additive_shift_invariance():
    a = np.round(texture("blobs", 48, seed=2))
    bank = GaborBankConfig(scales=(1, 2))
    np.testing.assert_allclose(pricolgbp(a, bank=bank)[5900:], pricolgbp(a + 40, bank=bank)[5900:], atol=1e-9)
