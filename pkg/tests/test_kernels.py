"""Distance kernels: numpy fallback vs compiled extension vs dense formulas."""

import numpy as np
import pytest

from chorusid import _kernels_np
from chorusid.classifier import KL_EPSILON

backends = [pytest.param(_kernels_np, id="numpy")]
try:
    from chorusid import _kernels

    backends.append(pytest.param(_kernels, id="cython"))
except ImportError:
    _kernels = None


def random_bank(rng, n_instances, n_bins, max_nnz=40):
    indices, masses, lengths = [], [], []
    for _ in range(n_instances):
        nnz = int(rng.integers(1, max_nnz + 1))
        idx = np.sort(rng.choice(n_bins, size=nnz, replace=False)).astype(np.int32)
        m = rng.random(nnz)
        indices.append(idx)
        masses.append(m / m.sum())
        lengths.append(nnz)
    offsets = np.zeros(n_instances + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    return np.concatenate(indices), np.concatenate(masses), offsets


def densify(indices, masses, offsets, n_bins):
    n = len(offsets) - 1
    out = np.zeros((n, n_bins))
    for j in range(n):
        sl = slice(offsets[j], offsets[j + 1])
        out[j, indices[sl]] = masses[sl]
    return out


@pytest.mark.parametrize("kernels", backends)
class TestAgainstDenseFormulas:
    def test_l1(self, kernels, rng):
        n_bins = 300
        indices, masses, offsets = random_bank(rng, 50, n_bins)
        q = rng.random(n_bins)
        q /= q.sum()
        expected = np.abs(densify(indices, masses, offsets, n_bins) - q).sum(axis=1)
        got = kernels.l1_csr(q, indices, masses, offsets)
        np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-12)

    def test_hellinger(self, kernels, rng):
        n_bins = 300
        indices, masses, offsets = random_bank(rng, 50, n_bins)
        q = rng.random(n_bins)
        q /= q.sum()
        dense = densify(indices, masses, offsets, n_bins)
        expected = 1.0 - np.sqrt(dense * q).sum(axis=1)
        got = kernels.hellinger_csr(q, indices, masses, offsets)
        np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-12)

    def test_kl(self, kernels, rng):
        n_bins = 300
        eps = KL_EPSILON
        indices, masses, offsets = random_bank(rng, 50, n_bins)
        q = rng.random(n_bins)
        q /= q.sum()
        dense = densify(indices, masses, offsets, n_bins)
        a_t = (q + eps) / (q.sum() + n_bins * eps)
        b_t = (dense + eps) / (dense.sum(axis=1, keepdims=True) + n_bins * eps)
        expected = (a_t * np.log(a_t / b_t)).sum(axis=1)
        h_a = float((a_t * np.log(a_t)).sum())
        inst_sums = np.add.reduceat(masses, offsets[:-1])
        got = kernels.kl_csr(a_t, h_a, eps, n_bins, indices, masses, offsets, inst_sums)
        np.testing.assert_allclose(got, expected, rtol=1e-9, atol=1e-12)

    def test_empty_bank(self, kernels):
        q = np.array([0.5, 0.5])
        offsets = np.zeros(1, dtype=np.int64)
        empty_i = np.empty(0, dtype=np.int32)
        empty_m = np.empty(0, dtype=np.float64)
        assert len(kernels.l1_csr(q, empty_i, empty_m, offsets)) == 0


@pytest.mark.skipif(_kernels is None, reason="compiled extension unavailable")
def test_backends_agree(rng):
    n_bins = 5000
    indices, masses, offsets = random_bank(rng, 400, n_bins, max_nnz=100)
    q = rng.random(n_bins)
    q /= q.sum()
    np.testing.assert_allclose(
        _kernels.l1_csr(q, indices, masses, offsets),
        _kernels_np.l1_csr(q, indices, masses, offsets),
        rtol=1e-12, atol=1e-14,
    )
    np.testing.assert_allclose(
        _kernels.hellinger_csr(q, indices, masses, offsets),
        _kernels_np.hellinger_csr(q, indices, masses, offsets),
        rtol=1e-12, atol=1e-14,
    )
    eps = KL_EPSILON
    a_t = (q + eps) / (q.sum() + n_bins * eps)
    h_a = float((a_t * np.log(a_t)).sum())
    inst_sums = np.add.reduceat(masses, offsets[:-1])
    np.testing.assert_allclose(
        _kernels.kl_csr(a_t, h_a, eps, n_bins, indices, masses, offsets, inst_sums),
        _kernels_np.kl_csr(a_t, h_a, eps, n_bins, indices, masses, offsets, inst_sums),
        rtol=1e-12, atol=1e-14,
    )
