"""Pure numpy distance kernels: dense query vs CSR bank of sparse histograms.

Same contract as the compiled extension in _kernels.pyx; selected at
import time by chorusid.kernels. Every instance in the bank must have
at least one stored bin (np.add.reduceat misbehaves on empty segments).
"""

import numpy as np


def l1_csr(q, indices, masses, offsets):
    """Sum_i |q_i - b_i| per instance, via the sparse-support identity."""
    n = len(offsets) - 1
    if n == 0:
        return np.empty(0, dtype=np.float64)
    qi = q[indices]
    vals = np.abs(qi - masses) - qi
    return q.sum() + np.add.reduceat(vals, offsets[:-1])


def hellinger_csr(q, indices, masses, offsets):
    """1 - Bhattacharyya coefficient per instance."""
    n = len(offsets) - 1
    if n == 0:
        return np.empty(0, dtype=np.float64)
    vals = np.sqrt(q[indices] * masses)
    return 1.0 - np.add.reduceat(vals, offsets[:-1])


def kl_csr(a_tilde, h_a, eps, n_bins, indices, masses, offsets, inst_sums):
    """KL(query || instance) with eps-smoothed, renormalised inputs.

    ``a_tilde`` is the smoothed, renormalised query; ``h_a`` its
    negative entropy sum(a~ ln a~). Off-support instance bins
    contribute ln(eps / Z_b) weighted by the query mass they carry.
    """
    n = len(offsets) - 1
    if n == 0:
        return np.empty(0, dtype=np.float64)
    at = a_tilde[indices]
    ln_eps = np.log(eps)
    acc1 = np.add.reduceat(at * np.log(masses + eps), offsets[:-1])
    acc2 = np.add.reduceat(at, offsets[:-1])
    log_zb = np.log(inst_sums + n_bins * eps)
    return h_a - acc1 - (1.0 - acc2) * ln_eps + log_zb
