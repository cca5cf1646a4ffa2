"""Pure-Python (numpy) annotation-sampling kernel.

Reference implementation of the sampling semantics; the compiled kernel in
_sampling.pyx mirrors it exactly. Every annotation consumes one fixed row of
three uniforms (acceptance test, class draw, noise draw) regardless of which
branches fire, which keeps both backends on identical random streams.
"""

from __future__ import annotations

import numpy as np


def sample_many(
    gt_cum: np.ndarray,
    proposal: int,
    deltas: np.ndarray,
    noise_cum: np.ndarray,
    a_cons: int,
    a_full: int,
    agreement: float,
    uniforms: np.ndarray,
) -> np.ndarray:
    """Sample up to ``a_full`` annotations for one image.

    Args:
        gt_cum: cumulative ground-truth distribution, last entry exactly 1.
        proposal: proposed class, or -1 when annotating without proposals.
        deltas: per-annotator acceptance offsets, indexed round-robin.
        noise_cum: (n_annotators, K, K) cumulative confusion rows (identity
            rows when an annotator has no noise model), last entries 1.
        a_cons: annotations drawn before the early-consensus check.
        a_full: total annotations when consensus fails.
        agreement: consensus threshold on the majority share (1.0 = unanimous).
        uniforms: (a_full, 3) uniforms in [0, 1).

    Returns:
        int32 array of chosen classes, length a_cons on early consensus,
        otherwise a_full.
    """
    n_annotators = deltas.shape[0]
    annotator = np.arange(a_full) % n_annotators
    # First index k with u < cum[k]; equals the count of entries <= u.
    chosen = np.searchsorted(gt_cum, uniforms[:, 1], side="right")
    if proposal >= 0:
        accepted = uniforms[:, 0] < deltas[annotator]
        chosen = np.where(accepted, proposal, chosen)
    rows = noise_cum[annotator, chosen]
    chosen = (rows <= uniforms[:, 2:3]).sum(axis=1)

    n_used = a_full
    if a_cons < a_full:
        counts = np.bincount(chosen[:a_cons])
        if counts.max() >= agreement * a_cons - 1e-9:
            n_used = a_cons
    return chosen[:n_used].astype(np.int32)
