"""Backend equivalence and semantics of the sampling kernels."""

import subprocess
import sys

import numpy as np
import pytest

from softcamp.kernels import BACKEND, sampling_py
from softcamp.simulation import _cumulative, _identity_cum

try:
    from softcamp.kernels import _sampling

    HAVE_EXT = True
except ImportError:
    HAVE_EXT = False


def _inputs(seed, k=4, n_annotators=3, a_cons=10, a_full=50):
    rng = np.random.default_rng(seed)
    gt = rng.dirichlet(np.ones(k))
    deltas = rng.uniform(0.0, 0.6, size=n_annotators)
    noise = np.empty((n_annotators, k, k))
    for i in range(n_annotators):
        if i % 2 == 0:
            noise[i] = _identity_cum(k)
        else:
            rows = rng.dirichlet(np.ones(k), size=k)
            noise[i] = np.cumsum(rows, axis=1)
            noise[i, :, -1] = 1.0
    uniforms = rng.random((a_full, 3))
    return _cumulative(gt), deltas, noise, a_cons, a_full, uniforms


@pytest.mark.skipif(not HAVE_EXT, reason="compiled kernel not built")
class TestBackendEquivalence:
    def test_identical_across_many_inputs(self):
        for seed in range(200):
            gt_cum, deltas, noise, a_cons, a_full, uniforms = _inputs(seed)
            proposal = seed % 5 - 1  # includes -1 (no proposal)
            for agreement in (1.0, 0.95):
                a = sampling_py.sample_many(
                    gt_cum, proposal, deltas, noise, a_cons, a_full, agreement, uniforms
                )
                b = _sampling.sample_many(
                    gt_cum, proposal, deltas, noise, a_cons, a_full, agreement, uniforms
                )
                assert np.array_equal(a, np.asarray(b)), f"seed {seed}"

    def test_identical_dtypes(self):
        gt_cum, deltas, noise, a_cons, a_full, uniforms = _inputs(0)
        a = sampling_py.sample_many(gt_cum, 1, deltas, noise, a_cons, a_full, 1.0, uniforms)
        b = _sampling.sample_many(gt_cum, 1, deltas, noise, a_cons, a_full, 1.0, uniforms)
        assert a.dtype == np.int32
        assert np.asarray(b).dtype == np.int32


class TestKernelSemantics:
    def test_full_acceptance_always_returns_proposal(self):
        gt_cum, _, noise, a_cons, a_full, uniforms = _inputs(3)
        deltas = np.ones(3)
        noise[:] = _identity_cum(4)
        out = sampling_py.sample_many(gt_cum, 2, deltas, noise, a_cons, a_full, 1.0, uniforms)
        assert set(out.tolist()) == {2}
        assert len(out) == a_cons  # unanimity stops early

    def test_one_hot_gt_without_proposal(self):
        k = 4
        gt_cum = _cumulative([0.0, 0.0, 1.0, 0.0])
        deltas = np.zeros(2)
        noise = np.stack([_identity_cum(k)] * 2)
        uniforms = np.random.default_rng(0).random((20, 3))
        out = sampling_py.sample_many(gt_cum, -1, deltas, noise, 5, 20, 1.0, uniforms)
        assert set(out.tolist()) == {2}
        assert len(out) == 5

    def test_no_early_stop_when_counts_equal(self):
        gt_cum = _cumulative([0.5, 0.5])
        deltas = np.zeros(1)
        noise = np.stack([_identity_cum(2)])
        # alternate draws -> first 4 disagree -> runs to a_full
        uniforms = np.zeros((8, 3))
        uniforms[:, 1] = [0.1, 0.9, 0.1, 0.9, 0.1, 0.9, 0.1, 0.9]
        out = sampling_py.sample_many(gt_cum, -1, deltas, noise, 4, 8, 1.0, uniforms)
        assert len(out) == 8

    def test_agreement_threshold_below_one(self):
        gt_cum = _cumulative([0.5, 0.5])
        deltas = np.zeros(1)
        noise = np.stack([_identity_cum(2)])
        uniforms = np.zeros((20, 3))
        # 9 of 10 agree: stops at a_cons under 0.9 threshold, not under 1.0
        uniforms[:, 1] = [0.1] * 9 + [0.9] + [0.1] * 10
        stopped = sampling_py.sample_many(gt_cum, -1, deltas, noise, 10, 20, 0.9, uniforms)
        ran_full = sampling_py.sample_many(gt_cum, -1, deltas, noise, 10, 20, 1.0, uniforms)
        assert len(stopped) == 10
        assert len(ran_full) == 20

    def test_noise_reroutes_classes(self):
        k = 2
        gt_cum = _cumulative([1.0, 0.0])
        deltas = np.zeros(1)
        # always flip 0 -> 1
        flip = np.array([[[0.0, 1.0], [1.0, 1.0]]])
        uniforms = np.random.default_rng(1).random((6, 3))
        out = sampling_py.sample_many(gt_cum, -1, deltas, flip, 6, 6, 1.0, uniforms)
        assert set(out.tolist()) == {1}


class TestBackendSelection:
    def test_backend_reported(self):
        assert BACKEND in ("compiled", "python")

    def test_force_python_env(self):
        code = (
            "import softcamp.kernels as k; print(k.BACKEND)"
        )
        result = subprocess.run(
            [sys.executable, "-c", code],
            capture_output=True,
            text=True,
            env={"PATH": "/usr/bin:/bin", "SOFTCAMP_FORCE_PY_KERNEL": "1"},
        )
        assert result.stdout.strip() == "python"
