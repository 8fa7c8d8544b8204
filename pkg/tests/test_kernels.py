import os
import subprocess
import sys

import numpy as np
import pytest

import reference
from opmal.kernels import ENV_FLAG, numba_backend, numpy_backend

BACKENDS = [numpy_backend, numba_backend]
IDS = ["numpy", "numba"]


def random_column(rng, max_n=40, max_value=8):
    n = int(rng.integers(2, max_n + 1))
    values = np.sort(rng.integers(0, max_value + 1, size=n).astype(np.float64))
    labels = rng.integers(0, 2, size=n).astype(np.int64)
    return values, labels


@pytest.mark.parametrize("backend", BACKENDS, ids=IDS)
class TestBestSplit:
    def test_matches_reference(self, backend, rng):
        for _ in range(300):
            values, labels = random_column(rng)
            min_leaf = int(rng.integers(1, 4))
            got = backend.best_split_scan(values, labels, min_leaf)
            want = reference.ref_best_split(values, labels, min_leaf)
            assert got[1] == want[1]
            assert got[0] == pytest.approx(want[0], abs=1e-12)

    def test_known_case(self, backend):
        values = np.array([0.0, 0.0, 5.0, 5.0])
        labels = np.array([0, 0, 1, 1], dtype=np.int64)
        gain, cut = backend.best_split_scan(values, labels, 1)
        assert cut == 2
        assert gain == pytest.approx(1.0)

    def test_constant_column(self, backend):
        values = np.full(6, 3.0)
        labels = np.array([0, 1, 0, 1, 0, 1], dtype=np.int64)
        assert backend.best_split_scan(values, labels, 1) == (-1.0, -1)

    def test_min_leaf_excludes_edges(self, backend):
        values = np.array([0.0, 1.0, 2.0, 3.0])
        labels = np.array([1, 0, 0, 0], dtype=np.int64)
        # only the boundary after the first sample separates; min_leaf 2 bans it
        gain1, cut1 = backend.best_split_scan(values, labels, 1)
        assert cut1 == 1
        gain2, cut2 = backend.best_split_scan(values, labels, 2)
        assert cut2 == 2
        assert gain2 < gain1

    def test_first_maximal_tie(self, backend):
        # boundaries at 1 and 3 mirror each other; the scan keeps the first
        values = np.array([0.0, 1.0, 2.0, 3.0])
        labels = np.array([0, 1, 1, 0], dtype=np.int64)
        _, cut = backend.best_split_scan(values, labels, 1)
        assert cut == 1

    def test_empty_and_single(self, backend):
        assert backend.best_split_scan(
            np.array([], dtype=np.float64), np.array([], dtype=np.int64), 1
        ) == (-1.0, -1)
        assert backend.best_split_scan(
            np.array([1.0]), np.array([1], dtype=np.int64), 1
        ) == (-1.0, -1)


@pytest.mark.parametrize("backend", BACKENDS, ids=IDS)
class TestMdlBoundary:
    def test_matches_reference(self, backend, rng):
        for _ in range(300):
            values, labels = random_column(rng)
            got = backend.mdl_boundary_scan(values, labels)
            want = reference.ref_mdl_boundary(values, labels)
            assert got == want

    def test_known_case(self, backend):
        values = np.array([0.0, 0.0, 5.0, 5.0])
        labels = np.array([0, 0, 1, 1], dtype=np.int64)
        assert backend.mdl_boundary_scan(values, labels) == (2, 2, 0)

    def test_same_class_blocks_skipped(self, backend):
        # all boundaries separate pure same-class runs; no candidate
        values = np.array([0.0, 1.0, 2.0])
        labels = np.array([0, 0, 0], dtype=np.int64)
        assert backend.mdl_boundary_scan(values, labels) == (-1, 0, 0)

    def test_mixed_run_creates_boundary(self, backend):
        # the run at value 1 is mixed, so both its boundaries are candidates
        values = np.array([0.0, 1.0, 1.0, 2.0])
        labels = np.array([0, 0, 1, 0], dtype=np.int64)
        idx, l0, l1 = backend.mdl_boundary_scan(values, labels)
        assert idx in (1, 3)

    def test_constant_column(self, backend):
        values = np.full(4, 2.0)
        labels = np.array([0, 1, 0, 1], dtype=np.int64)
        assert backend.mdl_boundary_scan(values, labels) == (-1, 0, 0)


class TestBackendAgreement:
    def test_bitwise_equal_gains(self, rng):
        for _ in range(200):
            values, labels = random_column(rng, max_n=60)
            a = numpy_backend.best_split_scan(values, labels, 1)
            b = numba_backend.best_split_scan(values, labels, 1)
            assert a[1] == b[1]
            assert a[0] == b[0]  # bitwise, not approximate

    def test_boundary_scan_identical(self, rng):
        for _ in range(200):
            values, labels = random_column(rng, max_n=60)
            assert numpy_backend.mdl_boundary_scan(values, labels) == numba_backend.mdl_boundary_scan(
                values, labels
            )


class TestBackendSelection:
    def _backend_name(self, env_value):
        env = dict(os.environ)
        if env_value is None:
            env.pop(ENV_FLAG, None)
        else:
            env[ENV_FLAG] = env_value
        out = subprocess.run(
            [sys.executable, "-c", "from opmal.kernels import BACKEND; print(BACKEND)"],
            capture_output=True,
            text=True,
            env=env,
            check=True,
        )
        return out.stdout.strip()

    def test_default_is_numba(self):
        assert self._backend_name(None) == "numba"

    def test_flag_selects_numpy(self):
        assert self._backend_name("1") == "numpy"

    def test_empty_and_zero_mean_enabled(self):
        assert self._backend_name("") == "numba"
        assert self._backend_name("0") == "numba"
