"""Compiled kernels vs the numpy reference: results must be bit-identical."""

import sys

import numpy as np
import pytest

from cova import kernels
from cova.kernels import reference
from cova.mog import INIT_VAR, INIT_WEIGHT, MATCH_SIGMA, VAR_FLOOR

compiled = pytest.importorskip("cova.kernels._core")


def flood_fill_components(bitmap):
    """Recursive 8-connectivity flood fill; the independent labeling oracle.

    Returns a frozenset of frozensets of (i, j) cells — label numbering is
    irrelevant, only the partition matters.
    """
    sys.setrecursionlimit(100000)
    h, w = bitmap.shape
    seen = np.zeros((h, w), dtype=bool)
    comps = []

    def fill(i, j, acc):
        if not (0 <= i < h and 0 <= j < w) or seen[i, j] or not bitmap[i, j]:
            return
        seen[i, j] = True
        acc.add((i, j))
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di or dj:
                    fill(i + di, j + dj, acc)

    for i in range(h):
        for j in range(w):
            if bitmap[i, j] and not seen[i, j]:
                acc = set()
                fill(i, j, acc)
                comps.append(frozenset(acc))
    return frozenset(comps)


def labels_to_partition(labels):
    out = {}
    h, w = labels.shape
    for i in range(h):
        for j in range(w):
            if labels[i, j]:
                out.setdefault(labels[i, j], set()).add((i, j))
    return frozenset(frozenset(c) for c in out.values())


def test_label_components_matches_flood_fill(rng):
    for _ in range(100):
        bitmap = (rng.random((40, 40)) < rng.uniform(0.1, 0.6)).astype(np.uint8)
        labels = compiled.label_components(bitmap)
        assert labels_to_partition(labels) == flood_fill_components(bitmap)


def test_label_components_parity(rng):
    for _ in range(100):
        h, w = int(rng.integers(1, 40)), int(rng.integers(1, 40))
        bitmap = (rng.random((h, w)) < 0.4).astype(np.uint8)
        a = compiled.label_components(bitmap)
        b = reference.label_components(bitmap)
        assert np.array_equal(a, b)


def test_label_numbering_row_major(rng):
    bitmap = np.zeros((5, 5), dtype=np.uint8)
    bitmap[0, 0] = bitmap[0, 1] = 1  # component 1
    bitmap[3, 3] = bitmap[4, 4] = 1  # component 2 (diagonal touch)
    labels = kernels.label_components(bitmap)
    assert labels[0, 0] == labels[0, 1] == 1
    assert labels[3, 3] == labels[4, 4] == 2


def test_mog_update_parity(rng):
    for _ in range(20):
        h, w = int(rng.integers(4, 24)), int(rng.integers(4, 24))
        frame = rng.uniform(0, 255, size=(h, w))
        mean = rng.uniform(0, 255, size=(3, h, w))
        var = rng.uniform(1, 200, size=(3, h, w))
        weight = rng.dirichlet([1.0, 1.0, 1.0], size=(h, w)).transpose(2, 0, 1).copy()
        args = (0.02, MATCH_SIGMA ** 2, 0.7, INIT_VAR, VAR_FLOOR, INIT_WEIGHT)

        m1, v1, w1 = mean.copy(), var.copy(), weight.copy()
        mask1 = compiled.mog_update(frame, m1, v1, w1, *args)
        m2, v2, w2 = mean.copy(), var.copy(), weight.copy()
        mask2 = reference.mog_update(frame, m2, v2, w2, *args)

        assert np.array_equal(mask1, mask2)
        assert np.array_equal(m1, m2)
        assert np.array_equal(v1, v2)
        assert np.array_equal(w1, w2)


def test_backend_reported():
    assert kernels.BACKEND in ("compiled", "python")
