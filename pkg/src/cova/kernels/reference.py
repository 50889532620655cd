"""Pure-Python/numpy fallbacks for the compiled kernels.

Both implementations must produce bit-identical results; the parity tests in
tests/test_kernels.py hold them to that.
"""

import numpy as np


def label_components(bitmap):
    """Two-pass union-find labeling, 8-connectivity, matching _core semantics."""
    bitmap = np.asarray(bitmap)
    h, w = bitmap.shape
    labels = np.zeros((h, w), dtype=np.int32)
    parent = [0]

    def find(a):
        while parent[a] != a:
            a = parent[a]
        return a

    next_label = 1
    for i in range(h):
        row = bitmap[i]
        for j in range(w):
            if row[j] == 0:
                continue
            best = 0
            if j > 0 and labels[i, j - 1]:
                best = labels[i, j - 1]
            if i > 0:
                for jj in (j - 1, j, j + 1):
                    if 0 <= jj < w and labels[i - 1, jj]:
                        nb = labels[i - 1, jj]
                        if best == 0:
                            best = nb
                        else:
                            a, b = find(best), find(nb)
                            if a < b:
                                parent[b] = a
                            elif b < a:
                                parent[a] = b
            if best == 0:
                parent.append(next_label)
                labels[i, j] = next_label
                next_label += 1
            else:
                labels[i, j] = best

    remap = {}
    out = labels  # relabel in place
    for i in range(h):
        for j in range(w):
            if labels[i, j] == 0:
                continue
            r = find(labels[i, j])
            if r not in remap:
                remap[r] = len(remap) + 1
            out[i, j] = remap[r]
    return out


def mog_update(x, mean, var, weight, alpha, match2, bg_thresh,
               init_var, var_floor, init_weight):
    """Vectorized mixture-of-Gaussians step; updates state arrays in place."""
    k_count = mean.shape[0]
    ks = np.arange(k_count)[:, None, None]

    order = np.argsort(-weight, axis=0, kind="stable")
    w_sorted = np.take_along_axis(weight, order, axis=0)
    cum_excl = np.cumsum(w_sorted, axis=0) - w_sorted
    is_bg_sorted = cum_excl < bg_thresh

    delta_all = x[None] - mean
    matched = delta_all * delta_all <= match2 * var
    matched_sorted = np.take_along_axis(matched, order, axis=0)
    any_match = matched_sorted.any(axis=0)
    first_pos = np.argmax(matched_sorted, axis=0)
    m = np.take_along_axis(order, first_pos[None], axis=0)[0]
    mask = ~(matched_sorted & is_bg_sorted).any(axis=0)

    onehot = ks == m[None]
    sel = onehot & any_match[None]
    weight[...] = np.where(
        any_match[None], (1.0 - alpha) * weight + alpha * onehot, weight
    )
    new_mean = mean + alpha * delta_all
    new_var = np.maximum(var + alpha * (delta_all * delta_all - var), var_floor)
    mean[...] = np.where(sel, new_mean, mean)
    var[...] = np.where(sel, new_var, var)

    k_weak = np.argmin(weight, axis=0)
    sel_weak = (ks == k_weak[None]) & ~any_match[None]
    mean[...] = np.where(sel_weak, x[None], mean)
    var[...] = np.where(sel_weak, init_var, var)
    weight[...] = np.where(sel_weak, init_weight, weight)

    weight[...] = weight / weight.sum(axis=0)
    return mask.astype(np.uint8)
