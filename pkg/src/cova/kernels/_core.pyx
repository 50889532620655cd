"""Compiled hot kernels: per-pixel mixture-of-Gaussians update and
8-connectivity connected-component labeling."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def label_components(cnp.uint8_t[:, :] bitmap):
    """Two-pass union-find labeling, 8-connectivity.

    Returns int32 labels: 0 for background, components numbered from 1 in
    row-major order of first appearance.
    """
    cdef Py_ssize_t h = bitmap.shape[0]
    cdef Py_ssize_t w = bitmap.shape[1]
    labels_arr = np.zeros((h, w), dtype=np.int32)
    cdef cnp.int32_t[:, :] labels = labels_arr
    parent_arr = np.zeros(h * w + 1, dtype=np.int32)
    cdef cnp.int32_t[:] parent = parent_arr
    cdef Py_ssize_t i, j, n
    cdef cnp.int32_t next_label = 1
    cdef cnp.int32_t best, nb, a, b, r

    # First pass: provisional labels, merging across the 4 already-seen
    # neighbors (W, NW, N, NE).
    for i in range(h):
        for j in range(w):
            if bitmap[i, j] == 0:
                continue
            best = 0
            if j > 0 and labels[i, j - 1] != 0:
                best = labels[i, j - 1]
            if i > 0:
                for n in range(3):
                    if j - 1 + n < 0 or j - 1 + n >= w:
                        continue
                    nb = labels[i - 1, j - 1 + n]
                    if nb == 0:
                        continue
                    if best == 0:
                        best = nb
                    else:
                        # union(best, nb)
                        a = best
                        while parent[a] != a:
                            a = parent[a]
                        b = nb
                        while parent[b] != b:
                            b = parent[b]
                        if a < b:
                            parent[b] = a
                        elif b < a:
                            parent[a] = b
            if best == 0:
                parent[next_label] = next_label
                labels[i, j] = next_label
                next_label += 1
            else:
                labels[i, j] = best

    # Second pass: resolve roots and renumber by first row-major appearance.
    remap_arr = np.zeros(next_label, dtype=np.int32)
    cdef cnp.int32_t[:] remap = remap_arr
    cdef cnp.int32_t n_out = 0
    for i in range(h):
        for j in range(w):
            if labels[i, j] == 0:
                continue
            r = labels[i, j]
            while parent[r] != r:
                r = parent[r]
            if remap[r] == 0:
                n_out += 1
                remap[r] = n_out
            labels[i, j] = remap[r]
    return labels_arr


def mog_update(cnp.float64_t[:, :] x,
               cnp.float64_t[:, :, :] mean,
               cnp.float64_t[:, :, :] var,
               cnp.float64_t[:, :, :] weight,
               double alpha, double match2, double bg_thresh,
               double init_var, double var_floor, double init_weight):
    """One background-subtraction step over a (K, H, W) Gaussian mixture.

    Updates mean/var/weight in place and returns the uint8 foreground mask.
    Must stay numerically identical to the reference implementation.
    """
    cdef Py_ssize_t k_count = mean.shape[0]
    cdef Py_ssize_t h = mean.shape[1]
    cdef Py_ssize_t w = mean.shape[2]
    mask_arr = np.zeros((h, w), dtype=np.uint8)
    cdef cnp.uint8_t[:, :] mask = mask_arr
    cdef Py_ssize_t i, j, k, p, q, tmp, m, k_weak
    cdef Py_ssize_t order[8]
    cdef double xv, cum, d, delta, s
    cdef bint any_match, fg

    for i in range(h):
        for j in range(w):
            xv = x[i, j]
            # Insertion sort of gaussian indices by weight desc, stable.
            for k in range(k_count):
                order[k] = k
            for p in range(1, k_count):
                q = p
                while q > 0 and weight[order[q], i, j] > weight[order[q - 1], i, j]:
                    tmp = order[q]
                    order[q] = order[q - 1]
                    order[q - 1] = tmp
                    q -= 1

            any_match = False
            fg = True
            m = 0
            cum = 0.0
            for p in range(k_count):
                k = order[p]
                d = xv - mean[k, i, j]
                if d * d <= match2 * var[k, i, j]:
                    if not any_match:
                        any_match = True
                        m = k
                    if cum < bg_thresh:
                        fg = False
                cum += weight[k, i, j]
            if fg:
                mask[i, j] = 1

            if any_match:
                for k in range(k_count):
                    weight[k, i, j] = (1.0 - alpha) * weight[k, i, j] + (alpha if k == m else 0.0)
                delta = xv - mean[m, i, j]
                mean[m, i, j] = mean[m, i, j] + alpha * delta
                var[m, i, j] = var[m, i, j] + alpha * (delta * delta - var[m, i, j])
                if var[m, i, j] < var_floor:
                    var[m, i, j] = var_floor
            else:
                k_weak = 0
                for k in range(1, k_count):
                    if weight[k, i, j] < weight[k_weak, i, j]:
                        k_weak = k
                mean[k_weak, i, j] = xv
                var[k_weak, i, j] = init_var
                weight[k_weak, i, j] = init_weight

            s = 0.0
            for k in range(k_count):
                s += weight[k, i, j]
            for k in range(k_count):
                weight[k, i, j] = weight[k, i, j] / s
    return mask_arr
