"""Feature engineering: compressed-frame metadata -> segmentation-net input."""

import numpy as np

from .metadata import N_COMBOS

# Quarter-pel scale that keeps typical motion vectors well inside [-1, 1].
MV_SCALE = 64.0


def window_arrays(frames):
    """(combo, mv_norm) arrays for a window of FrameMeta.

    combo: int32 (T, MB_H, MB_W); mv_norm: float64 (T, MB_H, MB_W, 2).
    """
    shapes = {f.mb_type.shape for f in frames}
    if len(shapes) != 1:
        raise ValueError(f"heterogeneous grid shapes in window: {sorted(shapes)}")
    combo = np.stack([f.combo().astype(np.int32) for f in frames])
    mv = np.stack([f.mv.astype(np.float64) for f in frames])
    mv_norm = np.clip(mv / MV_SCALE, -1.0, 1.0)
    return combo, mv_norm


def assemble_features(combo, mv_norm, embedding):
    """Stack (embedding weight, dx, dy) channels into a (T, H, W, 3) tensor."""
    emb = np.asarray(embedding, dtype=np.float64)
    if emb.shape != (N_COMBOS,):
        raise ValueError(f"embedding table must have {N_COMBOS} entries")
    out = np.empty(combo.shape + (3,), dtype=np.float64)
    out[..., 0] = emb[combo]
    out[..., 1:] = mv_norm
    return out


def build_features(frames, model):
    """FeatureTensor for a window of len(model.temporal_depth) FrameMeta."""
    if len(frames) != model.temporal_depth:
        raise ValueError(
            f"window length {len(frames)} != temporal depth {model.temporal_depth}"
        )
    combo, mv_norm = window_arrays(frames)
    return assemble_features(combo, mv_norm, model.params["emb"])
