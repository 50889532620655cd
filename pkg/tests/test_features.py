"""Feature engineering over metadata windows."""

import numpy as np
import pytest

from cova.blobnet import BlobNetModel
from cova.features import MV_SCALE, assemble_features, build_features, window_arrays
from cova.metadata import FrameMeta, MB_I, MB_P


def _frame(i, ftype="P", shape=(4, 4), mv=None):
    code = MB_I if ftype == "I" else MB_P
    return FrameMeta(
        frame_index=i,
        frame_type=ftype,
        gop_index=0,
        mb_type=np.full(shape, code, dtype=np.uint8),
        partition=np.zeros(shape, dtype=np.uint8),
        mv=np.zeros(shape + (2,), dtype=np.int16) if mv is None else mv,
    )


def test_all_i_zero_embedding_gives_zero_tensor():
    model = BlobNetModel.zeros()
    x = build_features([_frame(0, "I"), _frame(1, "I")], model)
    assert x.shape == (2, 4, 4, 3)
    assert not x.any()


def test_mv_normalization():
    mv = np.zeros((4, 4, 2), dtype=np.int16)
    mv[1, 2] = (4, -4)
    combo, mv_norm = window_arrays([_frame(0, "P", mv=mv)])
    assert mv_norm[0, 1, 2, 0] == pytest.approx(4 / MV_SCALE)  # 0.0625
    assert mv_norm[0, 1, 2, 1] == pytest.approx(-4 / MV_SCALE)


def test_mv_clipping():
    mv = np.full((4, 4, 2), 1000, dtype=np.int16)
    _, mv_norm = window_arrays([_frame(0, "P", mv=mv)])
    assert (mv_norm == 1.0).all()


def test_720p_shape():
    shape = (720 // 16, 1280 // 16)  # (45, 80)
    frames = [_frame(0, "I", shape=shape), _frame(1, "P", shape=shape)]
    x = build_features(frames, BlobNetModel.zeros())
    assert x.shape == (2, 45, 80, 3)


def test_embedding_channel_lookup():
    emb = np.arange(12, dtype=np.float64)
    combo, mv_norm = window_arrays([_frame(0, "P")])  # combo (P,0) -> 1
    x = assemble_features(combo, mv_norm, emb)
    assert (x[..., 0] == 1.0).all()


def test_heterogeneous_grids_rejected():
    with pytest.raises(ValueError):
        window_arrays([_frame(0, shape=(4, 4)), _frame(1, shape=(4, 5))])


def test_window_length_mismatch():
    with pytest.raises(ValueError):
        build_features([_frame(0)], BlobNetModel.zeros(temporal_depth=2))


def test_bad_embedding_size():
    combo, mv_norm = window_arrays([_frame(0)])
    with pytest.raises(ValueError):
        assemble_features(combo, mv_norm, np.zeros(5))
