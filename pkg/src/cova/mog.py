"""Mixture-of-Gaussians background subtraction, used to auto-label moving
foreground for segmentation training."""

from dataclasses import dataclass

import numpy as np

from . import kernels

# Stauffer-Grimson-style defaults; the match rule is |x - mean| <= 2.5 sigma.
DEFAULT_K = 3
DEFAULT_ALPHA = 0.02
MATCH_SIGMA = 2.5
BG_WEIGHT_THRESHOLD = 0.7
INIT_VAR = 100.0
VAR_FLOOR = 1e-4
INIT_WEIGHT = 0.05


@dataclass
class MoGState:
    mean: np.ndarray  # (K, H, W)
    var: np.ndarray
    weight: np.ndarray
    alpha: float = DEFAULT_ALPHA
    bg_threshold: float = BG_WEIGHT_THRESHOLD
    initialized: bool = False

    @classmethod
    def create(cls, height, width, k=DEFAULT_K, alpha=DEFAULT_ALPHA,
               bg_threshold=BG_WEIGHT_THRESHOLD):
        weight = np.zeros((k, height, width))
        weight[0] = 1.0
        return cls(
            mean=np.zeros((k, height, width)),
            var=np.full((k, height, width), INIT_VAR),
            weight=weight,
            alpha=alpha,
            bg_threshold=bg_threshold,
        )


def mog_step(state: MoGState, frame):
    """Advance the model by one frame; returns (state, foreground mask).

    The state is updated in place and returned for call-chaining.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape != state.mean.shape[1:]:
        raise ValueError(
            f"frame shape {frame.shape} does not match model {state.mean.shape[1:]}"
        )
    if not state.initialized:
        # Seed the dominant gaussian from the first frame so a scene that is
        # static from frame 0 is background immediately.
        state.mean[0] = frame
        state.initialized = True
        return state, np.zeros(frame.shape, dtype=np.uint8)
    mask = kernels.mog_update(
        frame, state.mean, state.var, state.weight,
        state.alpha, MATCH_SIGMA ** 2, state.bg_threshold,
        INIT_VAR, VAR_FLOOR, INIT_WEIGHT,
    )
    return state, mask


def make_targets(mask, mb_size=16, coverage=0.25):
    """Macroblock-grid binary target: 1 iff >= `coverage` of the block's pixels
    are foreground."""
    mask = np.asarray(mask)
    h, w = mask.shape
    if h % mb_size or w % mb_size:
        raise ValueError(f"mask shape {mask.shape} is not a multiple of {mb_size}")
    blocks = mask.reshape(h // mb_size, mb_size, w // mb_size, mb_size)
    frac = blocks.astype(np.float64).mean(axis=(1, 3))
    return (frac >= coverage).astype(np.uint8)
