"""BlobNet-lite: a small encoder-decoder segmentation net over macroblock
metadata features, with hand-derived gradients in double precision.

Two {conv3x3, ReLU, 2x avg-downsample} encoder blocks, two {2x nearest
upsample, concat skip, conv3x3, ReLU} decoder blocks, and a 1x1 logit head.
The depth is deliberately shallow so inference never lags metadata extraction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .metadata import N_COMBOS

C1 = 8
C2 = 16
CHECKPOINT_MAGIC = b"BNL1\n"

PARAM_ORDER = ("emb", "W1", "b1", "W2", "b2", "W3", "b3", "W4", "b4", "Wh", "bh")


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch):
        super().__init__(f"non-finite training loss at epoch {epoch}")
        self.epoch = epoch


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 25
    batch_size: int = 8
    temporal_depth: int = 2
    threshold: float = 0.5
    train_fraction: float = 0.03
    seed: int = 0


def _param_shapes(temporal_depth):
    c0 = 3 * temporal_depth
    return {
        "emb": (N_COMBOS,),
        "W1": (C1, c0, 3, 3),
        "b1": (C1,),
        "W2": (C2, C1, 3, 3),
        "b2": (C2,),
        "W3": (C1, C2 + C2, 3, 3),
        "b3": (C1,),
        "W4": (C1, C1 + C1, 3, 3),
        "b4": (C1,),
        "Wh": (1, C1),
        "bh": (1,),
    }


class BlobNetModel:
    def __init__(self, params, temporal_depth):
        self.params = params
        self.temporal_depth = temporal_depth

    @classmethod
    def create(cls, temporal_depth=2, seed=0):
        rng = np.random.default_rng([seed, 0xB10B])
        params = {}
        for name, shape in _param_shapes(temporal_depth).items():
            if name == "emb":
                params[name] = rng.normal(0.0, 0.5, size=shape)
            elif name.startswith("W"):
                fan_in = int(np.prod(shape[1:]))
                params[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
            else:
                params[name] = np.zeros(shape)
        return cls(params, temporal_depth)

    @classmethod
    def zeros(cls, temporal_depth=2):
        params = {n: np.zeros(s) for n, s in _param_shapes(temporal_depth).items()}
        return cls(params, temporal_depth)

    def num_parameters(self):
        return sum(p.size for p in self.params.values())

    def copy(self):
        return BlobNetModel({n: p.copy() for n, p in self.params.items()}, self.temporal_depth)

    def save(self, path):
        header = {
            "format": "blobnet-lite",
            "version": 1,
            "temporal_depth": self.temporal_depth,
            "dtype": "<f8",
            "order": list(PARAM_ORDER),
            "shapes": {n: list(self.params[n].shape) for n in PARAM_ORDER},
        }
        with open(path, "wb") as f:
            f.write(CHECKPOINT_MAGIC)
            f.write(json.dumps(header, sort_keys=True).encode() + b"\n")
            for name in PARAM_ORDER:
                f.write(np.ascontiguousarray(self.params[name], dtype="<f8").tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            magic = f.read(len(CHECKPOINT_MAGIC))
            if magic != CHECKPOINT_MAGIC:
                raise ValueError(f"{path}: not a blobnet checkpoint")
            header = json.loads(f.readline().decode())
            params = {}
            for name in header["order"]:
                shape = tuple(header["shapes"][name])
                n = int(np.prod(shape)) if shape else 1
                buf = f.read(n * 8)
                params[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
        return cls(params, header["temporal_depth"])


# ---------------------------------------------------------------------------
# layers

def _conv3x3(x, w, b):
    f, _, _, _ = w.shape
    _, h, ww = x.shape
    xpad = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    y = np.tile(b[:, None, None], (1, h, ww))
    for di in range(3):
        for dj in range(3):
            y += np.einsum("fc,chw->fhw", w[:, :, di, dj], xpad[:, di : di + h, dj : dj + ww])
    return y


def _conv3x3_back(dy, x, w):
    _, h, ww = x.shape
    xpad = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    dw = np.zeros_like(w)
    dxpad = np.zeros_like(xpad)
    for di in range(3):
        for dj in range(3):
            dw[:, :, di, dj] = np.einsum("fhw,chw->fc", dy, xpad[:, di : di + h, dj : dj + ww])
            dxpad[:, di : di + h, dj : dj + ww] += np.einsum(
                "fc,fhw->chw", w[:, :, di, dj], dy
            )
    db = dy.sum(axis=(1, 2))
    return dxpad[:, 1:-1, 1:-1], dw, db


def _pool2(x):
    c, h, w = x.shape
    h2, w2 = -(-h // 2) * 2, -(-w // 2) * 2
    xp = np.pad(x, ((0, 0), (0, h2 - h), (0, w2 - w)))
    return xp.reshape(c, h2 // 2, 2, w2 // 2, 2).mean(axis=(2, 4))


def _pool2_back(dy, in_h, in_w):
    c = dy.shape[0]
    up = (dy / 4.0).repeat(2, axis=1).repeat(2, axis=2)
    return up[:, :in_h, :in_w]


def _up2(x, out_h, out_w):
    return x.repeat(2, axis=1).repeat(2, axis=2)[:, :out_h, :out_w]


def _up2_back(dy, in_h, in_w):
    c = dy.shape[0]
    pad = np.zeros((c, in_h * 2, in_w * 2))
    pad[:, : dy.shape[1], : dy.shape[2]] = dy
    return pad.reshape(c, in_h, 2, in_w, 2).sum(axis=(2, 4))


def _sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-z)), np.exp(z) / (1.0 + np.exp(z)))


# ---------------------------------------------------------------------------
# forward / backward

def _features_to_planes(x):
    """(T, H, W, 3) feature tensor -> (3T, H, W) channel planes."""
    t, h, w, c = x.shape
    return x.transpose(0, 3, 1, 2).reshape(t * c, h, w)


def _forward_planes(params, x0, cache=None):
    _, h, w = x0.shape
    if h < 4 or w < 4:
        raise ValueError(f"grid {h}x{w} too small; both dims must be >= 4")
    a1 = _conv3x3(x0, params["W1"], params["b1"])
    e1 = np.maximum(a1, 0.0)
    p1 = _pool2(e1)
    a2 = _conv3x3(p1, params["W2"], params["b2"])
    e2 = np.maximum(a2, 0.0)
    p2 = _pool2(e2)
    u2 = _up2(p2, e2.shape[1], e2.shape[2])
    c2 = np.concatenate([u2, e2])
    a3 = _conv3x3(c2, params["W3"], params["b3"])
    e3 = np.maximum(a3, 0.0)
    u1 = _up2(e3, h, w)
    c1 = np.concatenate([u1, e1])
    a4 = _conv3x3(c1, params["W4"], params["b4"])
    e4 = np.maximum(a4, 0.0)
    z = np.einsum("fc,chw->fhw", params["Wh"], e4)[0] + params["bh"][0]
    if cache is not None:
        cache.update(
            x0=x0, a1=a1, e1=e1, p1=p1, a2=a2, e2=e2, p2=p2,
            c2=c2, a3=a3, e3=e3, c1=c1, a4=a4, e4=e4, z=z,
        )
    return z


def _backward_planes(params, cache, dz):
    g = {}
    e4 = cache["e4"]
    g["Wh"] = np.einsum("hw,chw->c", dz, e4)[None, :]
    g["bh"] = np.array([dz.sum()])
    de4 = params["Wh"][0][:, None, None] * dz[None]
    da4 = de4 * (cache["a4"] > 0)
    dc1, g["W4"], g["b4"] = _conv3x3_back(da4, cache["c1"], params["W4"])
    du1, de1 = dc1[:C1], dc1[C1:]
    de3 = _up2_back(du1, cache["e3"].shape[1], cache["e3"].shape[2])
    da3 = de3 * (cache["a3"] > 0)
    dc2, g["W3"], g["b3"] = _conv3x3_back(da3, cache["c2"], params["W3"])
    du2, de2b = dc2[:C2], dc2[C2:]
    dp2 = _up2_back(du2, cache["p2"].shape[1], cache["p2"].shape[2])
    de2 = de2b + _pool2_back(dp2, cache["e2"].shape[1], cache["e2"].shape[2])
    da2 = de2 * (cache["a2"] > 0)
    dp1, g["W2"], g["b2"] = _conv3x3_back(da2, cache["p1"], params["W2"])
    de1 = de1 + _pool2_back(dp1, cache["e1"].shape[1], cache["e1"].shape[2])
    da1 = de1 * (cache["a1"] > 0)
    dx0, g["W1"], g["b1"] = _conv3x3_back(da1, cache["x0"], params["W1"])
    return g, dx0


def blobnet_forward(model, x):
    """Forward pass on a (T, H, W, 3) feature tensor -> (H, W) probabilities."""
    t, h, w, c = x.shape
    if t != model.temporal_depth or c != 3:
        raise ValueError(
            f"feature tensor shape {x.shape} incompatible with depth {model.temporal_depth}"
        )
    z = _forward_planes(model.params, _features_to_planes(np.asarray(x, dtype=np.float64)))
    return _sigmoid(z)


def threshold_mask(probs, theta):
    if not 0.0 < theta < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {theta}")
    return (np.asarray(probs) > theta).astype(np.uint8)


# ---------------------------------------------------------------------------
# training

def loss_and_grads(model, sample):
    """Mean BCE loss and parameter gradients for one (combo, mv_norm, target)
    sample; the embedding table is differentiated jointly."""
    combo, mv_norm, target = sample
    params = model.params
    t, h, w = combo.shape
    x = np.empty((t, h, w, 3))
    x[..., 0] = params["emb"][combo]
    x[..., 1:] = mv_norm
    x0 = _features_to_planes(x)

    cache = {}
    z = _forward_planes(params, x0, cache)
    tgt = np.asarray(target, dtype=np.float64)
    n = z.size
    loss = float(np.mean(np.logaddexp(0.0, z) - tgt * z))
    dz = (_sigmoid(z) - tgt) / n
    grads, dx0 = _backward_planes(params, cache, dz)

    # Embedding planes sit at channel 3t of the stacked input.
    demb = np.zeros(N_COMBOS)
    for ti in range(t):
        demb += np.bincount(
            combo[ti].ravel(), weights=dx0[3 * ti].ravel(), minlength=N_COMBOS
        )
    grads["emb"] = demb
    return loss, grads


def _batch_loss_and_grads(model, batch):
    total = None
    loss = 0.0
    for sample in batch:
        l, g = loss_and_grads(model, sample)
        loss += l
        if total is None:
            total = g
        else:
            for k in total:
                total[k] += g[k]
    k = float(len(batch))
    for name in total:
        total[name] /= k
    return loss / k, total


class AdamState:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {n: np.zeros_like(p) for n, p in params.items()}
        self.v = {n: np.zeros_like(p) for n, p in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for n in params:
            g = grads[n]
            self.m[n] = self.beta1 * self.m[n] + (1.0 - self.beta1) * g
            self.v[n] = self.beta2 * self.v[n] + (1.0 - self.beta2) * g * g
            params[n] -= self.lr * (self.m[n] / b1t) / (np.sqrt(self.v[n] / b2t) + self.eps)


def blobnet_train(model, dataset, cfg: TrainConfig):
    """Mini-batch Adam on mean BCE; trains in place and returns the model."""
    if not dataset:
        raise ValueError("empty training dataset")
    rng = np.random.default_rng([cfg.seed, 0x7124])
    opt = AdamState(model.params, cfg.learning_rate)
    initial_loss = None
    last_loss = None
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(dataset))
        for start in range(0, len(order), cfg.batch_size):
            batch = [dataset[i] for i in order[start : start + cfg.batch_size]]
            loss, grads = _batch_loss_and_grads(model, batch)
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch)
            if initial_loss is None:
                initial_loss = loss
            last_loss = loss
            opt.step(model.params, grads)
    model.initial_loss = initial_loss
    model.final_loss = last_loss
    return model
