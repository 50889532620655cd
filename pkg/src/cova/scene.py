"""Synthetic world: labeled moving/static objects, grayscale rendering, and a
block-based encoder emulator that emits per-macroblock metadata."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .metadata import FrameMeta, MetadataStream, StreamHeader, MB_I, MB_P

MB_SIZE = 16

# Background stays inside [BG_LO, BG_HI]; object intensities are drawn from
# bands at least 30 gray levels outside that range.
BG_BASE = 90
BG_SPAN = 20
DARK_BAND = (10, 40)
BRIGHT_BAND = (160, 230)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SceneConfig:
    width_px: int = 320
    height_px: int = 192
    num_frames: int = 500
    gop_length: int = 50
    object_spawn_rate: float = 0.01
    label_set: tuple = ("car", "bus", "person")
    static_object_count: int = 0
    mv_noise_sigma: float = 0.0
    texture_noise_rate: float = 0.0
    seed: int = 0
    min_object_life: int = 10

    def validate(self):
        if self.width_px % MB_SIZE or self.height_px % MB_SIZE:
            raise ConfigError(
                f"frame dimensions must be multiples of {MB_SIZE}: "
                f"{self.width_px}x{self.height_px}"
            )
        if self.width_px <= 0 or self.height_px <= 0:
            raise ConfigError("frame dimensions must be positive")
        if self.gop_length < 2:
            raise ConfigError("gop_length must be >= 2")
        if self.mv_noise_sigma < 0:
            raise ConfigError("mv_noise_sigma must be >= 0")
        if not 0.0 <= self.texture_noise_rate < 1.0:
            raise ConfigError("texture_noise_rate must be in [0, 1)")
        if self.object_spawn_rate < 0:
            raise ConfigError("object_spawn_rate must be >= 0")


@dataclass
class GroundTruthObject:
    object_id: int
    label: str
    x0: int
    y0: int
    w: int
    h: int
    vx: int
    vy: int
    first_frame: int
    last_frame: int
    is_static: bool
    shape: str = "rect"  # "rect" | "ellipse"
    intensity: int = 200

    def bbox_at(self, t):
        """Pixel bbox (x, y, w, h) at frame t; t must lie in the live range."""
        dt = t - self.first_frame
        return (self.x0 + self.vx * dt, self.y0 + self.vy * dt, self.w, self.h)

    def alive_at(self, t):
        return self.first_frame <= t <= self.last_frame

    def displacement_at(self, t):
        """Pixel displacement from frame t-1 to t; a mover entering the frame
        carries its velocity from its first frame."""
        if self.is_static:
            return (0, 0)
        return (self.vx, self.vy)


@dataclass
class Scene:
    config: SceneConfig
    objects: list
    background: np.ndarray = field(repr=False)

    def objects_at(self, t):
        return [o for o in self.objects if o.alive_at(t)]

    def moving_objects_at(self, t):
        return [o for o in self.objects if o.alive_at(t) and not o.is_static]

    def object_mask(self, t):
        """Boolean pixel mask of all moving objects live at frame t."""
        mask = np.zeros(self.background.shape, dtype=bool)
        for obj in self.moving_objects_at(t):
            _paint(mask, obj.bbox_at(t), obj.shape, True)
        return mask

    def to_json(self):
        return json.dumps(
            {
                "config": asdict(self.config),
                "objects": [asdict(o) for o in self.objects],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        cfg_doc = doc["config"]
        cfg_doc["label_set"] = tuple(cfg_doc["label_set"])
        config = SceneConfig(**cfg_doc)
        objects = [GroundTruthObject(**o) for o in doc["objects"]]
        return cls(config=config, objects=objects, background=_make_background(config))

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_json(f.read())


def _make_background(config):
    rng = np.random.default_rng([config.seed, 0xB6])
    noise = rng.integers(-BG_SPAN, BG_SPAN + 1, size=(config.height_px, config.width_px))
    return (BG_BASE + noise).astype(np.uint8)


def _paint(img, bbox, shape, value):
    x, y, w, h = bbox
    if shape == "ellipse":
        yy, xx = np.mgrid[y : y + h, x : x + w]
        cx, cy = x + w / 2.0, y + h / 2.0
        inside = ((xx + 0.5 - cx) / (w / 2.0)) ** 2 + ((yy + 0.5 - cy) / (h / 2.0)) ** 2 <= 1.0
        img[y : y + h, x : x + w][inside] = value
    else:
        img[y : y + h, x : x + w] = value


def _spawn_moving(rng, config, object_id, t):
    """Sample a moving object born at frame t whose whole trajectory stays in frame."""
    w = int(rng.integers(32, 65))
    h = int(rng.integers(32, 65))
    vx, vy = 0, 0
    while vx == 0 and vy == 0:
        vx = int(rng.integers(-4, 5))
        vy = int(rng.integers(-2, 3))
    x0 = int(rng.integers(0, config.width_px - w + 1))
    y0 = int(rng.integers(0, config.height_px - h + 1))

    # Frames until the box would leave the frame on either axis.
    life = config.num_frames - t
    if vx > 0:
        life = min(life, (config.width_px - w - x0) // vx + 1)
    elif vx < 0:
        life = min(life, x0 // (-vx) + 1)
    if vy > 0:
        life = min(life, (config.height_px - h - y0) // vy + 1)
    elif vy < 0:
        life = min(life, y0 // (-vy) + 1)
    if life < config.min_object_life:
        return None

    label = str(rng.choice(config.label_set))
    shape = "ellipse" if rng.random() < 0.3 else "rect"
    band = DARK_BAND if rng.random() < 0.5 else BRIGHT_BAND
    intensity = int(rng.integers(band[0], band[1] + 1))
    return GroundTruthObject(
        object_id=object_id,
        label=label,
        x0=x0,
        y0=y0,
        w=w,
        h=h,
        vx=vx,
        vy=vy,
        first_frame=t,
        last_frame=t + life - 1,
        is_static=False,
        shape=shape,
        intensity=intensity,
    )


def generate_scene(config: SceneConfig) -> Scene:
    config.validate()
    rng = np.random.default_rng([config.seed, 0x5C])
    objects = []
    next_id = 0

    for _ in range(config.static_object_count):
        w = int(rng.integers(24, 49))
        h = int(rng.integers(24, 49))
        x0 = int(rng.integers(0, config.width_px - w + 1))
        y0 = int(rng.integers(0, config.height_px - h + 1))
        band = DARK_BAND if rng.random() < 0.5 else BRIGHT_BAND
        objects.append(
            GroundTruthObject(
                object_id=next_id,
                label=str(rng.choice(config.label_set)),
                x0=x0,
                y0=y0,
                w=w,
                h=h,
                vx=0,
                vy=0,
                first_frame=0,
                last_frame=config.num_frames - 1,
                is_static=True,
                shape="rect",
                intensity=int(rng.integers(band[0], band[1] + 1)),
            )
        )
        next_id += 1

    for t in range(config.num_frames):
        if rng.random() < config.object_spawn_rate:
            obj = _spawn_moving(rng, config, next_id, t)
            if obj is not None:
                objects.append(obj)
                next_id += 1

    return Scene(config=config, objects=objects, background=_make_background(config))


def render_frame(scene: Scene, t: int) -> np.ndarray:
    config = scene.config
    if not 0 <= t < config.num_frames:
        raise IndexError(f"frame {t} out of range [0, {config.num_frames})")
    frame = scene.background.copy()
    for obj in scene.objects_at(t):
        _paint(frame, obj.bbox_at(t), obj.shape, obj.intensity)
    return frame


def write_pgm(frame, path):
    with open(path, "wb") as f:
        h, w = frame.shape
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(frame.astype(np.uint8).tobytes())


def _mb_range(lo, hi):
    """Macroblock index range [a, b) covering the pixel interval [lo, hi)."""
    return lo // MB_SIZE, (hi + MB_SIZE - 1) // MB_SIZE


def encode_metadata(scene: Scene) -> MetadataStream:
    """Emulate what partial decoding of a block-coded bitstream would recover."""
    config = scene.config
    mb_h = config.height_px // MB_SIZE
    mb_w = config.width_px // MB_SIZE
    header = StreamHeader(
        width_px=config.width_px,
        height_px=config.height_px,
        gop_length=config.gop_length,
        codec="synthetic-h264-meta",
    )
    frames = []
    for t in range(config.num_frames):
        rng = np.random.default_rng([config.seed, 0xE7C, t])
        if t % config.gop_length == 0:
            frames.append(
                FrameMeta(
                    frame_index=t,
                    frame_type="I",
                    gop_index=t // config.gop_length,
                    mb_type=np.full((mb_h, mb_w), MB_I, dtype=np.uint8),
                    partition=np.zeros((mb_h, mb_w), dtype=np.uint8),
                    mv=np.zeros((mb_h, mb_w, 2), dtype=np.int16),
                )
            )
            continue

        mb_type = np.full((mb_h, mb_w), MB_P, dtype=np.uint8)
        partition = np.zeros((mb_h, mb_w), dtype=np.uint8)
        mv = np.zeros((mb_h, mb_w, 2), dtype=np.float64)
        moving = np.zeros((mb_h, mb_w), dtype=bool)

        for obj in scene.moving_objects_at(t):
            x, y, w, h = obj.bbox_at(t)
            dx, dy = obj.displacement_at(t)
            ax, bx = _mb_range(x, x + w)
            ay, by = _mb_range(y, y + h)
            # MV points at the reference block in the previous frame.
            mv[ay:by, ax:bx, 0] = -dx * 4
            mv[ay:by, ax:bx, 1] = -dy * 4
            moving[ay:by, ax:bx] = True

        n_moving = int(moving.sum())
        if n_moving:
            if config.mv_noise_sigma > 0:
                mv[moving] += rng.normal(0.0, config.mv_noise_sigma, size=(n_moving, 2))
            # Finer partitioning (modes 3-5) for half the object blocks.
            fine = rng.random(n_moving) < 0.5
            modes = np.where(fine, rng.integers(3, 6, size=n_moving), rng.integers(0, 3, size=n_moving))
            partition[moving] = modes
        bg = ~moving
        n_bg = int(bg.sum())
        if n_bg:
            partition[bg] = rng.integers(0, 3, size=n_bg)
            if config.texture_noise_rate > 0:
                spur = rng.random(n_bg) < config.texture_noise_rate
                noise_mv = rng.integers(-4, 5, size=(n_bg, 2))
                # Spurious texture MVs are small but nonzero.
                zero = (noise_mv == 0).all(axis=1)
                noise_mv[zero, 0] = 1
                bg_mv = np.zeros((n_bg, 2))
                bg_mv[spur] = noise_mv[spur]
                mv[bg] = bg_mv

        frames.append(
            FrameMeta(
                frame_index=t,
                frame_type="P",
                gop_index=t // config.gop_length,
                mb_type=mb_type,
                partition=partition,
                mv=np.rint(mv).astype(np.int16),
            )
        )
    return MetadataStream(header=header, frames=frames)
