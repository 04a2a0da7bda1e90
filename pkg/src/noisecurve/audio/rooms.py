"""Random room geometry and image-source room impulse responses.

Rooms are rectangular boxes with a single source and microphone.  Impulse
responses come from the image-source construction: mirror images of the
source across the walls contribute delayed, attenuated impulses; the wall
reflection coefficient is derived from the requested reverberation time with
the Eyring absorption relation, which stays feasible for every box/rt60
combination (the uncorrected Sabine form needs absorption > 1 for small rt60
in large rooms and decays measurably too fast at high absorption).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_SAMPLE_RATE = 24000
DEFAULT_SOUND_SPEED = 340.0

# room sampling bounds
_FLOOR_RANGE = (2.0, 10.0)
_ROOM_HEIGHT = 3.0
_WALL_MARGIN = 0.5
_RT60_RANGE = (0.15, 1.0)
_MIC_DISTANCES = (2.0, 1.0)
_MIC_ATTEMPTS = 64

# RIR length in seconds is this multiple of rt60
_TAIL_FACTOR = 1.2


@dataclass(frozen=True)
class RoomSpec:
    width: float
    length: float
    height: float
    source: tuple[float, float, float]
    mic: tuple[float, float, float]
    rt60: float
    sample_rate: int = DEFAULT_SAMPLE_RATE
    sound_speed: float = DEFAULT_SOUND_SPEED

    def __post_init__(self) -> None:
        if min(self.width, self.length, self.height) <= 0:
            raise ValueError("room dimensions must be positive")
        if self.rt60 <= 0:
            raise ValueError("rt60 must be positive")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        dims = (self.width, self.length, self.height)
        for name, point in (("source", self.source), ("mic", self.mic)):
            for axis, (coord, limit) in enumerate(zip(point, dims)):
                if not (0.0 < coord < limit):
                    raise ValueError(
                        f"{name} must lie strictly inside the room "
                        f"(axis {axis}: {coord} not in (0, {limit}))"
                    )


def place_microphone(
    rng: np.random.Generator,
    width: float,
    length: float,
    height: float,
    source: tuple[float, float, float],
) -> tuple[float, float, float]:
    """Place the mic at 2 m from the source if the room admits it, else 1 m,
    else on the source itself.  Placement tries random azimuths at source
    height; a distance is abandoned after a fixed number of attempts.
    """
    sx, sy, sz = source
    for distance in _MIC_DISTANCES:
        for _ in range(_MIC_ATTEMPTS):
            azimuth = rng.uniform(0.0, 2.0 * math.pi)
            mx = sx + distance * math.cos(azimuth)
            my = sy + distance * math.sin(azimuth)
            if 0.0 < mx < width and 0.0 < my < length:
                return (mx, my, sz)
    return (sx, sy, sz)


def sample_room(seed: int, sample_rate: int = DEFAULT_SAMPLE_RATE) -> RoomSpec:
    """Draw a random room: floor 2-10 m per side, 3 m high, source at least
    0.5 m from the walls, mic per place_microphone, rt60 uniform in
    [0.15, 1.0] s.  Identical seeds give identical specs.
    """
    rng = np.random.default_rng(seed)
    width = rng.uniform(*_FLOOR_RANGE)
    length = rng.uniform(*_FLOOR_RANGE)
    height = _ROOM_HEIGHT
    sx = rng.uniform(_WALL_MARGIN, width - _WALL_MARGIN)
    sy = rng.uniform(_WALL_MARGIN, length - _WALL_MARGIN)
    sz = rng.uniform(0.0, height)
    while sz <= 0.0:  # RoomSpec rejects on-boundary positions
        sz = rng.uniform(0.0, height)
    source = (sx, sy, sz)
    mic = place_microphone(rng, width, length, height, source)
    rt60 = rng.uniform(*_RT60_RANGE)
    return RoomSpec(
        width=width,
        length=length,
        height=height,
        source=source,
        mic=mic,
        rt60=rt60,
        sample_rate=sample_rate,
    )


def rir_length(room: RoomSpec) -> int:
    return math.ceil(_TAIL_FACTOR * room.rt60 * room.sample_rate)


def _reflection_coefficient(room: RoomSpec) -> float:
    volume = room.width * room.length * room.height
    surface = 2.0 * (
        room.width * room.length + room.width * room.height + room.length * room.height
    )
    sabine_exponent = 24.0 * volume * math.log(10.0) / (
        room.sound_speed * surface * room.rt60
    )
    # Eyring: absorption = 1 - exp(-sabine_exponent); beta = sqrt(1 - absorption)
    return math.exp(-0.5 * sabine_exponent)


def generate_rir(
    room: RoomSpec,
    n_samples: int | None = None,
    max_order: int | None = None,
) -> np.ndarray:
    """Image-source room impulse response.

    The response spans 1.2x the requested rt60 unless n_samples overrides it.
    Impulses land on the nearest sample; the direct path therefore peaks at
    round(distance / sound_speed * sample_rate), within one sample.  max_order
    limits the number of wall reflections per image (0 keeps only the direct
    path); by default every image whose delay fits the response contributes.

    A degenerate room with mic on the source returns a unit impulse at lag 0.
    """
    fs = room.sample_rate
    c = room.sound_speed
    n = rir_length(room) if n_samples is None else int(n_samples)
    if n <= 0:
        raise ValueError("n_samples must be positive")

    src = np.asarray(room.source, dtype=float)
    mic = np.asarray(room.mic, dtype=float)
    direct = float(np.linalg.norm(src - mic))
    if direct == 0.0:
        h = np.zeros(n)
        h[0] = 1.0
        return h

    beta = _reflection_coefficient(room)
    dims = (room.width, room.length, room.height)
    radius = n * c / fs  # images beyond this distance arrive after the window
    counts = [math.ceil(radius / (2.0 * d)) for d in dims]
    ny, nz = counts[1], counts[2]

    my = np.arange(-ny, ny + 1)
    mz = np.arange(-nz, nz + 1)
    my_grid, mz_grid = np.meshgrid(my, mz, indexing="ij")
    my_flat = my_grid.ravel().astype(float)
    mz_flat = mz_grid.ravel().astype(float)

    h = np.zeros(n)
    for mx in range(-counts[0], counts[0] + 1):
        for q in (0, 1):
            ix = (1 - 2 * q) * src[0] + 2.0 * mx * dims[0]
            dx2 = (ix - mic[0]) ** 2
            order_x = abs(mx - q) + abs(mx)
            for jy in (0, 1):
                iy = (1 - 2 * jy) * src[1] + 2.0 * my_flat * dims[1]
                dy2 = (iy - mic[1]) ** 2
                order_y = np.abs(my_flat - jy) + np.abs(my_flat)
                for kz in (0, 1):
                    iz = (1 - 2 * kz) * src[2] + 2.0 * mz_flat * dims[2]
                    dz2 = (iz - mic[2]) ** 2
                    order = order_x + order_y + np.abs(mz_flat - kz) + np.abs(mz_flat)
                    dist = np.sqrt(dx2 + dy2 + dz2)
                    lag = np.rint(dist / c * fs).astype(np.int64)
                    keep = lag < n
                    if max_order is not None:
                        keep &= order <= max_order
                    if not keep.any():
                        continue
                    amp = beta ** order[keep] / (4.0 * math.pi * dist[keep])
                    np.add.at(h, lag[keep], amp)
    return h
