import os

import numpy as np

from utils.exceptions import ConfigError

THREADS_ENV = "SSFUSE_THREADS"


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        count = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if count < 0:
        raise ConfigError(f"{THREADS_ENV} must be >= 0, got {count}")
    return count or os.cpu_count() or 1


def make_rng(seed) -> np.random.Generator:
    return np.random.default_rng(int(seed))


def gaussian_blobs(rng, H, W, centers, sigmas, amplitudes) -> np.ndarray:
    rows = np.arange(H)[:, None]
    cols = np.arange(W)[None, :]
    out = np.zeros((H, W))
    for (r, c), s, a in zip(centers, sigmas, amplitudes):
        out += a * np.exp(-((rows - r) ** 2 + (cols - c) ** 2) / (2.0 * s * s))
    return out


def synthetic_pair(d, H, W, seed, blobs=3, noise=0.05):
    """Visible/thermal maps sharing blob positions with modality-specific amplitude.

    Each modality also gets one private blob and independent noise.
    """
    rng = make_rng(seed)
    maps = {"v": np.empty((d, H, W)), "t": np.empty((d, H, W))}
    for channel in range(d):
        centers = np.column_stack([rng.uniform(0, H, blobs), rng.uniform(0, W, blobs)])
        sigmas = rng.uniform(0.5, 0.25 * max(H, W) + 0.5, blobs)
        for key in ("v", "t"):
            amplitudes = rng.uniform(0.5, 1.5, blobs)
            private = (rng.uniform(0, H), rng.uniform(0, W))
            plane = gaussian_blobs(rng, H, W, centers, sigmas, amplitudes)
            plane += gaussian_blobs(rng, H, W, [private], [rng.uniform(0.5, 2.0)], [1.0])
            maps[key][channel] = plane + noise * rng.standard_normal((H, W))
    return maps["v"], maps["t"]
