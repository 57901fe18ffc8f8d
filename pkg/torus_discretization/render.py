"""
Binary PGM ("P5") and PPM ("P6") output for density images.

Log10 values are clamped to [RENDER_LOG_MIN, RENDER_LOG_MAX] and mapped linearly onto
0..255. The image is drawn with the second coordinate increasing upwards.
"""

import logging

import numpy as np

from torus_discretization.settings import RENDER_LOG_MAX, RENDER_LOG_MIN


def _levels(img):
    """
    Maps an image to levels in [0, 1], one row per image line, top line first.
    """
    clamped = np.clip(img.values, RENDER_LOG_MIN, RENDER_LOG_MAX)
    levels = (clamped - RENDER_LOG_MIN) / (RENDER_LOG_MAX - RENDER_LOG_MIN)
    return levels.T[::-1]


def _to_bytes(levels):
    # Round half up, so 135.5 becomes 136
    return np.floor(255.0 * levels + 0.5).astype(np.uint8)


def grey_levels(img):
    return _to_bytes(_levels(img))


def colour_levels(img):
    """
    Blue -> green -> red ramp: blue marks light pixels and red heavy ones.

    Returns:
        numpy.ndarray: px x px x 3 array of bytes.
    """
    t = _levels(img)
    low = np.clip(2.0 * t, 0.0, 1.0)
    high = np.clip(2.0 * t - 1.0, 0.0, 1.0)
    red = high
    green = np.where(t < 0.5, low, 1.0 - high)
    blue = 1.0 - low
    return _to_bytes(np.stack([red, green, blue], axis=-1))


def _write(path, magic, width, height, payload):
    header = "{}\n{} {}\n255\n".format(magic, width, height).encode("ascii")
    try:
        with open(path, "wb") as f:
            f.write(header)
            f.write(payload)
    except OSError:
        logging.exception("Unable to write image {}".format(path))
        raise
    return len(header) + len(payload)


def render_density_pgm(img, path):
    """
    Writes a density image as a binary greyscale PGM.

    Args:
        img (DensityImage): the image.
        path: the output file.
    Returns:
        int: number of bytes written.
    """
    return _write(path, "P5", img.px, img.px, grey_levels(img).tobytes())


def render_density_ppm(img, path):
    """
    Writes a density image as a binary colour PPM using the blue -> green -> red ramp.

    Returns:
        int: number of bytes written.
    """
    return _write(path, "P6", img.px, img.px, colour_levels(img).tobytes())
