"""Deterministic procedurally-rendered digit corpus.

A labeled stand-in for offline machines: glyphs from the ~20 text fonts
bundled with matplotlib, jittered in size/rotation/position per sample.
Grayscale renders mimic the 28x28 white-on-black handwritten-digit layout;
the RGB variant colorizes digits over dark backgrounds for 32x32 runs.
Fully determined by (n, seed, size, channels).
"""

from __future__ import annotations

import os
from functools import lru_cache

import numpy as np

from .data import Dataset
from .engine import Tensor

_FONT_NAMES = [
    "DejaVuSans.ttf", "DejaVuSans-Bold.ttf", "DejaVuSans-Oblique.ttf",
    "DejaVuSans-BoldOblique.ttf", "DejaVuSansMono.ttf", "DejaVuSansMono-Bold.ttf",
    "DejaVuSansMono-Oblique.ttf", "DejaVuSerif.ttf", "DejaVuSerif-Bold.ttf",
    "DejaVuSerif-Italic.ttf", "DejaVuSerif-BoldItalic.ttf",
    "STIXGeneral.ttf", "STIXGeneralBol.ttf", "STIXGeneralItalic.ttf",
    "cmb10.ttf", "cmr10.ttf", "cmss10.ttf", "cmtt10.ttf",
]


def _font_dir():
    import matplotlib
    return os.path.join(os.path.dirname(matplotlib.__file__), "mpl-data", "fonts", "ttf")


@lru_cache(maxsize=None)
def _font(name, size):
    from PIL import ImageFont
    return ImageFont.truetype(os.path.join(_font_dir(), name), size)


def _render_glyph(digit, font_name, font_size, angle, dx, dy, canvas):
    from PIL import Image, ImageDraw
    img = Image.new("L", (canvas, canvas), 0)
    draw = ImageDraw.Draw(img)
    f = _font(font_name, font_size)
    x0, y0, x1, y1 = draw.textbbox((0, 0), str(digit), font=f)
    cx = (canvas - (x1 - x0)) / 2 - x0 + dx
    cy = (canvas - (y1 - y0)) / 2 - y0 + dy
    draw.text((cx, cy), str(digit), fill=255, font=f)
    if angle:
        img = img.rotate(angle, resample=Image.BILINEAR, fillcolor=0)
    return np.asarray(img, dtype=np.uint8)


def render_digits(n, seed, size=28, channels=1, name=None, split="train"):
    """Render n labeled digit images as a Dataset (uint8, [n,C,size,size])."""
    if channels not in (1, 3):
        raise ValueError(f"channels must be 1 or 3, got {channels}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), size, channels, 0xD161]))
    images = np.zeros((n, channels, size, size), dtype=np.uint8)
    labels = rng.integers(0, 10, size=n).astype(np.uint8)
    fonts = rng.integers(0, len(_FONT_NAMES), size=n)
    sizes = rng.integers(int(size * 0.60), int(size * 0.95) + 1, size=n)
    angles = rng.uniform(-20.0, 20.0, size=n)
    offs = rng.integers(-2, 3, size=(n, 2))
    if channels == 3:
        fg = rng.integers(120, 256, size=(n, 3))
        bg = rng.integers(0, 70, size=(n, 3))
    for i in range(n):
        gray = _render_glyph(int(labels[i]), _FONT_NAMES[fonts[i]], int(sizes[i]),
                             float(angles[i]), int(offs[i, 0]), int(offs[i, 1]), size)
        if channels == 1:
            images[i, 0] = gray
        else:
            a = gray.astype(np.float32) / 255.0
            for ch in range(3):
                images[i, ch] = np.round(bg[i, ch] * (1 - a) + fg[i, ch] * a).astype(np.uint8)
    ds_name = name or ("synth_mnist" if (size, channels) == (28, 1) else
                       "synth_cifar10" if (size, channels) == (32, 3) else f"synth_{size}x{channels}")
    return Dataset(Tensor(images), Tensor(labels), ds_name, split)
