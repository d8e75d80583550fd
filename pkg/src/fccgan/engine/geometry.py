"""Spatial geometry of (transposed) convolutions.

Padding may be asymmetric: `pad` pixels on the leading side (top/left) and
`pad_hi` on the trailing side (bottom/right), defaulting to symmetric.
Asymmetric pads are what make size-preserving unit-stride convs with even
kernels possible (out = in requires pad_lo + pad_hi = kernel - 1).
"""

from __future__ import annotations

from dataclasses import dataclass

from .tensor import GeometryError


@dataclass(frozen=True)
class ConvGeometry:
    in_h: int
    in_w: int
    kernel: int
    stride: int
    pad: int = 0
    pad_hi: int | None = None     # trailing-side pad; None -> same as pad
    output_pad: int = 0           # transposed conv only

    @property
    def pad_lo(self):
        return self.pad

    @property
    def pad_trail(self):
        return self.pad if self.pad_hi is None else self.pad_hi

    def _validate_common(self):
        if self.kernel < 1 or self.stride < 1:
            raise GeometryError(f"kernel and stride must be positive, got k={self.kernel} s={self.stride}")
        if self.pad < 0 or self.pad_trail < 0:
            raise GeometryError(f"negative padding: ({self.pad}, {self.pad_trail})")
        if self.in_h < 1 or self.in_w < 1:
            raise GeometryError(f"non-positive input size {self.in_h}x{self.in_w}")

    def out_size_forward(self):
        """(H', W') of a forward conv; out = floor((in + pads - k)/s) + 1."""
        self._validate_common()
        p = self.pad + self.pad_trail
        oh = (self.in_h + p - self.kernel) // self.stride + 1
        ow = (self.in_w + p - self.kernel) // self.stride + 1
        if oh < 1 or ow < 1:
            raise GeometryError(
                f"conv output {oh}x{ow} < 1 for input {self.in_h}x{self.in_w}, "
                f"kernel {self.kernel}, stride {self.stride}, pads ({self.pad},{self.pad_trail})"
            )
        return oh, ow

    def out_size_transposed(self):
        """(H', W') of a transposed conv; out = (in-1)*s - pads + k + output_pad."""
        self._validate_common()
        if not 0 <= self.output_pad < self.stride:
            raise GeometryError(f"output_pad must satisfy 0 <= op < stride, got op={self.output_pad} s={self.stride}")
        p = self.pad + self.pad_trail
        oh = (self.in_h - 1) * self.stride - p + self.kernel + self.output_pad
        ow = (self.in_w - 1) * self.stride - p + self.kernel + self.output_pad
        if oh < 1 or ow < 1:
            raise GeometryError(
                f"transposed conv output {oh}x{ow} < 1 for input {self.in_h}x{self.in_w}, "
                f"kernel {self.kernel}, stride {self.stride}, pads ({self.pad},{self.pad_trail})"
            )
        return oh, ow
