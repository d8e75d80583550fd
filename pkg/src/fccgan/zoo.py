"""Declarative builders for every generator/discriminator in the zoo.

Layer vocabulary: CONV(f,k,s), CONVT(f,k,s), FC(n), BN, R(dims), FLATTEN,
POOL(p), ACT(kind). Three variants per dataset: "cnn" (all-convolutional),
"fccgan_s" (deep FC stacks + strided-conv downsampling) and "fccgan_p"
(same, but each stride-2 conv becomes a unit-stride conv followed by 2x2
average pooling). All shapes are validated at build time against the
declared outputs; internal layout is NCHW, display is HxWxC.

Paddings are chosen here (they are part of the architecture): stride-2
convs use pad 1 except the MNIST 7->3 stage (pad 0); MNIST generator
transposed convs use (pad, output_pad) = (0,0),(1,1),(1,1) for 3->7->14->28.
The pooling substitution keeps per-stage sizes identical to the strided
variant via asymmetric "same"-style pads (lo+hi = 2*out - 1 - in + k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import ConvGeometry, GeometryError, Tensor

DATASETS = ("mnist", "cifar10", "svhn", "celeba")
VARIANTS = ("cnn", "fccgan_s", "fccgan_p")
OBJECTIVES = ("standard", "wgan")

DATASET_SHAPES = {
    "mnist": (1, 28, 28),
    "cifar10": (3, 32, 32),
    "svhn": (3, 32, 32),
    "celeba": (3, 64, 64),
}


class BuildError(ValueError):
    pass


# ---------------------------------------------------------------------------
# layer and model specs

@dataclass(frozen=True)
class LayerSpec:
    kind: str                      # conv|convt|fc|bn|reshape|flatten|pool|act
    filters: int = 0
    kernel: int = 0
    stride: int = 0
    pad: int = 0
    pad_hi: int | None = None
    out_pad: int = 0
    nodes: int = 0
    dims: tuple = ()               # reshape target, CHW
    pool: int = 0
    act: str = ""
    slope: float = 0.0

    def notation(self):
        if self.kind == "conv":
            return f"CONV({self.filters},{self.kernel},{self.stride},{_pad_str(self)})"
        if self.kind == "convt":
            return f"CONVT({self.filters},{self.kernel},{self.stride},{_pad_str(self)},op={self.out_pad})"
        if self.kind == "fc":
            return f"FC({self.nodes})"
        if self.kind == "bn":
            return "BN"
        if self.kind == "reshape":
            return f"R{_disp_shape(self.dims)}"
        if self.kind == "flatten":
            return "FLATTEN"
        if self.kind == "pool":
            return f"POOL({self.pool})"
        if self.kind == "act":
            if self.act == "leaky_relu":
                return f"LRELU({self.slope:g})"
            return self.act.upper()
        raise BuildError(f"unknown layer kind {self.kind!r}")


def _pad_str(l):
    if l.pad_hi is None or l.pad_hi == l.pad:
        return f"p={l.pad}"
    return f"p={l.pad}:{l.pad_hi}"


def _disp_shape(shape):
    """CHW -> printed HxWxC tuple; vectors print as a bare width."""
    if len(shape) == 1:
        return f"{shape[0]}"
    if len(shape) == 3:
        c, h, w = shape
        return f"({h}, {w}, {c})"
    return str(tuple(shape))


def conv(f, k, s, p, p_hi=None):
    return LayerSpec("conv", filters=f, kernel=k, stride=s, pad=p, pad_hi=p_hi)


def convt(f, k, s, p, op=0):
    return LayerSpec("convt", filters=f, kernel=k, stride=s, pad=p, out_pad=op)


def fc(n):
    return LayerSpec("fc", nodes=n)


def bn():
    return LayerSpec("bn")


def reshape_to(dims):
    return LayerSpec("reshape", dims=tuple(dims))


def flatten():
    return LayerSpec("flatten")


def pool(p):
    return LayerSpec("pool", pool=p)


def act(kind, slope=0.0):
    return LayerSpec("act", act=kind, slope=slope)


RELU = act("relu")
LRELU = act("leaky_relu", 0.2)
TANH = act("tanh")
SIGMOID = act("sigmoid")


@dataclass(frozen=True)
class ModelSpec:
    name: str
    input_shape: tuple            # per-sample: (D,) for noise, (C,H,W) for images
    layers: tuple
    output_shape: tuple

    def propagate(self):
        """Per-layer output shapes; raises BuildError naming the bad layer."""
        shapes = []
        cur = tuple(self.input_shape)
        for i, l in enumerate(self.layers):
            try:
                cur = _apply_shape(cur, l)
            except (GeometryError, BuildError) as e:
                raise BuildError(f"{self.name}: layer {i} {l.notation()}: {e}") from e
            shapes.append(cur)
        return shapes

    def validate(self):
        shapes = self.propagate()
        final = shapes[-1] if shapes else tuple(self.input_shape)
        if final != tuple(self.output_shape):
            raise BuildError(f"{self.name}: propagated output {final} != declared {self.output_shape}")
        return shapes


def _apply_shape(cur, l):
    if l.kind in ("conv", "convt"):
        if len(cur) != 3:
            raise BuildError(f"needs a C,H,W input, got {cur}")
        c, h, w = cur
        g = ConvGeometry(h, w, l.kernel, l.stride, l.pad, l.pad_hi, l.out_pad)
        oh, ow = g.out_size_forward() if l.kind == "conv" else g.out_size_transposed()
        return (l.filters, oh, ow)
    if l.kind == "fc":
        if len(cur) != 1:
            raise BuildError(f"needs a flat input, got {cur}")
        if l.nodes < 1:
            raise BuildError("node count must be positive")
        return (l.nodes,)
    if l.kind == "bn":
        if len(cur) not in (1, 3):
            raise BuildError(f"needs a flat or C,H,W input, got {cur}")
        return cur
    if l.kind == "reshape":
        if math.prod(cur) != math.prod(l.dims):
            raise BuildError(f"reshape {cur} -> {l.dims} changes element count")
        return tuple(l.dims)
    if l.kind == "flatten":
        return (math.prod(cur),)
    if l.kind == "pool":
        if len(cur) != 3:
            raise BuildError(f"needs a C,H,W input, got {cur}")
        c, h, w = cur
        if h % l.pool or w % l.pool:
            raise GeometryError(f"spatial {h}x{w} not divisible by pool {l.pool}")
        return (c, h // l.pool, w // l.pool)
    if l.kind == "act":
        return cur
    raise BuildError(f"unknown layer kind {l.kind!r}")


# ---------------------------------------------------------------------------
# architecture configuration

@dataclass(frozen=True)
class ArchitectureConfig:
    dataset: str = "mnist"
    variant: str = "fccgan_p"
    objective: str = "standard"
    fc_layers_g: int = 3
    fc_layers_d: int = 3
    conv_depth_g: int = 4
    conv_depth_d: int = 4
    bn_generator: bool = True
    bn_discriminator: bool = True
    noise_dim: int = 100
    variant_g: str = ""            # per-network override; empty -> variant
    variant_d: str = ""

    def validate(self):
        if self.dataset not in DATASETS:
            raise BuildError(f"unknown dataset {self.dataset!r}; choose from {DATASETS}")
        for v in (self.variant, self.variant_g, self.variant_d):
            if v and v not in VARIANTS:
                raise BuildError(f"unknown variant {v!r}; choose from {VARIANTS}")
        if self.objective not in OBJECTIVES:
            raise BuildError(f"unknown objective {self.objective!r}; choose from {OBJECTIVES}")
        for name, v in (("fc_layers_g", self.fc_layers_g), ("fc_layers_d", self.fc_layers_d)):
            if not 1 <= v <= 5:
                raise BuildError(f"{name}={v} outside the supported range 1..5")
        for name, v in (("conv_depth_g", self.conv_depth_g), ("conv_depth_d", self.conv_depth_d)):
            if v not in (4, 7):
                raise BuildError(f"{name}={v}; supported depths are 4 and 7")
            if v == 7 and self.dataset not in ("cifar10", "svhn"):
                raise BuildError(f"conv depth 7 is only defined for 32x32 datasets, not {self.dataset!r}")
        if self.noise_dim < 1:
            raise BuildError("noise_dim must be positive")
        return self

    @property
    def gen_variant(self):
        return self.variant_g or self.variant

    @property
    def disc_variant(self):
        return self.variant_d or self.variant

    @property
    def image_shape(self):
        return DATASET_SHAPES[self.dataset]


# per-dataset conv-stack recipes (kernel, channels, pads, reshape target)
_FAMILY = {
    "cifar10": dict(kernel=4, disc_channels=(64, 128, 256), disc_pads=(1, 1, 1),
                    gen_stack=((128, 1, 0), (64, 1, 0)), reshape=(256, 4, 4),
                    cnn_head=(256, 1, 0), flat=4096),
    "mnist": dict(kernel=3, disc_channels=(32, 64, 128), disc_pads=(1, 1, 0),
                  gen_stack=((64, 0, 0), (32, 1, 1)), reshape=(128, 3, 3),
                  cnn_head=(128, 1, 0), flat=1152),
    "celeba": dict(kernel=4, disc_channels=(64, 128, 256, 512), disc_pads=(1, 1, 1, 1),
                   gen_stack=((256, 1, 0), (128, 1, 0), (64, 1, 0)), reshape=(512, 4, 4),
                   cnn_head=(512, 1, 0), flat=8192),
}
_FAMILY["svhn"] = _FAMILY["cifar10"]

# generator output layers: (kernel, pad, out_pad) per dataset family
_GEN_OUT = {"cifar10": (4, 1, 0), "svhn": (4, 1, 0), "mnist": (3, 1, 1), "celeba": (4, 1, 0)}


def generator_fc_nodes(depth, flat):
    """FC widths from 64 up to the flatten size; powers of two in between."""
    if depth == 1:
        return [flat]
    if depth == 3:
        return [64, 512, flat]
    lo, hi = math.log2(64), math.log2(flat)
    inner = [int(2 ** round(lo + (hi - lo) * i / (depth - 1))) for i in range(1, depth - 1)]
    return [64] + inner + [flat]


def discriminator_fc_nodes(depth):
    """Hidden FC widths from 512 down to 16 (FC(1) is appended separately)."""
    if depth == 1:
        return [16]
    if depth == 3:
        return [512, 64, 16]
    lo, hi = math.log2(512), math.log2(16)
    inner = [int(2 ** round(lo + (hi - lo) * i / (depth - 1))) for i in range(1, depth - 1)]
    return [512] + inner + [16]


def _pool_substitute(filters, k, stride, p, in_size, maybe_bn, lrelu):
    """Replace CONV(f,k,2,p) with CONV(f,k,1,same-ish) + POOL(2) + BN + act."""
    out = (in_size + 2 * p - k) // stride + 1
    total = 2 * out - 1 - in_size + k
    if total < 0:
        raise BuildError(f"pooling substitution impossible at size {in_size} (k={k})")
    lo, hi = total // 2, total - total // 2
    return [conv(filters, k, 1, lo, hi), pool(2)] + maybe_bn + [lrelu], out


def _disc_conv_stack(dataset, variant, use_bn, depth):
    fam = _FAMILY[dataset]
    k = fam["kernel"]
    maybe_bn = [bn()] if use_bn else []
    layers = []
    size = DATASET_SHAPES[dataset][1]
    if depth == 7:
        # interleaved unit-stride 3x3 stages before each downsampling conv
        if variant == "cnn":
            stages = [(64, 3, 1, 1), (64, 4, 2, 1), (128, 3, 1, 1), (256, 4, 2, 1),
                      (256, 3, 1, 1), (256, 4, 2, 1)]
        else:
            stages = [(64, 3, 1, 1), (64, 4, 2, 1), (128, 3, 1, 1), (128, 4, 2, 1),
                      (256, 3, 1, 1), (256, 4, 2, 1)]
        for f, kk, s, p in stages:
            if s == 2 and variant == "fccgan_p":
                sub, size = _pool_substitute(f, kk, s, p, size, list(maybe_bn), LRELU)
                layers += sub
            else:
                layers += [conv(f, kk, s, p)] + maybe_bn + [LRELU]
                size = (size + 2 * p - kk) // s + 1
        return layers, size
    for f, p in zip(fam["disc_channels"], fam["disc_pads"]):
        if variant == "fccgan_p":
            sub, size = _pool_substitute(f, k, 2, p, size, list(maybe_bn), LRELU)
            layers += sub
        else:
            layers += [conv(f, k, 2, p)] + maybe_bn + [LRELU]
            size = (size + 2 * p - k) // 2 + 1
    return layers, size


def build_discriminator(cfg: ArchitectureConfig) -> ModelSpec:
    cfg.validate()
    variant = cfg.disc_variant
    dataset = cfg.dataset
    fam = _FAMILY[dataset]
    use_bn = cfg.bn_discriminator
    layers, size = _disc_conv_stack(dataset, variant, use_bn, cfg.conv_depth_d)
    if variant == "cnn":
        layers += [conv(1, fam["kernel"], 1, 0)]
        if cfg.objective == "standard":
            layers += [SIGMOID]
        layers += [flatten()]
    else:
        layers += [flatten()]
        for n in discriminator_fc_nodes(cfg.fc_layers_d):
            layers += [fc(n), LRELU]
        layers += [fc(1)]
        if cfg.objective == "standard":
            layers += [SIGMOID]
    spec = ModelSpec(
        name=f"{dataset}/{variant}/D",
        input_shape=cfg.image_shape,
        layers=tuple(layers),
        output_shape=(1,),
    )
    spec.validate()
    return spec


def build_generator(cfg: ArchitectureConfig) -> ModelSpec:
    cfg.validate()
    variant = cfg.gen_variant
    dataset = cfg.dataset
    fam = _FAMILY[dataset]
    maybe_bn = [bn()] if cfg.bn_generator else []
    k_out, p_out, op_out = _GEN_OUT[dataset]
    out_c = cfg.image_shape[0]
    layers = []
    if variant == "cnn":
        layers += [reshape_to((cfg.noise_dim, 1, 1))]
        if cfg.conv_depth_g == 7:
            stack = [("convt", 256, 4, 1, 0, 0), ("conv", 256, 3, 1, 1, 0),
                     ("convt", 128, 4, 2, 1, 0), ("conv", 128, 3, 1, 1, 0),
                     ("convt", 64, 4, 2, 1, 0), ("conv", 64, 3, 1, 1, 0)]
        else:
            head_f, _, head_p = fam["cnn_head"]
            stack = [("convt", head_f, fam["kernel"], 1, head_p, 0)]
            stack += [("convt", f, fam["kernel"], 2, p, op) for f, p, op in fam["gen_stack"]]
        for kind, f, kk, s, p, op in stack:
            lay = convt(f, kk, s, p, op) if kind == "convt" else conv(f, kk, s, p)
            layers += [lay] + maybe_bn + [RELU]
    else:
        nodes = generator_fc_nodes(cfg.fc_layers_g, fam["flat"])
        for n in nodes[:-1]:
            layers += [fc(n), RELU]
        layers += [fc(nodes[-1])] + maybe_bn
        layers += [reshape_to(fam["reshape"])]
        if cfg.conv_depth_g == 7:
            stack = [("conv", 256, 3, 1, 1, 0), ("convt", 128, 4, 2, 1, 0),
                     ("conv", 128, 3, 1, 1, 0), ("convt", 64, 4, 2, 1, 0),
                     ("conv", 64, 3, 1, 1, 0)]
        else:
            stack = [("convt", f, fam["kernel"], 2, p, op) for f, p, op in fam["gen_stack"]]
        for kind, f, kk, s, p, op in stack:
            lay = convt(f, kk, s, p, op) if kind == "convt" else conv(f, kk, s, p)
            layers += [lay] + maybe_bn + [RELU]
    layers += [convt(out_c, k_out, 2, p_out, op_out), TANH]
    spec = ModelSpec(
        name=f"{dataset}/{variant}/G",
        input_shape=(cfg.noise_dim,),
        layers=tuple(layers),
        output_shape=cfg.image_shape,
    )
    spec.validate()
    return spec


def build_ablation(cfg: ArchitectureConfig):
    """Generator and discriminator for the configured ablation axes."""
    return build_generator(cfg), build_discriminator(cfg)


# ---------------------------------------------------------------------------
# parameter initialization

INIT_STD = 0.02


def init_parameters(spec: ModelSpec, seed, dtype=np.float32):
    """Zero-mean Gaussian (sigma 0.02) weights, zero biases, BN gamma=1 beta=0.

    Returns {name: Tensor}; names are 'L<idx>.<role>'. Deterministic in seed.
    """
    shapes = [tuple(spec.input_shape)] + spec.propagate()
    rng = np.random.default_rng(seed)
    params = {}
    for i, l in enumerate(spec.layers):
        pre = shapes[i]
        key = f"L{i:02d}"
        if l.kind == "conv":
            w = rng.normal(0.0, INIT_STD, size=(l.filters, pre[0], l.kernel, l.kernel))
            params[f"{key}.w"] = Tensor(w.astype(dtype), requires_grad=True)
            params[f"{key}.b"] = Tensor(np.zeros(l.filters, dtype), requires_grad=True)
        elif l.kind == "convt":
            w = rng.normal(0.0, INIT_STD, size=(pre[0], l.filters, l.kernel, l.kernel))
            params[f"{key}.w"] = Tensor(w.astype(dtype), requires_grad=True)
            params[f"{key}.b"] = Tensor(np.zeros(l.filters, dtype), requires_grad=True)
        elif l.kind == "fc":
            w = rng.normal(0.0, INIT_STD, size=(pre[0], l.nodes))
            params[f"{key}.w"] = Tensor(w.astype(dtype), requires_grad=True)
            params[f"{key}.b"] = Tensor(np.zeros(l.nodes, dtype), requires_grad=True)
        elif l.kind == "bn":
            params[f"{key}.gamma"] = Tensor(np.ones(pre[0], dtype), requires_grad=True)
            params[f"{key}.beta"] = Tensor(np.zeros(pre[0], dtype), requires_grad=True)
    return params


# ---------------------------------------------------------------------------
# table-style text form

def model_text(spec: ModelSpec, with_shapes=True):
    """One line per table row: the anchoring layer plus its BN/ACT/POOL tail."""
    shapes = spec.validate()
    lines = []
    if len(spec.input_shape) == 1:
        lines.append(f"Input: Z({spec.input_shape[0]})")
    else:
        lines.append(f"Input: {_disp_shape(spec.input_shape)}")
    cur_parts, cur_shape = [], None
    for l, shp in zip(spec.layers, shapes):
        if l.kind in ("conv", "convt", "fc", "reshape", "flatten"):
            if cur_parts:
                lines.append(_render(cur_parts, cur_shape, with_shapes))
            if l.kind == "flatten":
                cur_parts = [f"FLATTEN({shp[0]})"]
            else:
                cur_parts = [l.notation()]
        else:
            cur_parts.append(l.notation())
        cur_shape = shp
    if cur_parts:
        lines.append(_render(cur_parts, cur_shape, with_shapes))
    lines.append(f"Output: {_disp_shape(spec.output_shape)}")
    return "\n".join(lines) + "\n"


def _render(parts, shape, with_shapes):
    head = " ".join(parts)
    if not with_shapes:
        return head
    return f"{head:<40s} -> {_disp_shape(shape)}"
