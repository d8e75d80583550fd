"""Alternating GAN training loop, FCKP checkpoints, and loss logging.

Determinism contract: every stochastic draw comes either from the stateful
noise generator (whose state is checkpointed) or from per-epoch shuffle
generators derived statelessly from (seed, epoch), so resuming from a
checkpoint continues bit-identically. One iteration = one generator step;
an epoch ends when the shuffled real-data stream cannot fill the next
step's batches (WGAN steps consume n_critic real batches each).
"""

from __future__ import annotations

import json
import struct
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .data import Dataset, normalize, write_image_grid
from .engine import Tape, Tensor, backward
from .engine.container import read_array, write_array
from .network import Network
from .objectives import clip_weights, d_loss, g_loss, make_optimizer
from .zoo import ArchitectureConfig, build_discriminator, build_generator

FCKP_MAGIC = b"FCKP"

OBJECTIVE_DEFAULTS = {
    "standard": dict(optimizer="adam", lr=1e-4, decay=1e-5, batch_size=32),
    "wgan": dict(optimizer="rmsprop", lr=5e-5, decay=0.0, batch_size=64),
}

# seed-stream tags (SeedSequence entropy suffixes)
_SS_G_INIT, _SS_D_INIT, _SS_NOISE, _SS_SHUFFLE, _SS_GRID = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    pass


class NumericalAbort(RuntimeError):
    pass


@dataclass
class TrainConfig:
    arch: ArchitectureConfig = field(default_factory=ArchitectureConfig)
    optimizer: str = ""
    lr: float = 0.0
    decay: float = -1.0
    batch_size: int = 0
    epochs: int = 1
    n_critic: int = 5
    clip_c: float = 0.01
    seed: int = 0
    eval_every: int = 0            # iterations; 0 -> only epoch/final checkpoints
    sample_rows: int = 8
    sample_cols: int = 8
    dataset_limit: int = 0         # 0 -> full dataset
    g_loss_form: str = "nonsaturating"

    def __post_init__(self):
        base = OBJECTIVE_DEFAULTS.get(self.arch.objective)
        if base is None:
            raise ConfigError(f"unknown objective {self.arch.objective!r}")
        if not self.optimizer:
            self.optimizer = base["optimizer"]
        if self.lr <= 0:
            self.lr = base["lr"]
        if self.decay < 0:
            self.decay = base["decay"]
        if self.batch_size <= 0:
            self.batch_size = base["batch_size"]
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 (batch statistics)")
        if self.epochs < 0 or self.n_critic < 1 or self.clip_c <= 0:
            raise ConfigError("epochs >= 0, n_critic >= 1, clip_c > 0 required")
        self.arch.validate()

    @property
    def objective(self):
        return self.arch.objective


_ARCH_FIELDS = [f.name for f in fields(ArchitectureConfig)]
_TRAIN_FIELDS = [f.name for f in fields(TrainConfig) if f.name != "arch"]


def config_to_text(cfg: TrainConfig) -> str:
    """Canonical flat key=value form: sorted keys, diff-able and hashable."""
    pairs = {}
    for name in _ARCH_FIELDS:
        pairs[f"arch.{name}"] = getattr(cfg.arch, name)
    for name in _TRAIN_FIELDS:
        pairs[name] = getattr(cfg, name)
    lines = []
    for key in sorted(pairs):
        v = pairs[key]
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{key}={v}")
    return "\n".join(lines) + "\n"


def config_from_text(text: str) -> TrainConfig:
    arch_kw, train_kw = {}, {}
    arch_types = {f.name: f.type for f in fields(ArchitectureConfig)}
    train_types = {f.name: f.type for f in fields(TrainConfig)}
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        if "=" not in ln:
            raise ConfigError(f"bad config line {ln!r}")
        key, val = ln.split("=", 1)
        if key.startswith("arch."):
            name = key[5:]
            if name not in arch_types:
                raise ConfigError(f"unknown config key {key!r}")
            arch_kw[name] = _parse_value(val, arch_types[name])
        else:
            if key not in train_types:
                raise ConfigError(f"unknown config key {key!r}")
            train_kw[key] = _parse_value(val, train_types[key])
    return TrainConfig(arch=ArchitectureConfig(**arch_kw), **train_kw)


def _parse_value(val, ftype):
    t = str(ftype)
    if "bool" in t:
        if val not in ("true", "false"):
            raise ConfigError(f"bad boolean {val!r}")
        return val == "true"
    if "int" in t:
        return int(val)
    if "float" in t:
        return float(val)
    return val


# ---------------------------------------------------------------------------
# loss log

@dataclass
class LossLog:
    rows: list = field(default_factory=list)   # (iter, epoch, d_loss, g_loss, wall_ms)

    HEADER = "iter,epoch,d_loss,g_loss,wall_ms"

    def append(self, it, epoch, d, g, wall_ms):
        self.rows.append((it, epoch, float(d), float(g), float(wall_ms)))

    def to_csv(self) -> str:
        out = [self.HEADER]
        for it, ep, d, g, w in self.rows:
            out.append(f"{it},{ep},{d!r},{g!r},{w:.3f}")
        return "\n".join(out) + "\n"

    @classmethod
    def from_csv(cls, text):
        rows = []
        lines = text.strip().splitlines()
        if lines and lines[0] == cls.HEADER:
            lines = lines[1:]
        for ln in lines:
            it, ep, d, g, w = ln.split(",")
            rows.append((int(it), int(ep), float(d), float(g), float(w)))
        return cls(rows)

    def mean_d_loss(self, epochs=None):
        sel = [r[2] for r in self.rows if epochs is None or r[1] in epochs]
        return float(np.mean(sel))

    def mean_g_loss(self, epochs=None):
        sel = [r[3] for r in self.rows if epochs is None or r[1] in epochs]
        return float(np.mean(sel))


# ---------------------------------------------------------------------------
# FCKP checkpoint container

@dataclass
class Checkpoint:
    config_text: str
    meta: dict
    arrays: dict

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(FCKP_MAGIC)
            cfg = self.config_text.encode()
            fh.write(struct.pack("<I", len(cfg)))
            fh.write(cfg)
            meta = json.dumps(self.meta, sort_keys=True, separators=(",", ":")).encode()
            fh.write(struct.pack("<I", len(meta)))
            fh.write(meta)
            fh.write(struct.pack("<I", len(self.arrays)))
            for name in sorted(self.arrays):
                nb = name.encode()
                fh.write(struct.pack("<I", len(nb)))
                fh.write(nb)
                write_array(fh, self.arrays[name])
        return path

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            if fh.read(4) != FCKP_MAGIC:
                raise ConfigError(f"{path}: not an FCKP checkpoint")
            (clen,) = struct.unpack("<I", fh.read(4))
            config_text = fh.read(clen).decode()
            (mlen,) = struct.unpack("<I", fh.read(4))
            meta = json.loads(fh.read(mlen).decode())
            (count,) = struct.unpack("<I", fh.read(4))
            arrays = {}
            for _ in range(count):
                (nlen,) = struct.unpack("<I", fh.read(4))
                name = fh.read(nlen).decode()
                arrays[name] = read_array(fh)
        return cls(config_text, meta, arrays)

    def train_config(self):
        return config_from_text(self.config_text)


def _seeded_rng(seed, *tags):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *tags])))


def _seed_int(seed, tag):
    return int(np.random.SeedSequence([int(seed), tag]).generate_state(1)[0])


class _Frozen:
    """Temporarily drop requires_grad so recorded ops skip weight gradients."""

    def __init__(self, params):
        self.params = params

    def __enter__(self):
        for t in self.params.values():
            t.requires_grad = False

    def __exit__(self, *exc):
        for t in self.params.values():
            t.requires_grad = True
        return False


def _build_networks(cfg: TrainConfig):
    g_spec = build_generator(cfg.arch)
    d_spec = build_discriminator(cfg.arch)
    G = Network.initialize(g_spec, _seed_int(cfg.seed, _SS_G_INIT))
    D = Network.initialize(d_spec, _seed_int(cfg.seed, _SS_D_INIT))
    return G, D


def _checkpoint_from(cfg, G, D, opt_g, opt_d, noise_rng, iteration, epoch, epoch_pos):
    arrays = {}
    for name, arr in G.all_state_arrays().items():
        arrays[f"g.{name}"] = arr
    for name, arr in D.all_state_arrays().items():
        arrays[f"d.{name}"] = arr
    arrays.update(opt_g.state_arrays("optg"))
    arrays.update(opt_d.state_arrays("optd"))
    meta = {
        "iteration": iteration,
        "epoch": epoch,
        "epoch_pos": epoch_pos,
        "rng": noise_rng.bit_generator.state,
    }
    return Checkpoint(config_to_text(cfg), meta, arrays)


def _restore(ckpt: Checkpoint, cfg: TrainConfig, G, D, opt_g, opt_d, noise_rng):
    if ckpt.config_text != config_to_text(cfg):
        raise ConfigError("checkpoint config does not match the requested run")
    G.load_state_arrays({k[2:]: v for k, v in ckpt.arrays.items() if k.startswith("g.")})
    D.load_state_arrays({k[2:]: v for k, v in ckpt.arrays.items() if k.startswith("d.")})
    opt_g.load_state_arrays("optg", ckpt.arrays)
    opt_d.load_state_arrays("optd", ckpt.arrays)
    noise_rng.bit_generator.state = ckpt.meta["rng"]
    return ckpt.meta["iteration"], ckpt.meta["epoch"], ckpt.meta["epoch_pos"]


def train(cfg: TrainConfig, data: Dataset, out_dir=None, resume: Checkpoint | None = None,
          on_critic_step=None):
    """Run the configured GAN training; returns (final Checkpoint, LossLog).

    out_dir, when given, receives the run manifest: config.txt, loss.csv,
    checkpoints/ (per-epoch, eval_every and final) and samples/ grids.
    """
    img_shape = cfg.arch.image_shape
    if tuple(data.images.shape[1:]) != img_shape:
        raise ConfigError(f"dataset images {data.images.shape[1:]} do not match architecture {img_shape}")
    n_total = len(data)
    limit = min(cfg.dataset_limit, n_total) if cfg.dataset_limit else n_total
    if limit < cfg.batch_size * (cfg.n_critic if cfg.objective == "wgan" else 1):
        raise ConfigError(f"dataset of {limit} samples cannot fill one step at batch {cfg.batch_size}")
    images = normalize(Tensor(data.images.data[:limit])).data

    G, D = _build_networks(cfg)
    opt_g = make_optimizer(cfg.optimizer, G.params, cfg.lr, cfg.decay)
    opt_d = make_optimizer(cfg.optimizer, D.params, cfg.lr, cfg.decay)
    noise_rng = _seeded_rng(cfg.seed, _SS_NOISE)
    grid_noise = _seeded_rng(cfg.seed, _SS_GRID).standard_normal(
        (cfg.sample_rows * cfg.sample_cols, cfg.arch.noise_dim)).astype(np.float32)

    iteration, epoch, pos = 0, 0, 0
    if resume is not None:
        iteration, epoch, pos = _restore(resume, cfg, G, D, opt_g, opt_d, noise_rng)

    run = _RunDir(out_dir, cfg) if out_dir else None
    log = LossLog()
    batch = cfg.batch_size
    zdim = cfg.arch.noise_dim
    objective = cfg.objective

    def noise(n):
        return Tensor(noise_rng.standard_normal((n, zdim)).astype(np.float32))

    def real_batch(perm, p):
        idx = perm[p * batch:(p + 1) * batch]
        return Tensor(images[idx])

    def emit(tag):
        ck = _checkpoint_from(cfg, G, D, opt_g, opt_d, noise_rng, iteration, epoch, pos)
        if run:
            run.checkpoint(ck, tag)
            run.grid(_eval_samples(G, grid_noise), cfg, tag)
        return ck

    try:
        while epoch < cfg.epochs:
            perm = _seeded_rng(cfg.seed, _SS_SHUFFLE, epoch).permutation(limit)
            nb = limit // batch
            step_cost = cfg.n_critic if objective == "wgan" else 1
            while pos + step_cost <= nb:
                t0 = time.perf_counter()
                if objective == "standard":
                    real = real_batch(perm, pos)
                    pos += 1
                    tg = Tape()
                    with tg:
                        fake = G.forward(noise(batch), train=True)
                    with Tape() as td:
                        ld = d_loss("standard", D.forward(real, train=True),
                                    D.forward(fake.detach(), train=True))
                    opt_d.step(backward(ld, td))
                    with tg:
                        with _Frozen(D.params):
                            lg = g_loss("standard", D.forward(fake, train=True), cfg.g_loss_form)
                    opt_g.step(backward(lg, tg))
                    d_val, g_val = ld.item(), lg.item()
                else:
                    c_losses = []
                    for _ in range(cfg.n_critic):
                        real = real_batch(perm, pos)
                        pos += 1
                        fake = G.forward(noise(batch), train=True)
                        with Tape() as td:
                            ld = d_loss("wgan", D.forward(real, train=True),
                                        D.forward(fake.detach(), train=True))
                        opt_d.step(backward(ld, td))
                        clip_weights(D.params, cfg.clip_c)
                        if on_critic_step is not None:
                            on_critic_step(D.params)
                        c_losses.append(ld.item())
                    tg = Tape()
                    with tg:
                        fake = G.forward(noise(batch), train=True)
                        with _Frozen(D.params):
                            lg = g_loss("wgan", D.forward(fake, train=True))
                    opt_g.step(backward(lg, tg))
                    d_val, g_val = float(np.mean(c_losses)), lg.item()

                iteration += 1
                log.append(iteration, epoch + 1, d_val, g_val, (time.perf_counter() - t0) * 1e3)
                if not (np.isfinite(d_val) and np.isfinite(g_val)):
                    ck = emit("abort")
                    raise NumericalAbort(
                        f"non-finite loss at iteration {iteration} (d={d_val}, g={g_val}); "
                        f"diagnostic checkpoint {'written' if run else 'returned'}")
                if cfg.eval_every and iteration % cfg.eval_every == 0:
                    emit(f"iter_{iteration:08d}")
            epoch += 1
            pos = 0
            emit(f"epoch_{epoch:04d}")
    finally:
        if run:
            run.loss_csv(log)
    final = emit("final")
    return final, log


def _eval_samples(G, grid_noise):
    return G.forward(Tensor(grid_noise), train=False)


class _RunDir:
    """Self-describing run directory: config snapshot, loss CSV, checkpoints,
    sample grids."""

    def __init__(self, path, cfg):
        self.path = Path(path)
        (self.path / "checkpoints").mkdir(parents=True, exist_ok=True)
        (self.path / "samples").mkdir(parents=True, exist_ok=True)
        (self.path / "config.txt").write_text(config_to_text(cfg))

    def checkpoint(self, ck, tag):
        ck.save(self.path / "checkpoints" / f"ckpt_{tag}.fckp")

    def grid(self, samples, cfg, tag):
        ext = "pgm" if samples.shape[1] == 1 else "ppm"
        write_image_grid(samples, cfg.sample_rows, cfg.sample_cols,
                         self.path / "samples" / f"grid_{tag}.{ext}")

    def loss_csv(self, log):
        (self.path / "loss.csv").write_text(log.to_csv())


# ---------------------------------------------------------------------------
# sampling and convergence bookkeeping

def generator_from_checkpoint(ckpt: Checkpoint) -> Network:
    cfg = ckpt.train_config()
    G = Network.initialize(build_generator(cfg.arch), 0)
    G.load_state_arrays({k[2:]: v for k, v in ckpt.arrays.items() if k.startswith("g.")})
    return G


def discriminator_from_checkpoint(ckpt: Checkpoint) -> Network:
    cfg = ckpt.train_config()
    D = Network.initialize(build_discriminator(cfg.arch), 0)
    D.load_state_arrays({k[2:]: v for k, v in ckpt.arrays.items() if k.startswith("d.")})
    return D


def sample(ckpt: Checkpoint, n, seed, batch=256):
    """Eval-mode generator samples: [n,C,H,W] in [-1,1], fixed by seed."""
    cfg = ckpt.train_config()
    G = generator_from_checkpoint(ckpt)
    rng = np.random.default_rng(seed)
    outs = []
    done = 0
    while done < n:
        take = min(batch, n - done)
        z = Tensor(rng.standard_normal((take, cfg.arch.noise_dim)).astype(np.float32))
        outs.append(G.forward(z, train=False).data)
        done += take
    return Tensor(np.concatenate(outs, axis=0))


def epochs_to_score(history, threshold):
    """First epoch whose score reaches threshold; None if never.

    history: iterable of (epoch, score) pairs.
    """
    for epoch, score in sorted(history):
        if score >= threshold:
            return epoch
    return None
