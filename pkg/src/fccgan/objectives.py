"""GAN objectives and optimizers.

Standard objective: cross-entropy with probabilities eps-clamped before the
logs (the generator uses the non-saturating form by default; the minimax
form sits behind `form="minimax"` for comparison). WGAN objective: critic
score differences with weight clipping enforcing the Lipschitz constraint.

Optimizers apply effective_lr = lr / (1 + decay * completed_steps), the
classic inverse-time decay schedule.
"""

from __future__ import annotations

import numpy as np

from .engine import Tensor, ops

PROB_EPS = 1e-7

ADAM_BETA1, ADAM_BETA2, ADAM_EPS = 0.9, 0.999, 1e-8
RMSPROP_RHO, RMSPROP_EPS = 0.9, 1e-8

OPTIMIZER_KINDS = ("adam", "rmsprop", "sgd")


class ObjectiveError(ValueError):
    pass


def _check_probs(name, t):
    if np.any(t.data < 0.0) or np.any(t.data > 1.0):
        raise ObjectiveError(
            f"{name}: standard objective needs probabilities in [0,1]; "
            f"got range [{t.data.min():.4g}, {t.data.max():.4g}] (wgan scores?)"
        )


def _clamped(t):
    return ops.clamp(t, PROB_EPS, 1.0 - PROB_EPS)


def d_loss(objective, d_real, d_fake):
    """Discriminator/critic loss over a batch of outputs."""
    if objective == "standard":
        _check_probs("d_loss", d_real)
        _check_probs("d_loss", d_fake)
        real_term = ops.neg(ops.mean(ops.log(_clamped(d_real))))
        fake_term = ops.neg(ops.mean(ops.log(ops.sub(1.0, _clamped(d_fake)))))
        return ops.add(real_term, fake_term)
    if objective == "wgan":
        return ops.sub(ops.mean(d_fake), ops.mean(d_real))
    raise ObjectiveError(f"unknown objective {objective!r}")


def g_loss(objective, d_fake, form="nonsaturating"):
    """Generator loss from the discriminator's outputs on fakes."""
    if objective == "standard":
        _check_probs("g_loss", d_fake)
        if form == "nonsaturating":
            return ops.neg(ops.mean(ops.log(_clamped(d_fake))))
        if form == "minimax":
            return ops.mean(ops.log(ops.sub(1.0, _clamped(d_fake))))
        raise ObjectiveError(f"unknown generator loss form {form!r}")
    if objective == "wgan":
        return ops.neg(ops.mean(d_fake))
    raise ObjectiveError(f"unknown objective {objective!r}")


# ---------------------------------------------------------------------------
# optimizers

class Optimizer:
    """Base: owns a live {name: Tensor} parameter dict and rebinds entries."""

    kind = ""
    slot_names = ()

    def __init__(self, params, lr, decay=0.0):
        self.params = params
        self.lr = float(lr)
        self.decay = float(decay)
        self.step_count = 0
        self.slots = {}

    def effective_lr(self):
        return self.lr / (1.0 + self.decay * self.step_count)

    def _slot(self, name, like):
        store = self.slots.setdefault(name, {})
        for s in self.slot_names:
            if s not in store:
                store[s] = np.zeros_like(like)
        return store

    def step(self, grads):
        """grads: {Tensor: ndarray} from backward(); parameters missing from
        the map are left untouched."""
        eff = self.effective_lr()
        self.step_count += 1
        for name, t in self.params.items():
            g = grads.get(t)
            if g is None:
                continue
            if g.shape != t.shape:
                raise ObjectiveError(f"gradient shape {g.shape} != parameter {name} shape {t.shape}")
            new = self._update(name, t.data, g.astype(t.dtype, copy=False), t.dtype.type(eff))
            self.params[name] = Tensor(new, requires_grad=True)

    def _update(self, name, w, g, eff):
        raise NotImplementedError

    # checkpoint support -----------------------------------------------------
    def state_arrays(self, prefix):
        out = {f"{prefix}.step": np.asarray(float(self.step_count), dtype=np.float64)}
        for name, store in sorted(self.slots.items()):
            for s, arr in sorted(store.items()):
                out[f"{prefix}.{name}.{s}"] = arr
        return out

    def load_state_arrays(self, prefix, arrays):
        self.step_count = int(arrays[f"{prefix}.step"])
        self.slots = {}
        plen = len(prefix) + 1
        for key, arr in arrays.items():
            if not key.startswith(prefix + ".") or key == f"{prefix}.step":
                continue
            name, s = key[plen:].rsplit(".", 1)
            self.slots.setdefault(name, {})[s] = arr.copy()


class SGD(Optimizer):
    kind = "sgd"

    def _update(self, name, w, g, eff):
        return w - eff * g


class Adam(Optimizer):
    kind = "adam"
    slot_names = ("m", "v")

    def __init__(self, params, lr, decay=0.0, beta1=ADAM_BETA1, beta2=ADAM_BETA2, eps=ADAM_EPS):
        super().__init__(params, lr, decay)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def _update(self, name, w, g, eff):
        store = self._slot(name, w)
        t = self.step_count
        store["m"] = self.beta1 * store["m"] + (1.0 - self.beta1) * g
        store["v"] = self.beta2 * store["v"] + (1.0 - self.beta2) * (g * g)
        mhat = store["m"] / (1.0 - self.beta1 ** t)
        vhat = store["v"] / (1.0 - self.beta2 ** t)
        return w - eff * mhat / (np.sqrt(vhat) + self.eps)


class RMSProp(Optimizer):
    kind = "rmsprop"
    slot_names = ("v",)

    def __init__(self, params, lr, decay=0.0, rho=RMSPROP_RHO, eps=RMSPROP_EPS):
        super().__init__(params, lr, decay)
        self.rho, self.eps = rho, eps

    def _update(self, name, w, g, eff):
        store = self._slot(name, w)
        store["v"] = self.rho * store["v"] + (1.0 - self.rho) * (g * g)
        return w - eff * g / (np.sqrt(store["v"]) + self.eps)


def make_optimizer(kind, params, lr, decay=0.0):
    if kind == "adam":
        return Adam(params, lr, decay)
    if kind == "rmsprop":
        return RMSProp(params, lr, decay)
    if kind == "sgd":
        return SGD(params, lr, decay)
    raise ObjectiveError(f"unknown optimizer {kind!r}; choose from {OPTIMIZER_KINDS}")


def clip_weights(params, c):
    """Clamp every trained parameter into [-c, c] (gamma/beta included;
    BN running moments live outside the parameter dict and stay exempt)."""
    if c <= 0:
        raise ObjectiveError(f"clip constant must be positive, got {c}")
    for name, t in params.items():
        d = t.data
        if d.min() < -c or d.max() > c:
            params[name] = Tensor(np.clip(d, -c, c), requires_grad=True)
    return params
