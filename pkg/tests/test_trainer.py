"""Training loop contracts: determinism, resume equivalence, checkpoint
round-trips, config snapshots, the WGAN clipping invariant, and parameter
isolation between the two players."""

import numpy as np
import pytest

from fccgan.synth import render_digits
from fccgan.train import (
    Checkpoint, ConfigError, LossLog, NumericalAbort, TrainConfig,
    config_from_text, config_to_text, epochs_to_score,
    generator_from_checkpoint, sample, train,
)
from fccgan.zoo import ArchitectureConfig, init_parameters, build_generator


@pytest.fixture(scope="module")
def tiny_data():
    return render_digits(96, seed=11)


def _cfg(**kw):
    arch_kw = {"dataset": "mnist", "variant": "fccgan_p"}
    arch_kw.update(kw.pop("arch_kw", {}))
    arch = ArchitectureConfig(**arch_kw)
    kw.setdefault("batch_size", 8)
    kw.setdefault("epochs", 1)
    kw.setdefault("seed", 7)
    return TrainConfig(arch=arch, **kw)


def _loss_cols(log):
    return [(r[0], r[1], r[2], r[3]) for r in log.rows]


# ---------------------------------------------------------------------------
# config

def test_objective_defaults():
    std = TrainConfig(arch=ArchitectureConfig(dataset="mnist"))
    assert (std.optimizer, std.lr, std.decay, std.batch_size) == ("adam", 1e-4, 1e-5, 32)
    wg = TrainConfig(arch=ArchitectureConfig(dataset="cifar10", objective="wgan"))
    assert (wg.optimizer, wg.lr, wg.batch_size) == ("rmsprop", 5e-5, 64)


def test_config_text_roundtrip():
    cfg = _cfg(epochs=3, dataset_limit=50, arch_kw=dict(variant="cnn", bn_discriminator=False))
    text = config_to_text(cfg)
    back = config_from_text(text)
    assert config_to_text(back) == text
    assert back.arch.variant == "cnn" and back.arch.bn_discriminator is False


def test_config_rejects_tiny_batch():
    with pytest.raises(ConfigError, match="batch"):
        _cfg(batch_size=1)


def test_config_rejects_unknown_key():
    with pytest.raises(ConfigError, match="unknown config key"):
        config_from_text("bogus_key=3\n")


# ---------------------------------------------------------------------------
# training basics

def test_epochs_zero_returns_init(tiny_data):
    cfg = _cfg(epochs=0)
    ckpt, log = train(cfg, tiny_data)
    assert log.rows == []
    G = generator_from_checkpoint(ckpt)
    from fccgan.train import _seed_int, _SS_G_INIT
    ref = init_parameters(build_generator(cfg.arch), _seed_int(cfg.seed, _SS_G_INIT))
    for k, v in ref.items():
        assert np.array_equal(G.params[k].data, v.data), k


def test_shape_mismatch_rejected_before_any_step():
    data = render_digits(64, seed=1, size=32, channels=3)
    with pytest.raises(ConfigError, match="do not match"):
        train(_cfg(), data)


def test_same_seed_identical_losslog(tiny_data):
    log1 = train(_cfg(), tiny_data)[1]
    log2 = train(_cfg(), tiny_data)[1]
    assert log1.rows != []
    assert _loss_cols(log1) == _loss_cols(log2)


def test_different_seed_differs(tiny_data):
    log1 = train(_cfg(seed=1), tiny_data)[1]
    log2 = train(_cfg(seed=2), tiny_data)[1]
    assert _loss_cols(log1) != _loss_cols(log2)


def test_losslog_row_count_equals_generator_iterations(tiny_data):
    cfg = _cfg(epochs=2)
    _, log = train(cfg, tiny_data)
    assert len(log.rows) == 2 * (len(tiny_data) // cfg.batch_size)


def test_standard_d_loss_finite_nonnegative(tiny_data):
    _, log = train(_cfg(), tiny_data)
    d = np.array([r[2] for r in log.rows])
    assert np.all(np.isfinite(d)) and np.all(d >= 0)


def test_dataset_limit_caps_iterations(tiny_data):
    cfg = _cfg(dataset_limit=32)
    _, log = train(cfg, tiny_data)
    assert len(log.rows) == 32 // cfg.batch_size


# ---------------------------------------------------------------------------
# checkpointing

def test_checkpoint_save_load_save_byte_identical(tiny_data, tmp_path):
    ckpt, _ = train(_cfg(), tiny_data)
    p1 = ckpt.save(tmp_path / "a.fckp")
    again = Checkpoint.load(p1)
    p2 = again.save(tmp_path / "b.fckp")
    assert p1.read_bytes() == p2.read_bytes()


def test_resume_equals_uninterrupted(tiny_data, tmp_path):
    # 3 epochs straight vs 1 epoch, checkpoint, resume 2 more
    full_ck, full_log = train(_cfg(epochs=3), tiny_data)
    part_ck, part_log = train(_cfg(epochs=1), tiny_data)
    part_ck.save(tmp_path / "part.fckp")
    loaded = Checkpoint.load(tmp_path / "part.fckp")
    # resuming continues under the *target* epoch budget
    cfg3 = _cfg(epochs=3)
    loaded.config_text = config_to_text(cfg3)
    resumed_ck, resumed_log = train(cfg3, tiny_data, resume=loaded)
    assert _loss_cols(full_log)[len(part_log.rows):] == _loss_cols(resumed_log)
    for k in full_ck.arrays:
        assert np.array_equal(full_ck.arrays[k], resumed_ck.arrays[k]), k


def test_resume_mid_epoch_via_eval_every(tiny_data, tmp_path):
    cfg = _cfg(epochs=2, eval_every=7, sample_rows=2, sample_cols=2)
    out = tmp_path / "run"
    full_ck, full_log = train(cfg, tiny_data, out_dir=out)
    mid = Checkpoint.load(out / "checkpoints" / "ckpt_iter_00000007.fckp")
    resumed_ck, resumed_log = train(cfg, tiny_data, resume=mid)
    assert _loss_cols(full_log)[7:] == _loss_cols(resumed_log)
    for k in full_ck.arrays:
        assert np.array_equal(full_ck.arrays[k], resumed_ck.arrays[k]), k


def test_resume_rejects_config_mismatch(tiny_data):
    ckpt, _ = train(_cfg(epochs=1), tiny_data)
    with pytest.raises(ConfigError, match="config"):
        train(_cfg(epochs=1, seed=99), tiny_data, resume=ckpt)


def test_run_dir_manifest(tiny_data, tmp_path):
    cfg = _cfg(epochs=1, sample_rows=2, sample_cols=2)
    out = tmp_path / "run"
    train(cfg, tiny_data, out_dir=out)
    assert (out / "config.txt").read_text() == config_to_text(cfg)
    assert (out / "loss.csv").exists()
    assert (out / "checkpoints" / "ckpt_final.fckp").exists()
    assert (out / "checkpoints" / "ckpt_epoch_0001.fckp").exists()
    assert (out / "samples" / "grid_final.pgm").exists()
    log = LossLog.from_csv((out / "loss.csv").read_text())
    assert log.rows[0][0] == 1


def test_losslog_csv_roundtrip(tiny_data):
    _, log = train(_cfg(), tiny_data)
    back = LossLog.from_csv(log.to_csv())
    assert _loss_cols(back) == _loss_cols(log)
    assert back.to_csv().splitlines()[0] == "iter,epoch,d_loss,g_loss,wall_ms"


# ---------------------------------------------------------------------------
# player isolation

def test_generator_untouched_during_d_steps(tiny_data, monkeypatch):
    # freeze the generator optimizer: G params must then never change
    cfg = _cfg(epochs=1)
    import fccgan.train as T

    captured = {}
    orig = T.make_optimizer

    def spy(kind, params, lr, decay=0.0):
        opt = orig(kind, params, lr, decay)
        if "L01.w" in params and params["L01.w"].ndim == 2:   # generator FC stack
            captured["g_before"] = {k: v.data.copy() for k, v in params.items()}
            opt.step = lambda grads: None                     # freeze G updates
            captured["g_params"] = params
        return opt

    monkeypatch.setattr(T, "make_optimizer", spy)
    train(cfg, tiny_data)
    after = captured["g_params"]
    for k, v in captured["g_before"].items():
        assert np.array_equal(after[k].data, v), f"D steps leaked into generator {k}"


# ---------------------------------------------------------------------------
# wgan

def test_wgan_clipping_invariant():
    data = render_digits(80, seed=3, size=32, channels=3)
    arch = ArchitectureConfig(dataset="cifar10", variant="fccgan_s", objective="wgan")
    cfg = TrainConfig(arch=arch, batch_size=4, epochs=1, n_critic=2, seed=5, dataset_limit=40)
    seen = []

    def check(params):
        seen.append(max(float(np.max(np.abs(t.data))) for t in params.values()))

    train(cfg, data, on_critic_step=check)
    assert seen, "critic callback never fired"
    assert max(seen) <= cfg.clip_c + 1e-7


def test_wgan_epoch_consumes_stream_in_critic_batches():
    data = render_digits(100, seed=4, size=32, channels=3)
    arch = ArchitectureConfig(dataset="cifar10", objective="wgan")
    cfg = TrainConfig(arch=arch, batch_size=4, epochs=1, n_critic=5, seed=5)
    _, log = train(cfg, data)
    assert len(log.rows) == (100 // 4) // 5


# ---------------------------------------------------------------------------
# numerical abort

def test_nonfinite_loss_aborts_with_diagnostic(tmp_path):
    data = render_digits(64, seed=6)
    cfg = _cfg(epochs=2, lr=5e3)      # absurd rate forces divergence
    out = tmp_path / "boom"
    with pytest.raises(NumericalAbort, match="non-finite"):
        train(cfg, data, out_dir=out)
    assert (out / "checkpoints" / "ckpt_abort.fckp").exists()
    assert (out / "loss.csv").exists()


# ---------------------------------------------------------------------------
# sampling

def test_sample_fixed_seed_identical(tiny_data):
    ckpt, _ = train(_cfg(), tiny_data)
    a = sample(ckpt, 5, seed=3)
    b = sample(ckpt, 5, seed=3)
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, sample(ckpt, 5, seed=4).data)


def test_sample_shape_and_range(tiny_data):
    ckpt, _ = train(_cfg(), tiny_data)
    out = sample(ckpt, 9, seed=1)
    assert out.shape == (9, 1, 28, 28)
    assert np.all(out.data >= -1.0) and np.all(out.data <= 1.0)


# ---------------------------------------------------------------------------
# epochs_to_score

def test_epochs_to_score_monotone():
    assert epochs_to_score([(1, 5.0), (2, 6.0), (3, 7.0)], 6.5) == 3


def test_epochs_to_score_unreached():
    assert epochs_to_score([(1, 5.0), (2, 6.0)], 9.0) is None


def test_epochs_to_score_first_crossing():
    assert epochs_to_score([(3, 8.0), (1, 2.0), (2, 9.0)], 7.5) == 2
