"""Velocity network: construction, conditioning modes, checkpoints."""

import numpy as np
import pytest

from resflow import tensor as T
from resflow.model import (ModelConfig, VelocityModel, load_checkpoint,
                           save_checkpoint, time_embed)


def tiny_cfg(**kw):
    base = dict(width=2, levels=1, time_dim=4, seed=7)
    base.update(kw)
    return ModelConfig(**base)


class TestTimeEmbed:
    def test_t_zero(self):
        emb = time_embed(0.0, 8).ravel()
        assert np.allclose(emb[:4], 0.0)
        assert np.allclose(emb[4:], 1.0)

    def test_distinct_t_distinct_embeddings(self):
        ts = np.linspace(0, 1, 100)
        embs = np.stack([time_embed(float(t), 16) for t in ts])
        dists = np.linalg.norm(embs[:, None] - embs[None, :], axis=-1)
        dists[np.arange(100), np.arange(100)] = np.inf
        assert dists.min() > 0.0

    def test_norm_independent_of_t(self):
        norms = [np.linalg.norm(time_embed(float(t), 16)) for t in np.linspace(0, 1, 50)]
        assert max(norms) - min(norms) <= 1e-6

    def test_odd_dim_rejected(self):
        with pytest.raises(ValueError):
            time_embed(0.5, 7)


class TestBuild:
    def test_same_seed_bit_identical(self):
        a = VelocityModel(tiny_cfg())
        b = VelocityModel(tiny_cfg())
        assert list(a.params) == list(b.params)
        for k in a.params:
            assert np.array_equal(a.params[k].data, b.params[k].data)

    def test_different_seed_differs(self):
        a = VelocityModel(tiny_cfg(seed=1))
        b = VelocityModel(tiny_cfg(seed=2))
        assert any(not np.array_equal(a.params[k].data, b.params[k].data)
                   for k in a.params)

    def test_parameter_budgets(self):
        assert VelocityModel(tiny_cfg()).param_count() <= 2000
        assert VelocityModel(ModelConfig(seed=0)).param_count() <= 200_000

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            ModelConfig(injection_mode="bogus")
        with pytest.raises(ValueError):
            ModelConfig(width=0)


class TestForward:
    @pytest.mark.parametrize("size", [8, 16, 32])
    def test_output_shapes_match_input(self, rng, size):
        m = VelocityModel(tiny_cfg())
        x = rng.normal(size=(1, size, size))
        y = rng.normal(size=(1, size, size))
        vx, vy = m.velocity(x, y, 0.5)
        assert vx.shape == x.shape and vy.shape == y.shape

    @pytest.mark.parametrize("mode", ["adapter", "add", "concat"])
    def test_injection_modes_consume_y(self, rng, mode):
        m = VelocityModel(tiny_cfg(injection_mode=mode))
        if mode == "adapter":
            # adapter output projections start at zero; one step of training
            # is what makes the conditioning live (checked elsewhere)
            for k, p in m.params.items():
                if ".proj.w" in k:
                    p.data = p.data + 0.05
        x = rng.normal(size=(1, 16, 16))
        y1 = rng.normal(size=(1, 16, 16))
        y2 = rng.normal(size=(1, 16, 16))
        vx1, _ = m.velocity(x, y1, 0.5)
        vx2, _ = m.velocity(x, y2, 0.5)
        assert not np.array_equal(vx1, vx2)

    def test_adapter_zero_init_ignores_y(self, rng):
        m = VelocityModel(tiny_cfg(injection_mode="adapter"))
        x = rng.normal(size=(1, 16, 16))
        y = rng.normal(size=(1, 16, 16))
        vx_y, vy_y = m.velocity(x, y, 0.3)
        vx_0, vy_0 = m.velocity(x, np.zeros_like(y), 0.3)
        assert np.array_equal(vx_y, vx_0)
        assert np.array_equal(vy_y, vy_0)

    def test_adapter_equivalence_broken_by_one_step(self, rng):
        from resflow.degradations import DegradationSpec, PairedSample
        from resflow.trainer import AdamOptimizer, TrainConfig, train_step
        m = VelocityModel(tiny_cfg(injection_mode="adapter"))
        spec = DegradationSpec("haze", {"alpha": 0.5, "airlight": 0.5}, seed=0)
        batch = [PairedSample(rng.normal(size=(1, 8, 8)), rng.normal(size=(1, 8, 8)), spec)
                 for _ in range(2)]
        cfg = TrainConfig(iterations=1, batch_size=2, seed=0)
        train_step(m, AdamOptimizer(m.params), batch, rng, cfg, lr=1e-2)
        x = rng.normal(size=(1, 16, 16))
        y = rng.normal(size=(1, 16, 16))
        vx_y, _ = m.velocity(x, y, 0.5)
        vx_0, _ = m.velocity(x, np.zeros_like(y), 0.5)
        assert not np.array_equal(vx_y, vx_0)

    def test_batched_forward_matches_single(self, rng):
        m = VelocityModel(tiny_cfg())
        xs = rng.normal(size=(3, 1, 8, 8))
        ys = rng.normal(size=(3, 1, 8, 8))
        vx_b, vy_b = m.velocity(xs, ys, 0.4)
        for i in range(3):
            vx_i, vy_i = m.velocity(xs[i], ys[i], 0.4)
            assert np.allclose(vx_b[i], vx_i, atol=1e-6)
            assert np.allclose(vy_b[i], vy_i, atol=1e-6)

    def test_shape_mismatch_rejected(self, rng):
        m = VelocityModel(tiny_cfg())
        with pytest.raises(ValueError):
            m.velocity(rng.normal(size=(1, 8, 8)), rng.normal(size=(1, 16, 16)), 0.5)

    def test_outputs_differentiable(self, rng):
        m = VelocityModel(tiny_cfg())
        x = rng.normal(size=(1, 8, 8))
        vx, vy = m.forward(x, np.zeros_like(x), 0.5)
        T.backward(T.add(T.sum_all(T.mul(vx, vx)), T.sum_all(T.mul(vy, vy))))
        grads = [p.grad for p in m.params.values() if p.grad is not None]
        assert any(np.abs(g).max() > 0 for g in grads)


class TestCheckpoint:
    def test_roundtrip_bit_exact(self, tmp_path, rng):
        m = VelocityModel(tiny_cfg())
        for p in m.params.values():
            # checkpoints store 32-bit floats; keep the source model at the
            # same width so the comparison can be bit-exact
            p.data = (p.data + rng.normal(scale=0.01, size=p.data.shape)).astype(np.float32)
        path = str(tmp_path / "m.ckpt")
        save_checkpoint(m, path, step=17)
        m2, step = load_checkpoint(path)
        assert step == 17
        x = rng.normal(size=(1, 16, 16)).astype(np.float32)
        vx, _ = m.velocity(x, np.zeros_like(x), 0.5)
        vx2, _ = m2.velocity(x, np.zeros_like(x), 0.5)
        assert np.array_equal(vx, vx2)

    def test_corrupt_magic_rejected(self, tmp_path):
        m = VelocityModel(tiny_cfg())
        path = tmp_path / "m.ckpt"
        save_checkpoint(m, str(path), step=0)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"XXXX"
        path.write_bytes(bytes(blob))
        with pytest.raises(ValueError, match="magic"):
            load_checkpoint(str(path))

    def test_truncated_blob_rejected(self, tmp_path):
        m = VelocityModel(tiny_cfg())
        path = tmp_path / "m.ckpt"
        save_checkpoint(m, str(path), step=0)
        blob = path.read_bytes()
        path.write_bytes(blob[:-16])
        with pytest.raises(ValueError):
            load_checkpoint(str(path))
