import time

import numpy as np
import pytest
import torch

from contactkit.model import (
    ContactNet,
    CrossAttentionFusion,
    ModelConfig,
    count_parameters,
    load_checkpoint,
    reset_parameters,
    save_checkpoint,
    tokens_from_map,
)

from oracles import cross_attention_reference

TINY = ModelConfig(
    image_size=(32, 32), encoder_channels=(8,), num_vertices=50, num_parts=3,
    num_scene_channels=4, head_hidden=8, seed=1,
)


class TestCrossAttention:
    def test_single_token_degenerate(self):
        fusion = CrossAttentionFusion(channels=4).double()
        f_s = torch.randn(1, 1, 4, dtype=torch.float64)
        f_p = torch.randn(1, 1, 4, dtype=torch.float64)
        fused, attn_ps, attn_sp = fusion.fuse_tokens(f_s, f_p)
        assert torch.allclose(attn_ps, torch.ones_like(attn_ps))
        assert torch.allclose(attn_sp, torch.ones_like(attn_sp))
        # with 1x1 attention, each attended stream is its own input
        expected = fusion.norm(f_s * f_p)
        assert torch.allclose(fused, expected)

    def test_zero_part_queries_give_uniform_rows(self):
        fusion = CrossAttentionFusion(channels=3).double()
        f_s = torch.randn(1, 2, 3, dtype=torch.float64)
        f_p = torch.zeros(1, 2, 3, dtype=torch.float64)
        _, attn_ps, _ = fusion.fuse_tokens(f_s, f_p)
        assert torch.allclose(attn_ps, torch.full_like(attn_ps, 0.5))
        # each attended scene row is then the mean of the scene tokens
        attended, _ = fusion.attend(f_p, f_s, f_s)
        assert torch.allclose(attended[0, 0], f_s[0].mean(dim=0))
        assert torch.allclose(attended[0, 1], f_s[0].mean(dim=0))

    def test_matches_scripted_reference(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            t = int(rng.integers(1, 9))
            c = int(rng.integers(1, 9))
            fusion = CrossAttentionFusion(channels=c).double()
            f_s = rng.normal(size=(t, c))
            f_p = rng.normal(size=(t, c))
            fused, attn_ps, attn_sp = fusion.fuse_tokens(
                torch.tensor(f_s)[None], torch.tensor(f_p)[None]
            )
            ref_fused, ref_ps, ref_sp = cross_attention_reference(f_s, f_p, c_t=c)
            assert np.allclose(fused[0].detach().numpy(), ref_fused, atol=1e-6)
            assert np.allclose(attn_ps[0, 0].detach().numpy(), ref_ps, atol=1e-6)
            assert np.allclose(attn_sp[0, 0].detach().numpy(), ref_sp, atol=1e-6)

    def test_rows_stochastic(self):
        fusion = CrossAttentionFusion(channels=6, num_heads=2).double()
        f_s = torch.randn(2, 5, 6, dtype=torch.float64)
        f_p = torch.randn(2, 5, 6, dtype=torch.float64)
        _, attn_ps, attn_sp = fusion.fuse_tokens(f_s, f_p)
        for attn in (attn_ps, attn_sp):
            assert torch.all(attn >= 0)
            assert torch.allclose(attn.sum(dim=-1), torch.ones_like(attn.sum(dim=-1)), atol=1e-6)

    def test_token_permutation_conjugation(self):
        fusion = CrossAttentionFusion(channels=4).double()
        f_s = torch.randn(1, 7, 4, dtype=torch.float64)
        f_p = torch.randn(1, 7, 4, dtype=torch.float64)
        perm = torch.randperm(7)
        fused, _, _ = fusion.fuse_tokens(f_s, f_p)
        fused_perm, _, _ = fusion.fuse_tokens(f_s[:, perm], f_p[:, perm])
        assert torch.allclose(fused[:, perm], fused_perm, atol=1e-10)

    def test_dimension_mismatch_rejected(self):
        fusion = CrossAttentionFusion(channels=4)
        with pytest.raises(ValueError):
            fusion(torch.randn(1, 4, 2, 2), torch.randn(1, 4, 2, 3))


class TestContactNet:
    def test_zero_image_finite(self):
        net = ContactNet(TINY)
        out = net(torch.zeros(1, 3, 32, 32))
        assert torch.isfinite(out.contact).all()
        assert torch.isfinite(out.scene_logits).all()
        assert torch.isfinite(out.part_logits).all()
        assert out.contact.min() > 0 and out.contact.max() < 1

    def test_seeds_change_parameters_not_shapes(self):
        a = ContactNet(TINY)
        b = ContactNet(ModelConfig(**{**TINY.__dict__, "seed": 2}))
        sa = dict(a.named_parameters())
        sb = dict(b.named_parameters())
        assert sa.keys() == sb.keys()
        assert any(not torch.equal(sa[k], sb[k]) for k in sa)
        c = ContactNet(TINY)
        assert all(torch.equal(sa[k], p) for k, p in c.named_parameters())

    def test_batch_dimension_preserved(self):
        net = ContactNet(TINY)
        out = net(torch.rand(3, 3, 32, 32))
        assert out.contact.shape == (3, 50)
        assert out.scene_logits.shape == (3, 4, 32, 32)
        assert out.part_logits.shape == (3, 3 + 1, 32, 32)

    def test_decoder_channel_counts_at_paper_scale(self):
        cfg = ModelConfig(
            image_size=(64, 64), encoder_channels=(4, 8), num_vertices=20,
            num_parts=24, num_scene_channels=133, head_hidden=4,
        )
        out = ContactNet(cfg)(torch.rand(1, 3, 64, 64))
        assert out.scene_logits.shape[1] == 133
        assert out.part_logits.shape[1] == 25

    def test_batch_equals_loop(self):
        net = ContactNet(TINY).double()
        x = torch.rand(4, 3, 32, 32, dtype=torch.float64)
        with torch.no_grad():
            batched = net(x)
            singles = [net(x[i : i + 1]) for i in range(4)]
        assert torch.allclose(batched.contact, torch.cat([s.contact for s in singles]), atol=1e-6)
        assert torch.allclose(
            batched.scene_logits, torch.cat([s.scene_logits for s in singles]), atol=1e-6
        )

    def test_swapping_batch_entries_swaps_outputs(self):
        net = ContactNet(TINY).double()
        x = torch.rand(2, 3, 32, 32, dtype=torch.float64)
        with torch.no_grad():
            fwd = net(x)
            swapped = net(x.flip(0))
        assert torch.allclose(fwd.contact.flip(0), swapped.contact, atol=1e-12)

    def test_deterministic_forward(self):
        net = ContactNet(TINY)
        x = torch.rand(1, 3, 32, 32)
        with torch.no_grad():
            assert torch.equal(net(x).contact, net(x).contact)

    def test_wrong_input_size_rejected(self):
        net = ContactNet(TINY)
        with pytest.raises(ValueError):
            net(torch.rand(1, 3, 64, 64))

    def test_desk_forward_under_one_second(self):
        cfg = ModelConfig(image_size=(64, 64), encoder_channels=(16, 32), num_vertices=642)
        net = ContactNet(cfg)
        x = torch.rand(1, 3, 64, 64)
        net(x)  # warm up
        t0 = time.perf_counter()
        net(x)
        assert time.perf_counter() - t0 < 1.0

    def test_contact_head_zero_final_layer_gives_half(self):
        net = ContactNet(TINY)
        with torch.no_grad():
            net.contact_head.mlp[2].weight.zero_()
            net.contact_head.mlp[2].bias.zero_()
        out = net(torch.rand(1, 3, 32, 32))
        assert torch.allclose(out.contact, torch.full_like(out.contact, 0.5))

    def test_contact_head_sensitive_to_fused_features(self):
        net = ContactNet(TINY).double()
        fused = torch.rand(1, 16 * 16, 8, dtype=torch.float64, requires_grad=True)
        out = net.contact_head(fused)
        out.sum().backward()
        assert fused.grad.abs().sum() > 0


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        net = ContactNet(TINY)
        save_checkpoint(tmp_path / "ckpt.pkl", net, extra={"note": "hi"})
        loaded, extra = load_checkpoint(tmp_path / "ckpt.pkl")
        assert extra["note"] == "hi"
        assert loaded.config == TINY
        x = torch.rand(1, 3, 32, 32)
        with torch.no_grad():
            assert torch.allclose(net(x).contact, loaded(x).contact)

    def test_parameter_names_are_flat_paths(self, tmp_path):
        net = ContactNet(TINY)
        save_checkpoint(tmp_path / "ckpt.pkl", net)
        import pickle

        payload = pickle.load(open(tmp_path / "ckpt.pkl", "rb"))
        names = list(payload["params"])
        assert "scene_encoder.stages.0.weight" in names
        assert all(isinstance(v, np.ndarray) for v in payload["params"].values())

    def test_tiny_config_under_1e3_parameters(self):
        assert count_parameters(ContactNet(TINY)) < 10_000  # sanity; exact budget in acceptance


class TestConfig:
    def test_attention_dim_must_match_tokens(self):
        with pytest.raises(ValueError, match="attention_dim"):
            ModelConfig(encoder_channels=(8,), attention_dim=5)

    def test_indivisible_heads_rejected(self):
        with pytest.raises(ValueError, match="heads"):
            ModelConfig(encoder_channels=(6,), num_heads=4)

    def test_reset_parameters_is_stable(self):
        net = ContactNet(TINY)
        before = {k: p.clone() for k, p in net.named_parameters()}
        reset_parameters(net, TINY.seed)
        assert all(torch.equal(before[k], p) for k, p in net.named_parameters())
