"""Tests for CoFusion, the edge network, model state and its file format."""

import math

import numpy as np
import pytest

from autodiff import Grid, Kernel, Node, backward, check_gradients, ops
from losses import TracingConfig, derive_label, loss_ce
from model import (
    CoFusionParams,
    EdgeNetConfig,
    FixedFusion,
    SidePack,
    XorShift64Star,
    cofusion_forward,
    fixed_weight_fusion,
    forward,
    forward_with_weights,
    init_params,
    load_state,
    loss_terms,
    predict,
    save_state,
    total_loss,
)
from model.state import MAGIC, decode_state, encode_state, parameter_layout
from training import TrainConfig, sgd_step


def pack_of(*planes) -> SidePack:
    return SidePack([Node.constant(Grid(np.asarray(p, dtype=np.float64))) for p in planes])


def random_pack(rng: np.random.Generator, sides: int, size: int = 6) -> SidePack:
    return SidePack([Node.leaf(Grid(rng.normal(scale=2.0, size=(size, size)))) for _ in range(sides)])


def random_params(rng: np.random.Generator, sides: int, mid: int, sigma: float = 0.5) -> CoFusionParams:
    def kernel(cin, cout, name):
        return Kernel.create(rng.normal(scale=sigma, size=(3, 3, cin, cout)), rng.normal(scale=0.1, size=cout), name=name)

    return CoFusionParams(
        conv1=kernel(sides, mid, "fusion.conv1"),
        conv2=kernel(mid, mid, "fusion.conv2"),
        conv3=kernel(mid, sides, "fusion.conv3"),
    )


def edge_label(size: int, delta: float = 0.0, k_bdry: int = 3):
    consensus = np.zeros((size, size))
    consensus[size // 2, 1:-1] = 1.0
    consensus[1:-1, size // 3] = 0.6
    return derive_label(Grid(consensus), delta, k_bdry)


class TestSidePack:
    """Tests for SidePack validation."""

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            SidePack([])

    def test_mismatched_sides_rejected(self):
        with pytest.raises(ValueError):
            pack_of(np.zeros((3, 3)), np.zeros((3, 4)))

    def test_stacked(self):
        pack = pack_of(np.zeros((2, 2)), np.ones((2, 2)))
        assert pack.count == 2
        assert pack.stacked().shape == (2, 2, 2)


class TestCoFusion:
    """Tests for the context-aware fusion block."""

    def test_zero_parameters_average(self):
        rng = np.random.default_rng(0)
        pack = random_pack(rng, 3)
        fused, weights = cofusion_forward(pack, CoFusionParams.zeros(3, 4))
        assert np.allclose(weights.data, 1 / 3)
        mean = np.mean([s.data for s in pack.sides], axis=0)
        assert np.allclose(fused.data, mean, atol=1e-12)

    def test_hand_set_scores(self):
        params = CoFusionParams.zeros(2, 4)
        params = CoFusionParams(
            conv1=params.conv1,
            conv2=params.conv2,
            conv3=Kernel.create(np.zeros((3, 3, 4, 2)), np.array([0.0, math.log(2.0)]), name="fusion.conv3"),
        )
        z1 = np.arange(9.0).reshape(3, 3)
        z2 = -np.arange(9.0).reshape(3, 3) * 0.5
        fused, weights = cofusion_forward(pack_of(z1, z2), params)
        assert np.allclose(weights.data[..., 0], 1 / 3, atol=1e-12)
        assert np.allclose(weights.data[..., 1], 2 / 3, atol=1e-12)
        assert np.allclose(fused.value.plane(), (z1 + 2 * z2) / 3, atol=1e-12)

    def test_single_side_is_identity(self):
        rng = np.random.default_rng(1)
        pack = random_pack(rng, 1)
        fused, weights = cofusion_forward(pack, random_params(rng, 1, 4))
        assert np.allclose(weights.data, 1.0)
        assert np.allclose(fused.data, pack.sides[0].data, atol=1e-12)

    def test_side_count_mismatch(self):
        with pytest.raises(ValueError, match="sides"):
            cofusion_forward(random_pack(np.random.default_rng(0), 2), CoFusionParams.zeros(3, 4))

    def test_params_validate_channels(self):
        with pytest.raises(ValueError):
            CoFusionParams(
                conv1=Kernel.zeros(3, 3, 2, 4),
                conv2=Kernel.zeros(3, 3, 4, 5),
                conv3=Kernel.zeros(3, 3, 5, 2),
            )

    def test_normalized_and_convex(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            sides = int(rng.integers(1, 5))
            pack = random_pack(rng, sides, size=5)
            fused, weights = cofusion_forward(pack, random_params(rng, sides, 3, sigma=1.0))
            assert np.allclose(weights.data.sum(axis=2), 1.0, atol=1e-9)
            stacked = pack.stacked().data
            assert np.all(fused.data[..., 0] >= stacked.min(axis=2) - 1e-12)
            assert np.all(fused.data[..., 0] <= stacked.max(axis=2) + 1e-12)

    @pytest.mark.parametrize("seed", range(20))
    def test_gradients(self, seed):
        rng = np.random.default_rng(seed)
        pack = random_pack(rng, 3, size=5)
        params = random_params(rng, 3, 4)
        target = Grid(rng.normal(size=(5, 5)))

        def fn():
            fused, _ = cofusion_forward(pack, params)
            return ops.sum_all(ops.multiply(fused, Node.constant(target)))

        result = check_gradients("cofusion", fn, [*pack.sides, *params.parameters()], allow_kinks=True)
        assert result.passed, result


class TestFixedFusion:
    """Tests for the image-level weighted sum baseline."""

    def test_one_hot(self):
        pack = pack_of(np.full((2, 2), 5.0), np.full((2, 2), -1.0))
        assert np.array_equal(fixed_weight_fusion(pack, [1.0, 0.0]).value.plane(), np.full((2, 2), 5.0))

    def test_half_half(self):
        pack = pack_of(np.ones((3, 3)), np.full((3, 3), 3.0))
        assert np.allclose(fixed_weight_fusion(pack, [0.5, 0.5]).data, 2.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            fixed_weight_fusion(pack_of(np.ones((2, 2))), [0.5, 0.5])

    def test_matches_zero_parameter_cofusion(self):
        pack = random_pack(np.random.default_rng(3), 4)
        fixed = fixed_weight_fusion(pack, [0.25] * 4)
        fused, _ = cofusion_forward(pack, CoFusionParams.zeros(4, 2))
        assert np.allclose(fixed.data, fused.data, atol=1e-12)

    def test_trained_weight_gradients(self):
        rng = np.random.default_rng(4)
        pack = random_pack(rng, 3)
        w = Node.leaf(Grid(rng.normal(size=(1, 1, 3))))
        strategy = FixedFusion(w)

        def fn():
            fused, weights = strategy.fuse(pack)
            assert weights is None
            return ops.sum_all(ops.multiply(fused, fused))

        assert check_gradients("fixed", fn, [w, *pack.sides]).passed


class TestEdgeNet:
    """Tests for the side-output network."""

    def test_shapes(self):
        cfg = EdgeNetConfig(stages=3, base_channels=2, convs_per_stage=1)
        state = init_params(cfg, seed=0)
        pack, final = forward(Grid(np.random.default_rng(0).random((64, 64))), state, cfg)
        assert pack.count == 3
        assert all(side.shape == (64, 64, 1) for side in pack.sides)
        assert final.shape == (64, 64, 1)

    def test_odd_size_input(self):
        cfg = EdgeNetConfig(stages=3, base_channels=2, convs_per_stage=1)
        pack, final = forward(Grid(np.random.default_rng(0).random((13, 11))), init_params(cfg, 0), cfg)
        assert all(side.shape == (13, 11, 1) for side in pack.sides)

    @pytest.mark.parametrize("mode", ["fixed", "cofusion"])
    def test_single_stage_final_is_side(self, mode):
        cfg = EdgeNetConfig(stages=1, base_channels=2, fusion_mode=mode, mid_channels=2, init_sigma=0.3)
        pack, final = forward(Grid(np.random.default_rng(1).random((8, 8))), init_params(cfg, 3), cfg)
        assert np.allclose(final.data, pack.sides[0].data, atol=1e-12)

    @pytest.mark.parametrize("mode", ["fixed", "cofusion"])
    def test_zero_parameters_give_half(self, mode):
        cfg = EdgeNetConfig(stages=2, base_channels=2, fusion_mode=mode, mid_channels=2, init_sigma=0.0)
        result = predict(Grid(np.random.default_rng(2).random((8, 8))), init_params(cfg, 0), cfg)
        assert np.all(result.final.data == 0.5)
        assert len(result.sides) == 2
        assert len(result.weights) == (2 if mode == "cofusion" else 0)

    def test_too_small_rejected(self):
        cfg = EdgeNetConfig(stages=4, base_channels=1, convs_per_stage=1)
        with pytest.raises(ValueError, match="smaller"):
            forward(Grid(np.zeros((7, 16))), init_params(cfg, 0), cfg)

    def test_channel_mismatch_rejected(self):
        cfg = EdgeNetConfig(stages=1, in_channels=3)
        with pytest.raises(ValueError, match="channels"):
            forward(Grid(np.zeros((8, 8))), init_params(cfg, 0), cfg)

    def test_backbone_identical_across_modes(self):
        image = Grid(np.random.default_rng(5).random((16, 16)))
        packs = []
        for mode in ("fixed", "cofusion"):
            cfg = EdgeNetConfig(stages=3, base_channels=2, fusion_mode=mode, mid_channels=2, init_sigma=0.2)
            packs.append(forward(image, init_params(cfg, 9), cfg)[0])
        for a, b in zip(*[p.sides for p in packs]):
            assert np.array_equal(a.data, b.data)

    def test_config_rejects_unknown_mode(self):
        with pytest.raises(ValueError, match="fusion_mode"):
            EdgeNetConfig(fusion_mode="attention")

    def test_config_fills_level_groups(self):
        cfg = EdgeNetConfig(stages=3, level_groups={1: TracingConfig(lambda1=4.0)})
        assert set(cfg.level_groups) == {1, 2, 3}
        assert cfg.level_groups[1].lambda1 == 4.0
        with pytest.raises(ValueError):
            EdgeNetConfig(stages=2, level_groups={3: TracingConfig()})


class TestEdgeNetLoss:
    """Tests for the deeply supervised loss."""

    def test_single_stage_is_twice_ce(self):
        cfg = EdgeNetConfig(stages=1, base_channels=2, init_sigma=0.3)
        label = edge_label(8)
        pack, final = forward(Grid(np.random.default_rng(0).random((8, 8))), init_params(cfg, 1), cfg)
        value = total_loss(pack, final, label, cfg).item()
        ce = loss_ce(ops.sigmoid(pack.sides[0]), label, 1.1).item()
        assert value == pytest.approx(2 * ce, abs=1e-12)

    def test_level_groups_dispatched(self):
        levels = {1: TracingConfig(lambda1=4.0, lambda2=0.05, k_bdry=3),
                  2: TracingConfig(lambda1=4.0, lambda2=0.05, k_bdry=3),
                  3: TracingConfig(lambda1=2.0, lambda2=0.1, k_bdry=3)}
        final_cfg = TracingConfig(lambda1=6.0, lambda2=0.05, k_bdry=3)
        cfg = EdgeNetConfig(stages=3, base_channels=2, level_groups=levels, final_loss=final_cfg, init_sigma=0.3)
        label = edge_label(16)
        pack, final = forward(Grid(np.random.default_rng(0).random((16, 16))), init_params(cfg, 2), cfg)
        terms = loss_terms(pack, final, label, cfg)
        assert terms.bdry > 0 and terms.tex > 0
        assert terms.total.item() == pytest.approx(terms.ce + terms.bdry + terms.tex, rel=1e-12)

    def test_label_mismatch(self):
        cfg = EdgeNetConfig(stages=1, base_channels=2)
        pack, final = forward(Grid(np.zeros((8, 8))), init_params(cfg, 0), cfg)
        with pytest.raises(ValueError, match="label"):
            total_loss(pack, final, edge_label(6), cfg)

    @pytest.mark.parametrize("mode", ["fixed", "cofusion"])
    def test_gradients_reach_every_parameter(self, mode):
        cfg = EdgeNetConfig(
            stages=2, convs_per_stage=1, base_channels=4, fusion_mode=mode, mid_channels=4, init_sigma=0.3,
            level_groups={s: TracingConfig(lambda1=1.0, lambda2=0.1, k_bdry=3) for s in (1, 2)},
        )
        state = init_params(cfg, 4)
        pack, final = forward(Grid(np.random.default_rng(4).random((16, 16))), state, cfg)
        backward(total_loss(pack, final, edge_label(16), cfg))
        for name, node in state.params.items():
            assert np.any(node.grad != 0.0), name

    def test_plain_descent_lowers_loss(self):
        cfg = EdgeNetConfig(
            stages=2, convs_per_stage=1, base_channels=4, init_sigma=0.3,
            level_groups={s: TracingConfig(lambda1=1.0, lambda2=0.05, k_bdry=3) for s in (1, 2)},
            final_loss=TracingConfig(lambda1=2.0, lambda2=0.05, k_bdry=3),
        )
        state = init_params(cfg, 6)
        image = Grid(np.random.default_rng(6).random((16, 16)))
        label = edge_label(16)
        train_cfg = TrainConfig(lr0=1e-5, momentum=0.0, weight_decay=0.0)
        losses = []
        for _ in range(10):
            state.zero_grad()
            pack, final = forward(image, state, cfg)
            loss = total_loss(pack, final, label, cfg)
            backward(loss)
            losses.append(loss.item())
            sgd_step(state, None, train_cfg, epoch=0)
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_forward_with_weights_exports_maps(self):
        cfg = EdgeNetConfig(stages=2, base_channels=2, fusion_mode="cofusion", mid_channels=2, init_sigma=0.3)
        result = forward_with_weights(Grid(np.random.default_rng(0).random((8, 8))), init_params(cfg, 0), cfg)
        assert result.weights.shape == (8, 8, 2)


class TestModelState:
    """Tests for initialization and the model file."""

    @pytest.fixture
    def state(self):
        cfg = EdgeNetConfig(stages=2, convs_per_stage=1, base_channels=2, fusion_mode="cofusion", mid_channels=3)
        s = init_params(cfg, seed=11)
        s.epoch = 7
        for name in s.momentum:
            s.momentum[name] = np.full(s.params[name].shape, 0.25)
        return s

    def test_layout_order(self):
        cfg = EdgeNetConfig(stages=2, convs_per_stage=1, base_channels=2)
        names = [p.name for p in parameter_layout(cfg)]
        assert names == [
            "stage1.conv1.weight", "stage1.conv1.bias", "stage1.head.weight", "stage1.head.bias",
            "stage2.conv1.weight", "stage2.conv1.bias", "stage2.head.weight", "stage2.head.bias",
            "fusion.weight",
        ]

    def test_fixed_weights_start_uniform(self):
        cfg = EdgeNetConfig(stages=4, base_channels=1, convs_per_stage=1)
        assert np.all(init_params(cfg, 0).params["fusion.weight"].data == 0.25)

    def test_init_deterministic(self):
        cfg = EdgeNetConfig(stages=2, base_channels=2)
        a, b = init_params(cfg, 3), init_params(cfg, 3)
        c = init_params(cfg, 4)
        assert all(np.array_equal(a.params[n].data, b.params[n].data) for n in a.params)
        assert not np.array_equal(a.params["stage1.conv1.weight"].data, c.params["stage1.conv1.weight"].data)

    def test_biases_zero(self, state):
        assert all(np.all(node.data == 0.0) for name, node in state.params.items() if name.endswith(".bias"))

    def test_round_trip_bit_identical(self, state):
        data = encode_state(state)
        assert data.startswith(MAGIC)
        restored = decode_state(data)
        assert restored.arch == state.arch
        assert restored.epoch == 7
        assert list(restored.params) == list(state.params)
        for name in state.params:
            assert restored.params[name].data.tobytes() == state.params[name].data.tobytes()
            assert np.array_equal(restored.momentum[name], state.momentum[name])
        assert encode_state(restored) == data

    def test_truncated_file(self, state):
        data = encode_state(state)
        with pytest.raises(ValueError, match="truncated"):
            decode_state(data[:-5])

    def test_bad_magic(self, state):
        with pytest.raises(ValueError, match="magic"):
            decode_state(b"XXXXXXXX" + encode_state(state)[8:])

    def test_trailing_bytes(self, state):
        with pytest.raises(ValueError, match="trailing"):
            decode_state(encode_state(state) + b"\0")

    def test_save_and_load(self, state, tmp_path):
        path = tmp_path / "m.model"
        save_state(state, path)
        assert load_state(path).epoch == 7

    def test_load_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_state(tmp_path / "none.model")

    def test_copy_is_independent(self, state):
        clone = state.copy()
        name = "stage1.conv1.weight"
        clone.params[name].set_value(Grid(np.zeros(clone.params[name].shape)))
        clone.momentum[name][:] = 9.0
        assert np.any(state.params[name].data != 0.0)
        assert np.all(state.momentum[name] == 0.25)


class TestXorShift:
    """Tests for the parameter-init generator."""

    def test_deterministic(self):
        a, b = XorShift64Star(42), XorShift64Star(42)
        assert [a.next_u64() for _ in range(5)] == [b.next_u64() for _ in range(5)]

    def test_seed_zero_usable(self):
        rng = XorShift64Star(0)
        assert len({rng.next_u64() for _ in range(10)}) == 10

    def test_uniform_range(self):
        rng = XorShift64Star(1)
        values = [rng.uniform() for _ in range(1000)]
        assert all(0.0 < v <= 1.0 for v in values)

    def test_normal_moments(self):
        values = XorShift64Star(2).normal_array((20000,), sigma=1.0)
        assert abs(values.mean()) < 0.05
        assert values.std() == pytest.approx(1.0, abs=0.05)

    def test_sigma_scales(self):
        a = XorShift64Star(5).normal_array((4, 4), sigma=1.0)
        b = XorShift64Star(5).normal_array((4, 4), sigma=0.01)
        assert np.allclose(b, a * 0.01)
