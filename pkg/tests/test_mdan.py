import numpy as np
import pytest

from vstgan import tensor as T
from vstgan.config import TrainConfig
from vstgan.encoders import FeatureMap, build_encoder, encode
from vstgan.evolvesync import KernelSpec, LossWeights, aesl
from vstgan.gradcheck import grad_check
from vstgan.mdan import (
    FAKE,
    REAL,
    DiscriminatorParams,
    SynthesisError,
    WrongTapError,
    content_loss,
    d_score,
    d_update,
    discriminator_objective,
    style_loss,
    synthesis_objective,
    synthesize_real_samples,
    tv_prior,
)
from vstgan.optim import Adam
from vstgan.video import make_fixture


def macro_features(rng, h=16, w=16, dtype=np.float32, requires_grad=False):
    vals = T.Tensor(rng.standard_normal((32, h, w)).astype(dtype), requires_grad=requires_grad)
    return FeatureMap(vals, "macro")


class TestDScore:
    def test_score_map_matches_feature_grid(self):
        d = DiscriminatorParams.init(0)
        fm = macro_features(np.random.default_rng(0))
        scores = d_score(fm, d)
        assert scores.shape == (1, 16, 16)
        assert scores.size == fm.height * fm.width  # one patch per location

    def test_deterministic_per_seed(self):
        fm = macro_features(np.random.default_rng(1))
        s1 = d_score(fm, DiscriminatorParams.init(42)).data
        s2 = d_score(fm, DiscriminatorParams.init(42)).data
        assert np.array_equal(s1, s2)

    def test_wrong_tap_rejected(self):
        d = DiscriminatorParams.init(0)
        bad = FeatureMap(T.Tensor(np.zeros((64, 4, 4), dtype=np.float32)), "content")
        with pytest.raises(WrongTapError):
            d_score(bad, d)

    def test_gradient_wrt_features(self):
        d = DiscriminatorParams.init(3).astype(np.float64)
        rng = np.random.default_rng(3)
        c = rng.standard_normal((1, 4, 4))

        def objective(leaves):
            (f,) = leaves
            scores = d_score(FeatureMap(f, "macro"), d)
            return T.sum(T.multiply(scores, T.Tensor(c, dtype=np.float64)))

        res = grad_check(objective, [rng.standard_normal((32, 4, 4))], step=1e-5)
        assert res.max_rel_err < 1e-5


class TestStyleLoss:
    def test_satisfied_margin_is_zero(self):
        scores = T.Tensor(np.ones((1, 3, 3), dtype=np.float32))
        assert style_loss(scores, REAL).item() == 0.0

    def test_zero_scores_give_one(self):
        scores = T.Tensor(np.zeros((1, 3, 3), dtype=np.float32))
        assert style_loss(scores, REAL).item() == 1.0

    def test_per_term_hinge_oracle(self):
        scores = T.Tensor(np.array([[[-1.0, 0.5, 2.0]]]))
        got = style_loss(scores, REAL).item()
        assert got == pytest.approx((2.0 + 0.5 + 0.0) / 3.0, rel=1e-6)
        assert got == pytest.approx(0.8333, abs=1e-4)

    def test_fake_label_flips_the_margin(self):
        scores = T.Tensor(np.array([[[-2.0, 0.0, 3.0]]]))
        got = style_loss(scores, FAKE).item()
        assert got == pytest.approx((0.0 + 1.0 + 4.0) / 3.0, rel=1e-6)

    def test_unknown_label_rejected(self):
        with pytest.raises(ValueError):
            style_loss(T.Tensor(np.zeros((1, 1, 1), dtype=np.float32)), 2)


class TestContentLoss:
    def test_identical_maps_are_zero(self):
        spec = build_encoder(0)
        f = T.Tensor(np.random.default_rng(0).random((3, 16, 16)).astype(np.float32))
        fm = encode(f, "content", spec)
        assert content_loss(fm, fm).item() == 0.0

    def test_constant_offset_oracle(self):
        a = T.Tensor(np.zeros((4, 2, 2), dtype=np.float32))
        b = T.Tensor(np.full((4, 2, 2), 0.5, dtype=np.float32))
        assert content_loss(a, b).item() == pytest.approx(0.25, rel=1e-6)

    def test_symmetric(self):
        rng = np.random.default_rng(1)
        a = T.Tensor(rng.standard_normal((4, 3, 3)).astype(np.float32))
        b = T.Tensor(rng.standard_normal((4, 3, 3)).astype(np.float32))
        assert content_loss(a, b).item() == content_loss(b, a).item()

    def test_shape_mismatch_rejected(self):
        a = T.Tensor(np.zeros((4, 2, 2), dtype=np.float32))
        b = T.Tensor(np.zeros((4, 3, 3), dtype=np.float32))
        with pytest.raises(T.ShapeError):
            content_loss(a, b)


class TestTvPrior:
    def test_constant_frame_is_zero(self):
        assert tv_prior(T.Tensor(np.full((3, 5, 5), 0.7, dtype=np.float32))).item() == 0.0

    def test_two_by_two_enumeration(self):
        frame = T.Tensor(np.array([[[0.0, 1.0], [0.0, 1.0]]]))
        assert tv_prior(frame).item() == pytest.approx(2.0)

    def test_quadratic_homogeneity(self):
        rng = np.random.default_rng(2)
        f = rng.random((3, 6, 6)).astype(np.float64)
        base = tv_prior(T.Tensor(f)).item()
        scaled = tv_prior(T.Tensor(3.0 * f)).item()
        assert scaled == pytest.approx(9.0 * base, rel=1e-10)


class TestDUpdate:
    def test_zero_learning_rate_keeps_params(self):
        d = DiscriminatorParams.init(5)
        before = [p.data.copy() for p in d.params()]
        opt = Adam(d.params(), lr=0.0)
        rng = np.random.default_rng(5)
        d_update([macro_features(rng, 8, 8)], [macro_features(rng, 8, 8)], d, opt)
        for p, b in zip(d.params(), before):
            np.testing.assert_array_equal(p.data, b)

    def test_one_small_step_decreases_objective(self):
        wins = 0
        for seed in range(10):
            rng = np.random.default_rng(100 + seed)
            d = DiscriminatorParams.init(seed)
            real = [macro_features(rng, 8, 8)]
            fake = [macro_features(rng, 8, 8)]
            before = discriminator_objective(real, fake, d).item()
            d_update(real, fake, d, Adam(d.params(), lr=1e-3))
            after = discriminator_objective(real, fake, d).item()
            wins += after < before
        assert wins >= 9


def small_cfg(**kw):
    base = dict(seed=0, encoder_seed=7, synth_iterations=5)
    base.update(kw)
    return TrainConfig(**base)


def style_image(seed=11, size=16):
    return make_fixture("translating-texture", seed, 4, size).frames[0]


class TestSynthesis:
    def test_even_frame_selection(self):
        x = make_fixture("translating-square", 0, 6, 16)
        out = synthesize_real_samples(x, style_image(), small_cfg(synth_iterations=2))
        assert out.indices == [0, 2, 4]
        assert len(out.frames) == 3
        assert all(f.shape == (16, 16, 3) for f in out.frames)

    def test_segment_partition_and_window(self):
        # 12 source frames -> 6 even frames -> two 3-frame segments; the second
        # segment's evolve-sync window spans the two anchored trailing frames
        x = make_fixture("translating-square", 1, 12, 16)
        out = synthesize_real_samples(x, style_image(), small_cfg(synth_iterations=2))
        segments = sorted({row["segment"] for row in out.history})
        assert segments == [0, 1]
        assert [s["segment"] for s in out.stats] == [0, 0, 0, 1, 1, 1]

    def test_anchors_stay_bit_identical(self):
        # the first segment's result must not change when later segments run
        style = style_image()
        x_long = make_fixture("translating-square", 2, 12, 16)
        x_short = make_fixture("translating-square", 2, 12, 16)
        x_short.frames = x_short.frames[:6]
        cfg = small_cfg(synth_iterations=4)
        long_run = synthesize_real_samples(x_long, style, cfg)
        short_run = synthesize_real_samples(x_short, style, cfg)
        for k in range(3):
            assert long_run.frames[k].tobytes() == short_run.frames[k].tobytes()

    def test_outputs_clamped_and_deterministic(self):
        x = make_fixture("translating-square", 3, 6, 16)
        cfg = small_cfg(synth_iterations=6)
        a = synthesize_real_samples(x, style_image(), cfg)
        b = synthesize_real_samples(x, style_image(), cfg)
        for fa, fb in zip(a.frames, b.frames):
            assert fa.tobytes() == fb.tobytes()
            assert fa.min() >= 0.0 and fa.max() <= 1.0

    def test_empty_video_rejected(self):
        x = make_fixture("translating-square", 0, 4, 16)
        x.frames = []
        with pytest.raises(SynthesisError, match="empty"):
            synthesize_real_samples(x, style_image(), small_cfg())

    @pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
    def test_nonfinite_loss_aborts_with_iteration_index(self):
        # an absurd learning rate overflows float32 in the smoothness prior
        x = make_fixture("translating-square", 0, 4, 16)
        cfg = small_cfg(synth_iterations=8, lr=1e30)
        with pytest.raises(SynthesisError, match=r"segment 0 iteration \d"):
            synthesize_real_samples(x, style_image(), cfg)

    def test_objective_descends_on_anchored_segment(self):
        # the second segment starts against already-stylized anchors, so its
        # objective begins high and the pixel optimizer must pull it down
        x = make_fixture("translating-square", 4, 8, 16)
        cfg = small_cfg(seed=4, synth_iterations=150)
        out = synthesize_real_samples(x, style_image(), cfg)
        by_segment = {}
        for row in out.history:
            by_segment.setdefault(row["segment"], []).append(row["total"])
        assert by_segment[1][-1] < 0.6 * by_segment[1][0]

    def test_eq4_gradient_matches_finite_differences(self):
        # 2-frame 8x8 segment, no anchors, float64, fixed kernel bandwidth
        spec = build_encoder(7).as_dtype(np.float64)
        d = DiscriminatorParams.init(21).astype(np.float64)
        w = LossWeights()
        kernel = KernelSpec(1.0)
        rng = np.random.default_rng(21)
        x_window = [T.Tensor(0.15 + 0.7 * rng.random((3, 8, 8)), dtype=np.float64)
                    for _ in range(2)]

        def objective(leaves):
            total, _ = synthesis_objective(x_window, [], list(leaves), d, spec, w, kernel)
            return total

        point = [f.data + 0.1 * rng.standard_normal(f.shape) for f in x_window]
        res = grad_check(objective, point, step=1e-5)
        assert res.max_rel_err < 1e-4


def test_without_es_term_is_less_synchronized():
    # dropping the evolve-sync term from the synthesis objective should not
    # improve the temporal-smoothness metric of the result
    spec_eval = build_encoder(7)
    wins = 0
    for seed in range(5):
        x = make_fixture("translating-square", 50 + seed, 8, 16)
        x_prime_frames = [x.frames[i] for i in range(0, len(x), 2)]
        style = style_image(seed)
        cfg_on = small_cfg(seed=seed, synth_iterations=120)
        cfg_off = TrainConfig(seed=seed, encoder_seed=7, synth_iterations=120,
                              weights=LossWeights(alpha_micro=0.0, alpha_macro=0.0))
        with_es = synthesize_real_samples(x, style, cfg_on)
        without_es = synthesize_real_samples(x, style, cfg_off)
        w_eval = LossWeights()
        a_with = aesl(x_prime_frames, with_es.frames, 2, w_eval, spec_eval)
        a_without = aesl(x_prime_frames, without_es.frames, 2, w_eval, spec_eval)
        wins += a_without >= a_with
    assert wins >= 4
