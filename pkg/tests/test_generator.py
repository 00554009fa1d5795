import numpy as np
import pytest

from vstgan import tensor as T
from vstgan.config import TrainConfig
from vstgan.encoders import build_encoder
from vstgan.evolvesync import KernelSpec, LossWeights
from vstgan.generator import (
    AlignmentError,
    GeneratorParams,
    g_forward,
    gan_objective,
    stylize,
    train_gan,
)
from vstgan.gradcheck import grad_check
from vstgan.mdan import DiscriminatorParams
from vstgan.video import RealSampleSet, VideoSequence, make_fixture, to_tensors


@pytest.fixture(scope="module")
def spec():
    return build_encoder(7)


def video(seed, frames=4, size=16):
    return make_fixture("translating-square", seed, frames, size)


def real_for(x: VideoSequence) -> RealSampleSet:
    idx = list(range(0, len(x), 2))
    return RealSampleSet(idx, [x.frames[i] for i in idx])


class TestForward:
    @pytest.mark.parametrize("size", [16, 32, 48])
    def test_output_shape_equals_input_shape(self, spec, size):
        g = GeneratorParams.init(0)
        x = video(0, 4, size)
        ys = g_forward(x, g, spec)
        assert len(ys) == 4
        for y in ys:
            assert y.shape == (3, size, size)

    def test_odd_sizes_roundtrip(self, spec):
        g = GeneratorParams.init(0)
        frames = [np.random.default_rng(0).random((18, 22, 3)).astype(np.float32)] * 3
        ys = g_forward(frames, g, spec)
        assert all(y.shape == (3, 18, 22) for y in ys)

    def test_without_recurrence_identical_frames_give_identical_outputs(self, spec):
        g = GeneratorParams.init(1, recurrent=False)
        frame = np.random.default_rng(1).random((16, 16, 3)).astype(np.float32)
        ys = g_forward([frame, frame.copy(), frame.copy()], g, spec)
        for y in ys[1:]:
            np.testing.assert_array_equal(y.data, ys[0].data)

    def test_recurrence_differentiates_repeated_frames(self, spec):
        g = GeneratorParams.init(1, recurrent=True)
        frame = np.random.default_rng(1).random((16, 16, 3)).astype(np.float32)
        ys = g_forward([frame, frame.copy()], g, spec)
        assert not np.array_equal(ys[0].data, ys[1].data)

    def test_outputs_live_in_unit_interval(self, spec):
        g = GeneratorParams.init(2)
        ys = g_forward(video(2), g, spec)
        for y in ys:
            assert y.data.min() > 0.0 and y.data.max() < 1.0

    def test_gradient_of_sum_wrt_params(self, spec):
        spec64 = spec.as_dtype(np.float64)
        x = [T.Tensor(0.2 + 0.6 * np.random.default_rng(3).random((3, 8, 8)), dtype=np.float64)
             for _ in range(2)]
        base = GeneratorParams.init(3, dtype=np.float64)
        keys = [k for k in base.named()]

        from vstgan.generator import _PARAM_KEYS

        def objective(leaves):
            g = GeneratorParams(**dict(zip(_PARAM_KEYS, leaves)), recurrent=True)
            ys = g_forward(x, g, spec64)
            return T.add(T.sum(ys[0]), T.sum(ys[1]))

        point = [getattr(base, k).data for k in _PARAM_KEYS]
        res = grad_check(objective, point, step=1e-5, coords=6,
                         rng=np.random.default_rng(3))
        assert res.max_rel_err < 1e-4
        assert len(keys) == len(point)


class TestObjective:
    def test_content_terms_cover_even_frames_only(self, spec):
        d = DiscriminatorParams.init(0)
        x = video(0, 6)
        xt = to_tensors(x)
        g = GeneratorParams.init(0)
        ys = g_forward(x, g, spec)
        total, parts = gan_objective(xt, ys, real_for(x), d, spec,
                                     LossWeights(), KernelSpec(1.0))
        assert parts["n_content_terms"] == 3  # frames 0, 2, 4

    def test_unpaired_count_is_ceil_half(self, spec):
        d = DiscriminatorParams.init(0)
        for n in (4, 5, 6, 7):
            frames = make_fixture("translating-square", 1, max(n, 4), 16).frames[:n]
            x = VideoSequence(frames)
            xt = to_tensors(x)
            ys = g_forward(x, GeneratorParams.init(1), spec)
            _, parts = gan_objective(xt, ys, real_for(x), d, spec,
                                     LossWeights(), KernelSpec(1.0))
            assert parts["n_content_terms"] == -(-n // 2)

    def test_matching_real_samples_zero_the_content_term(self, spec):
        d = DiscriminatorParams.init(2)
        x = video(2, 4)
        xt = to_tensors(x)
        ys = g_forward(x, GeneratorParams.init(2), spec)
        # real samples equal to the generator outputs on paired frames
        paired = [np.transpose(np.clip(ys[i].data, 0, 1), (1, 2, 0)) for i in (0, 2)]
        real = RealSampleSet([0, 2], paired)
        ys_exact = [T.Tensor(np.transpose(f, (2, 0, 1))) for f in
                    [paired[0], x.frames[1], paired[1], x.frames[3]]]
        _, parts = gan_objective(xt, ys_exact, real, d, spec, LossWeights(), KernelSpec(1.0))
        assert parts["content"] < 1e-10

    def test_components_sum_to_total(self, spec):
        d = DiscriminatorParams.init(3)
        x = video(3, 4)
        xt = to_tensors(x)
        ys = g_forward(x, GeneratorParams.init(3), spec)
        total, parts = gan_objective(xt, ys, real_for(x), d, spec,
                                     LossWeights(), KernelSpec(1.0))
        recomputed = parts["style"] + parts["tv"] + parts["content"] + parts["es"]
        assert total.item() == pytest.approx(recomputed, abs=1e-6)

    def test_misaligned_real_samples_rejected(self, spec):
        d = DiscriminatorParams.init(4)
        x = video(4, 6)
        xt = to_tensors(x)
        ys = g_forward(x, GeneratorParams.init(4), spec)
        short = RealSampleSet([0, 2], [x.frames[0], x.frames[2]])
        with pytest.raises(AlignmentError):
            gan_objective(xt, ys, short, d, spec, LossWeights(), KernelSpec(1.0))

    def test_gradient_wrt_params_matches_finite_differences(self, spec):
        # full objective (style + tv + content + evolve-sync) on 2-frame 8x8 input
        from vstgan.generator import _PARAM_KEYS
        from vstgan.encoders import encode

        spec64 = spec.as_dtype(np.float64)
        d = DiscriminatorParams.init(5).astype(np.float64)
        rng = np.random.default_rng(5)
        x = [T.Tensor(0.15 + 0.7 * rng.random((3, 8, 8)), dtype=np.float64) for _ in range(2)]
        real = RealSampleSet([0], [rng.random((8, 8, 3)).astype(np.float32)])
        target = {0: encode(T.Tensor(np.transpose(real.frames[0], (2, 0, 1)).astype(np.float64)),
                            "content", spec64)}

        def objective(leaves):
            g = GeneratorParams(**dict(zip(_PARAM_KEYS, leaves)), recurrent=True)
            ys = g_forward(x, g, spec64)
            total, _ = gan_objective(x, ys, real, d, spec64, LossWeights(), KernelSpec(1.0),
                                     content_targets=target)
            return total

        base = GeneratorParams.init(5, dtype=np.float64)
        point = [getattr(base, k).data + 0.02 * rng.standard_normal(getattr(base, k).shape)
                 for k in _PARAM_KEYS]
        res = grad_check(objective, point, step=1e-5, coords=5, rng=np.random.default_rng(5))
        assert res.max_rel_err < 1e-4


class TestTraining:
    def test_zero_iterations_returns_initialization(self, spec):
        x = video(0, 6)
        cfg = TrainConfig(seed=0, encoder_seed=7, gan_iterations=0)
        g, history = train_gan(x, real_for(x), x.frames[0], cfg)
        fresh_seed = int(np.random.SeedSequence(0).generate_state(3)[0])
        fresh = GeneratorParams.init(fresh_seed)
        for k, arr in fresh.named().items():
            np.testing.assert_array_equal(g.named()[k], arr)
        assert history == []

    def test_short_video_rejected(self, spec):
        x = video(1, 4)
        x2 = VideoSequence(x.frames[:2])
        cfg = TrainConfig(seed=0, encoder_seed=7, gan_iterations=1)
        with pytest.raises(AlignmentError):
            train_gan(x2, real_for(x2), x2.frames[0], cfg)

    def test_misalignment_reported_with_indices(self, spec):
        x = video(2, 8)
        bad = real_for(VideoSequence(x.frames[:6]))
        cfg = TrainConfig(seed=0, encoder_seed=7, gan_iterations=1)
        with pytest.raises(AlignmentError, match=r"\[0, 2, 4\]"):
            train_gan(x, bad, x.frames[0], cfg)

    def test_training_is_deterministic(self, spec):
        x = video(3, 6)
        cfg = TrainConfig(seed=3, encoder_seed=7, gan_iterations=8)
        g1, h1 = train_gan(x, real_for(x), x.frames[0], cfg)
        g2, h2 = train_gan(x, real_for(x), x.frames[0], cfg)
        for k, arr in g1.named().items():
            assert arr.tobytes() == g2.named()[k].tobytes()
        assert h1 == h2

    def test_history_counts_iterations(self, spec):
        x = video(4, 6)
        cfg = TrainConfig(seed=4, encoder_seed=7, gan_iterations=5)
        _, history = train_gan(x, real_for(x), x.frames[0], cfg)
        assert [h["iteration"] for h in history] == list(range(5))
        assert all(h["window_start"] % 2 == 0 for h in history)

    @pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
    def test_divergence_aborts_with_history(self, spec):
        from vstgan.generator import TrainingDiverged

        x = video(5, 6)
        cfg = TrainConfig(seed=5, encoder_seed=7, gan_iterations=20, lr=1e30)
        with pytest.raises(TrainingDiverged) as exc:
            train_gan(x, real_for(x), x.frames[0], cfg)
        assert isinstance(exc.value.history, list)

    def test_desk_scale_run_descends(self, spec):
        # smoothed generator objective over 500 iterations on the 32x32 fixture
        from vstgan.mdan import synthesize_real_samples

        x = make_fixture("translating-square", 0, 10, 32)
        style = make_fixture("static-plus-noise", 11, 4, 32).frames[0]
        cfg = TrainConfig(seed=0, encoder_seed=7, synth_iterations=60, gan_iterations=500)
        real = synthesize_real_samples(x, style, cfg)
        _, history = train_gan(x, real, style, cfg)
        totals = [h["total"] for h in history]
        k = 25
        assert float(np.mean(totals[-k:])) < float(np.mean(totals[:k]))


class TestStylize:
    def test_idempotent_and_shape_preserving(self, spec):
        g = GeneratorParams.init(6)
        x = video(6, 5)
        a = stylize(x, g, spec)
        b = stylize(x, g, spec)
        assert len(a) == 5
        for fa, fb in zip(a.frames, b.frames):
            assert fa.tobytes() == fb.tobytes()
        assert a.frame_shape == x.frame_shape

    def test_handles_long_videos(self, spec):
        g = GeneratorParams.init(7)
        x = make_fixture("translating-square", 7, 64, 16)
        out = stylize(x, g, spec)
        assert len(out) == 64

    def test_outputs_have_color_variation(self, spec):
        g = GeneratorParams.init(8)
        out = stylize(video(8, 4), g, spec)
        for f in out.frames:
            assert f.std(axis=2).mean() > 0.0
