import numpy as np
import pytest

from vstgan import tensor as T
from vstgan.encoders import UnknownTapError, build_encoder, encode
from vstgan.evolvesync import sample_channels
from vstgan.gradcheck import grad_check


def frame(rng, h=32, w=32, dtype=np.float32):
    return T.Tensor(rng.random((3, h, w)).astype(dtype))


def test_same_seed_is_bit_identical():
    a = build_encoder(123)
    b = build_encoder(123)
    for la, lb in zip(a.layers, b.layers):
        assert la.weight.data.tobytes() == lb.weight.data.tobytes()
        assert la.bias.data.tobytes() == lb.bias.data.tobytes()


def test_tap_shapes_for_32x32_input():
    spec = build_encoder(0)
    f = frame(np.random.default_rng(0))
    assert encode(f, "micro", spec).values.shape == (3, 32, 32)
    assert encode(f, "macro", spec).values.shape == (32, 16, 16)
    assert encode(f, "gen-enc", spec).values.shape == (48, 8, 8)
    assert encode(f, "content", spec).values.shape == (64, 4, 4)


def test_micro_tap_is_the_color_planes():
    spec = build_encoder(0)
    f = frame(np.random.default_rng(1))
    fm = encode(f, "micro", spec)
    np.testing.assert_array_equal(fm.values.data, f.data)
    planes = sample_channels(fm).samples
    assert len(planes) == 3
    for c in range(3):
        np.testing.assert_array_equal(planes[c], f.data[c])


def test_micro_split_is_lossless():
    spec = build_encoder(2)
    f = frame(np.random.default_rng(2), 8, 8)
    planes = sample_channels(encode(f, "micro", spec)).samples
    rebuilt = np.stack(planes, axis=0)
    np.testing.assert_array_equal(rebuilt, f.data)


def test_micro_perturbation_passes_through_exactly():
    # the micro tap is the identity, so a pixel perturbation IS the feature perturbation
    spec = build_encoder(3)
    base = np.random.default_rng(3).random((3, 8, 8)).astype(np.float32)
    perturbed = base + np.full_like(base, 0.125)
    a = encode(T.Tensor(base), "micro", spec).values.data
    b = encode(T.Tensor(perturbed), "micro", spec).values.data
    np.testing.assert_array_equal(a, base)
    np.testing.assert_array_equal(b, perturbed)


def test_zero_frame_gives_zero_features():
    spec = build_encoder(4)
    fm = encode(T.Tensor(np.zeros((3, 16, 16), dtype=np.float32)), "macro", spec)
    np.testing.assert_array_equal(fm.values.data, 0.0)


def test_unknown_tap_rejected():
    spec = build_encoder(0)
    with pytest.raises(UnknownTapError, match="relu9"):
        encode(frame(np.random.default_rng(0)), "relu9", spec)


def test_macro_sample_count_matches_channels():
    spec = build_encoder(5)
    fm = encode(frame(np.random.default_rng(5)), "macro", spec)
    ss = sample_channels(fm)
    assert len(ss) == 32
    np.testing.assert_array_equal(ss.samples[7], fm.values.data[7])


def test_weights_byte_identical_after_gradient_flows():
    spec = build_encoder(6)
    before = [l.weight.data.tobytes() for l in spec.layers]
    f = T.Tensor(np.random.default_rng(6).random((3, 16, 16)).astype(np.float32), requires_grad=True)
    out = T.sum(encode(f, "content", spec).values)
    (g,) = T.gradients(out, [f])
    assert g.shape == f.shape
    after = [l.weight.data.tobytes() for l in spec.layers]
    assert before == after


def test_encode_gradient_matches_finite_differences():
    spec = build_encoder(7).as_dtype(np.float64)

    def objective(leaves):
        (f,) = leaves
        return T.sum(encode(f, "macro", spec).values)

    rng = np.random.default_rng(7)
    res = grad_check(objective, [rng.random((3, 8, 8)) + 0.1], step=1e-5)
    assert res.max_rel_err < 1e-5


def test_named_weights_roundtrip():
    from vstgan.encoders import EncoderSpec
    spec = build_encoder(8)
    named = spec.named_weights()
    rebuilt = EncoderSpec.from_named(named, seed=8)
    f = frame(np.random.default_rng(8), 16, 16)
    a = encode(f, "content", spec).values.data
    b = encode(f, "content", rebuilt).values.data
    np.testing.assert_array_equal(a, b)
