import pytest

from vstgan.config import (
    ConfigError,
    TrainConfig,
    config_text,
    parse_config,
    parse_config_text,
)


def test_defaults_follow_the_recipe():
    cfg = TrainConfig()
    assert cfg.lr == 0.02
    assert cfg.beta1 == 0.5
    assert cfg.weights.delta == 3
    assert cfg.weights.alpha_micro == 0.005
    assert cfg.weights.alpha_macro == 100.0
    assert cfg.weights.omega == pytest.approx(1e-5)
    assert cfg.synth_iterations == 3000
    assert cfg.gan_iterations == 20000
    assert cfg.batch == 3
    assert cfg.segment_size == 3
    assert cfg.anchor_frames == 2
    assert cfg.bandwidth is None  # median heuristic


def test_parse_sections_and_comments():
    text = """
# tuning for the small fixture
[loss]
delta = 4
alpha_macro = 50.0

[gan]
iterations = 10
recurrent = false

[kernel]
bandwidth = 1.5
"""
    cfg = parse_config_text(text)
    assert cfg.weights.delta == 4
    assert cfg.weights.alpha_macro == 50.0
    assert cfg.weights.alpha_micro == 0.005  # untouched default
    assert cfg.gan_iterations == 10
    assert cfg.recurrent is False
    assert cfg.bandwidth == 1.5


def test_unknown_key_is_an_error():
    with pytest.raises(ConfigError, match="alpha_macroo"):
        parse_config_text("[loss]\nalpha_macroo = 2\n")


def test_unknown_section_is_an_error():
    with pytest.raises(ConfigError, match="optimizer"):
        parse_config_text("[optimizer]\nlr = 0.1\n")


def test_bad_value_reports_location():
    with pytest.raises(ConfigError, match=r"\[gan\] iterations"):
        parse_config_text("[gan]\niterations = soon\n")


def test_median_bandwidth_keyword():
    cfg = parse_config_text("[kernel]\nbandwidth = median\n")
    assert cfg.bandwidth is None


def test_roundtrip_through_canonical_text():
    cfg = TrainConfig(seed=9, encoder_seed=3, bandwidth=2.5, gan_iterations=7,
                      recurrent=False)
    again = parse_config_text(config_text(cfg))
    assert again == cfg


def test_file_parsing_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("[run]\nseed = 4\n[synthesis]\niterations = 12\n", encoding="utf-8")
    cfg = parse_config(path)
    assert cfg.seed == 4
    assert cfg.synth_iterations == 12
    override = parse_config(path, TrainConfig(batch=5))
    assert override.batch == 5
    assert override.synth_iterations == 12


def test_invalid_batch_rejected():
    with pytest.raises(ConfigError, match="batch"):
        TrainConfig(batch=1)
