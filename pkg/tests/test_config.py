from __future__ import annotations

import textwrap
from pathlib import Path

import pytest

import semtext.config as cfg
from semtext.lexicalizer import FEATURE_MAPS


def touch(p: Path) -> Path:
    p.parent.mkdir(parents=True, exist_ok=True)
    p.touch()
    return p


def _yaml(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(textwrap.dedent(text).lstrip(), encoding="utf-8")
    return path


def test_defaults_without_file():
    conf = cfg.build_config()
    assert conf.n == 50
    assert conf.m == 85
    assert conf.learning_rate == pytest.approx(0.01)
    assert conf.feature_maps == list(FEATURE_MAPS)
    assert conf.embeddings is None and conf.data_dir is None


def test_load_config_ok(tmp_path: Path):
    vectors = touch(tmp_path / "vec.txt")
    data_dir = tmp_path / "data"
    data_dir.mkdir()
    y = f"""
    n: 20
    m: 40
    epochs: 5
    learning_rate: 0.05
    kernel_widths: [2, 3]
    filter_counts: [4, 4]
    feature_maps: [Tags, text]
    embeddings: {vectors}
    data_dir: {data_dir}
    """
    conf = cfg.load_config(_yaml(tmp_path / "semtext.yaml", y))
    assert (conf.n, conf.m, conf.epochs) == (20, 40, 5)
    assert conf.feature_maps == ["tags", "text"]
    assert conf.embeddings == vectors.resolve()
    assert conf.data_dir == data_dir.resolve()


def test_overrides_beat_file_and_none_means_unset(tmp_path: Path):
    p = _yaml(tmp_path / "c.yaml", "epochs: 5\nseed: 3\n")
    conf = cfg.build_config(p, {"epochs": 9, "seed": None})
    assert conf.epochs == 9
    assert conf.seed == 3


def test_empty_yaml_gives_defaults(tmp_path: Path):
    conf = cfg.load_config(_yaml(tmp_path / "empty.yaml", "\n"))
    assert conf == cfg.SemTextConfig()


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("n: 0\n", "n: Value error, must be a positive integer"),
        ("learning_rate: -1\n", "must be >= 0"),
        ("validation_split: 1.0\n", "validation_split"),
        ("kernel_widths: []\n", "kernel_widths"),
        ("feature_maps: [tags, links]\n", "unknown feature maps"),
        ("feature_maps: [tags, tags]\n", "must not repeat"),
        ("kernel_widths: [2, 3]\nfilter_counts: [4]\n", "same length"),
        ("subword_min_n: 6\nsubword_max_n: 3\n", "subword_min_n"),
        ("precision: float16\n", "precision"),
        ("unknown_key: 1\n", "unknown_key"),
    ],
)
def test_invalid_values_are_reported(tmp_path: Path, text: str, fragment: str):
    p = _yaml(tmp_path / "bad.yaml", text)
    with pytest.raises(cfg.ConfigLoadError) as e:
        cfg.load_config(p)
    s = str(e.value)
    assert s.startswith("Configuration error:\n")
    assert fragment in s


def test_error_lines_name_the_field(tmp_path: Path):
    p = _yaml(tmp_path / "bad.yaml", "n: 0\nepochs: 0\n")
    with pytest.raises(cfg.ConfigLoadError) as e:
        cfg.load_config(p)
    lines = str(e.value).splitlines()[1:]
    assert any(line.startswith("  - n: ") for line in lines)
    assert any(line.startswith("  - epochs: ") for line in lines)


def test_nested_sections_are_rejected(tmp_path: Path):
    p = _yaml(tmp_path / "nested.yaml", """
    training:
      epochs: 3
    n: 10
    """)
    with pytest.raises(cfg.ConfigLoadError) as e:
        cfg.load_config(p)
    assert "nested sections found: training" in str(e.value)


def test_embeddings_must_exist(tmp_path: Path):
    with pytest.raises(cfg.ConfigLoadError) as e:
        cfg.build_config(overrides={"embeddings": tmp_path / "missing.txt"})
    assert "'embeddings' does not exist" in str(e.value)


def test_embeddings_must_be_a_file(tmp_path: Path):
    with pytest.raises(cfg.ConfigLoadError) as e:
        cfg.build_config(overrides={"embeddings": tmp_path})
    assert "'embeddings' must be a file" in str(e.value)


def test_data_dir_must_be_a_directory(tmp_path: Path):
    f = touch(tmp_path / "file.tsv")
    with pytest.raises(cfg.ConfigLoadError) as e:
        cfg.build_config(overrides={"data_dir": f})
    assert "'data_dir' must be a directory" in str(e.value)
    with pytest.raises(cfg.ConfigLoadError) as e:
        cfg.build_config(overrides={"data_dir": tmp_path / "nope"})
    assert "directory does not exist" in str(e.value)


def test_load_config_non_mapping_yaml_is_wrapped(tmp_path: Path):
    p = _yaml(tmp_path / "bad.yaml", " - a\n - b\n")
    with pytest.raises(cfg.ConfigLoadError) as e:
        cfg.load_config(p)
    assert "Top-level YAML must be a mapping/object" in str(e.value)


def test_load_config_invalid_yaml_is_wrapped(tmp_path: Path):
    p = _yaml(tmp_path / "bad.yaml", "n: [1, 2\n")
    with pytest.raises(cfg.ConfigLoadError) as e:
        cfg.load_config(p)
    assert str(e.value).startswith("Configuration error:")


def test_load_config_file_not_found_is_wrapped(tmp_path: Path):
    with pytest.raises(cfg.ConfigLoadError) as e:
        cfg.load_config(tmp_path / "nope.yaml")
    s = str(e.value)
    assert "Configuration error:" in s
    assert "Config file not found" in s


def test_validation_failure_is_logged(tmp_path: Path, caplog):
    caplog.set_level("ERROR", logger="semtext.config")
    with pytest.raises(cfg.ConfigLoadError):
        cfg.build_config(overrides={"m": 0})
    assert any("Config validation failed" in r.message for r in caplog.records)


def test_train_and_model_settings():
    conf = cfg.build_config(overrides={
        "n": 12, "m": 30, "hidden_size": 16, "embed_dim": 8, "kernel_widths": [2], "filter_counts": [3],
        "momentum": 0.9, "clip_grad_norm": 5.0, "include_ids": True,
    })
    tcfg = conf.train_settings()
    assert (tcfg.n, tcfg.m, tcfg.momentum, tcfg.clip_grad_norm) == (12, 30, 0.9, 5.0)
    mcfg = conf.model_settings()
    assert (mcfg.n, mcfg.m, mcfg.embed_dim, mcfg.hidden_size) == (12, 30, 8, 16)
    assert mcfg.kernel_widths == (2,) and mcfg.filter_counts == (3,)
    assert mcfg.include_ids is True
    assert conf.model_settings(embed_dim=24).embed_dim == 24


def test_app_config_json_schema_is_dict():
    schema = cfg.app_config_json_schema()
    assert isinstance(schema, dict)
    assert "learning_rate" in schema["properties"]


def test_shipped_example_matches_defaults():
    example = Path(__file__).parents[1] / "config" / "semtext.yaml"
    assert cfg.load_config(example) == cfg.SemTextConfig()
