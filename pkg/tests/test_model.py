from __future__ import annotations

from pathlib import Path

import pydantic
import pytest
import torch

import semtext.model as mdl
from semtext.embedding import DimensionError, EmbeddingStore
from semtext.labeler import Label
from semtext.segmenter import TextBlock

TINY = dict(embed_dim=4, n=5, m=6, kernel_widths=(2,), filter_counts=(3,), hidden_size=4, subword_buckets=64)


def tiny_config(**kw) -> mdl.ModelConfig:
    return mdl.ModelConfig(**{**TINY, **kw})


BLOCKS = [
    TextBlock(("div", "nav", "ul", "li"), ("nav-menu",), "Home login subscribe"),
    TextBlock(("div", "article", "p"), ("article-body",), "The council announced a new budget."),
    TextBlock(("footer", "p"), ("site-footer",), "Copyright privacy terms"),
]


def test_defaults():
    cfg = mdl.ModelConfig()
    assert cfg.embed_dim == 50 and cfg.n == 50 and cfg.m == 85
    assert cfg.kernel_widths == (3, 5, 7) and cfg.filter_counts == (128, 128, 256)
    assert cfg.feature_maps == ("tags", "classes", "text")
    assert cfg.dtype is torch.float64


@pytest.mark.parametrize(
    "kw",
    [
        dict(n=0),
        dict(kernel_widths=(3, 5), filter_counts=(1,)),
        dict(kernel_widths=()),
        dict(feature_maps=("tags", "ids")),
        dict(feature_maps=("text", "text")),
        dict(subword_min_n=5, subword_max_n=4),
        dict(precision="float16"),
        dict(unknown=1),
    ],
)
def test_invalid_configs_raise(kw):
    with pytest.raises(pydantic.ValidationError):
        tiny_config(**kw)


def test_config_is_frozen():
    cfg = tiny_config()
    with pytest.raises(pydantic.ValidationError):
        cfg.n = 7


def test_model_uses_configured_precision():
    model = mdl.build_model(tiny_config(precision="float32"))
    assert all(p.dtype is torch.float32 for p in model.parameters())
    model = mdl.build_model(tiny_config())
    assert all(p.dtype is torch.float64 for p in model.parameters())


def test_build_model_is_seeded():
    a = mdl.build_model(tiny_config(), seed=3).state_dict()
    b = mdl.build_model(tiny_config(), seed=3).state_dict()
    c = mdl.build_model(tiny_config(), seed=4).state_dict()
    assert all(torch.equal(a[k], b[k]) for k in a)
    assert not all(torch.equal(a[k], c[k]) for k in a)


def test_featurize_shape_and_dtype():
    cfg = tiny_config()
    store = mdl.build_store(cfg)
    lex = mdl.build_lexicalizer(cfg, store)
    t = mdl.featurize(BLOCKS, lex, store, cfg)
    assert t.shape == (3, 3, 5, 4)
    assert t.dtype == torch.float64


def test_decode_returns_labels_and_posteriors():
    cfg = tiny_config()
    model = mdl.build_model(cfg, seed=0)
    store = mdl.build_store(cfg)
    t = mdl.featurize(BLOCKS, mdl.build_lexicalizer(cfg, store), store, cfg)
    labels, scores = model.decode(t)
    assert len(labels) == len(scores) == 3
    assert all(isinstance(y, Label) for y in labels)
    assert all(0.0 <= s <= 1.0 for s in scores)


def test_emission_bias_controls_decoding():
    cfg = tiny_config()
    model = mdl.build_model(cfg)
    with torch.no_grad():
        model.crf.emission.weight.zero_()
        model.crf.emission.bias.copy_(torch.tensor([0.0, 4.0]))
    store = mdl.build_store(cfg)
    t = mdl.featurize(BLOCKS, mdl.build_lexicalizer(cfg, store), store, cfg)
    labels, scores = model.decode(t)
    assert labels == [Label.MAIN] * 3
    assert min(scores) > 0.9


def test_nll_is_positive_and_checks_lengths():
    cfg = tiny_config()
    model = mdl.build_model(cfg)
    store = mdl.build_store(cfg)
    t = mdl.featurize(BLOCKS, mdl.build_lexicalizer(cfg, store), store, cfg)
    assert model.nll(t, [0, 1, 0]).item() > 0
    with pytest.raises(ValueError):
        model.nll(t, [0, 1])


def test_build_store_without_file_is_empty():
    store = mdl.build_store(tiny_config())
    assert len(store) == 0 and store.dim == 4 and store.buckets == 64


def test_build_store_rejects_dimension_mismatch(tmp_path: Path):
    p = tmp_path / "v.vec"
    p.write_text("1 3\nword 1 2 3\n", encoding="utf-8")
    with pytest.raises(DimensionError):
        mdl.build_store(tiny_config(embeddings=str(p)))


def test_lexicalizer_uses_store_vocabulary_only_when_non_empty():
    cfg = tiny_config()
    assert mdl.build_lexicalizer(cfg, EmbeddingStore.empty(4)).vocabulary is None
    store = EmbeddingStore.from_mapping({"menu": [0.0] * 4})
    lex = mdl.build_lexicalizer(cfg, store)
    assert lex.vocabulary is store
    assert lex.n == 5
