from __future__ import annotations

import json
import logging
import sys
import textwrap
from pathlib import Path

import pytest
import torch
from typer.testing import CliRunner

import semtext.cli as cli
from semtext import __version__
from semtext.dataset import read_dataset, write_dataset
from semtext.model import ModelConfig, build_model
from semtext.pipeline import segment_document
from semtext.synthetic import generate_toy_corpus
from semtext.trainer import load_model, save_model

FIXTURES = Path(__file__).parent / "fixtures" / "html"
TINY = dict(embed_dim=4, n=5, m=6, kernel_widths=(2,), filter_counts=(3,), hidden_size=4, subword_buckets=64)

runner = CliRunner()


@pytest.fixture(autouse=True)
def _detach_cli_handlers():
    yield
    root = logging.getLogger()
    for h in cli._handlers:
        root.removeHandler(h)
    cli._handlers.clear()


def model_file(path: Path, bias: list[float]) -> Path:
    model = build_model(ModelConfig(**TINY))
    with torch.no_grad():
        for param in model.parameters():
            param.zero_()
        model.crf.emission.bias.copy_(torch.tensor(bias))
    save_model(path, model)
    return path


@pytest.fixture
def main_model(tmp_path: Path) -> Path:
    return model_file(tmp_path / "main.semt", [0.0, 1.0])


@pytest.fixture
def boilerplate_model(tmp_path: Path) -> Path:
    return model_file(tmp_path / "boilerplate.semt", [1.0, 0.0])


def tiny_config(tmp_path: Path, epochs: int = 2) -> Path:
    p = tmp_path / "tiny.yaml"
    p.write_text(textwrap.dedent(f"""
        embed_dim: 4
        n: 5
        m: 6
        kernel_widths: [2]
        filter_counts: [3]
        hidden_size: 4
        subword_buckets: 64
        batch_size: 4
        epochs: {epochs}
        learning_rate: 0.05
    """).lstrip(), encoding="utf-8")
    return p


def test_version():
    result = runner.invoke(cli.app, ["--version"])
    assert result.exit_code == 0
    assert f"SemText version: {__version__}" in result.output


def test_extract_all_main_prints_every_block(tmp_path: Path, main_model: Path):
    html = FIXTURES / "02_news_article.html"
    out = tmp_path / "out.txt"
    result = runner.invoke(cli.app, ["extract", "--model", str(main_model), "-o", str(out), str(html)])
    assert result.exit_code == 0, result.output
    expected = segment_document(html.read_bytes()).texts()
    assert out.read_text(encoding="utf-8") == "".join(f"{t}\n" for t in expected)


def test_extract_all_boilerplate_prints_nothing(tmp_path: Path, boilerplate_model: Path):
    out = tmp_path / "out.txt"
    result = runner.invoke(cli.app, [
        "extract", "-m", str(boilerplate_model), "-o", str(out), str(FIXTURES / "02_news_article.html"),
    ])
    assert result.exit_code == 0, result.output
    assert out.read_text(encoding="utf-8") == ""


def test_extract_jsonl(tmp_path: Path, main_model: Path):
    html = FIXTURES / "03_case1_list.html"
    out = tmp_path / "out.jsonl"
    result = runner.invoke(cli.app, ["extract", "-m", str(main_model), "-f", "jsonl", "-o", str(out), str(html)])
    assert result.exit_code == 0, result.output
    [record] = [json.loads(line) for line in out.read_text(encoding="utf-8").splitlines()]
    assert record["source"] == str(html)
    assert record["label"] == "main"
    assert record["text"] == "Home News Sport"


def test_output_is_identical_across_jobs(tmp_path: Path, main_model: Path):
    outputs = []
    for jobs in ("1", "4"):
        out = tmp_path / f"out-{jobs}.jsonl"
        result = runner.invoke(cli.app, [
            "extract", "-m", str(main_model), "-f", "jsonl", "-j", jobs, "-o", str(out), str(FIXTURES),
        ])
        assert result.exit_code == 0, result.output
        outputs.append(out.read_text(encoding="utf-8"))
    assert outputs[0] == outputs[1]
    assert outputs[0]


def test_empty_document_exits_ok_with_empty_output(tmp_path: Path, main_model: Path):
    empty = tmp_path / "empty.html"
    empty.write_bytes(b"")
    out = tmp_path / "out.txt"
    result = runner.invoke(cli.app, ["extract", "-m", str(main_model), "-o", str(out), str(empty)])
    assert result.exit_code == 0
    assert out.read_text(encoding="utf-8") == ""


def test_missing_model_exits_3(tmp_path: Path):
    result = runner.invoke(cli.app, [
        "extract", "-m", str(tmp_path / "missing.semt"), str(FIXTURES / "01_minimal.html"),
    ])
    assert result.exit_code == cli.EXIT_MODEL


def test_corrupt_model_exits_3(tmp_path: Path):
    bad = tmp_path / "bad.semt"
    bad.write_bytes(b"not a model")
    result = runner.invoke(cli.app, ["extract", "-m", str(bad), str(FIXTURES / "01_minimal.html")])
    assert result.exit_code == cli.EXIT_MODEL


def test_missing_input_exits_2(tmp_path: Path, main_model: Path):
    result = runner.invoke(cli.app, ["extract", "-m", str(main_model), str(tmp_path / "missing.html")])
    assert result.exit_code == cli.EXIT_INPUT


def test_extract_requires_model_unless_blocks_only():
    result = runner.invoke(cli.app, ["extract", str(FIXTURES / "01_minimal.html")])
    assert result.exit_code == 2


def test_unknown_format_is_a_usage_error(main_model: Path):
    result = runner.invoke(cli.app, ["extract", "-m", str(main_model), "-f", "xml", str(FIXTURES / "01_minimal.html")])
    assert result.exit_code == 2


def test_run_maps_usage_errors_to_exit_1(monkeypatch: pytest.MonkeyPatch):
    monkeypatch.setattr(sys, "argv", ["semtext", "extract", str(FIXTURES / "01_minimal.html")])
    with pytest.raises(SystemExit) as e:
        cli.run()
    assert e.value.code == cli.EXIT_USAGE


def test_run_returns_command_exit_code(monkeypatch: pytest.MonkeyPatch, tmp_path: Path):
    monkeypatch.setattr(sys, "argv", ["semtext", "segment", str(tmp_path / "missing.html")])
    with pytest.raises(SystemExit) as e:
        cli.run()
    assert e.value.code == cli.EXIT_INPUT


def test_segment_writes_block_records(tmp_path: Path):
    out = tmp_path / "blocks.jsonl"
    result = runner.invoke(cli.app, ["segment", "-o", str(out), str(FIXTURES / "03_case1_list.html")])
    assert result.exit_code == 0, result.output
    [record] = [json.loads(line) for line in out.read_text(encoding="utf-8").splitlines()]
    assert record["text"] == "Home News Sport"
    assert "label" not in record


def test_blocks_only_matches_segment(tmp_path: Path):
    html = str(FIXTURES / "02_news_article.html")
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert runner.invoke(cli.app, ["segment", "-o", str(a), html]).exit_code == 0
    assert runner.invoke(cli.app, ["extract", "--blocks-only", "-o", str(b), html]).exit_code == 0
    assert a.read_text(encoding="utf-8") == b.read_text(encoding="utf-8")


def test_segment_include_ids(tmp_path: Path):
    html = str(FIXTURES / "20_ids.html")
    plain, with_ids = tmp_path / "plain.jsonl", tmp_path / "ids.jsonl"
    assert runner.invoke(cli.app, ["segment", "-o", str(plain), html]).exit_code == 0
    assert runner.invoke(cli.app, ["segment", "--include-ids", "-o", str(with_ids), html]).exit_code == 0
    assert len(plain.read_text(encoding="utf-8").splitlines()) == 1
    assert len(with_ids.read_text(encoding="utf-8").splitlines()) == 2


def test_keyboard_interrupt_exits_130(monkeypatch: pytest.MonkeyPatch):
    def interrupted(*args, **kwargs):
        raise KeyboardInterrupt

    monkeypatch.setattr(cli, "segment_page", interrupted)
    result = runner.invoke(cli.app, ["segment", str(FIXTURES / "01_minimal.html")])
    assert result.exit_code == cli.EXIT_INTERRUPTED


def test_synth_writes_dataset(tmp_path: Path):
    out = tmp_path / "toy.jsonl"
    result = runner.invoke(cli.app, ["synth", "--out", str(out), "--pages", "4", "--seed", "1"])
    assert result.exit_code == 0, result.output
    assert "wrote 4 pages" in result.output
    assert len(read_dataset(out)) == 4


def test_train_then_eval(tmp_path: Path):
    data = tmp_path / "toy.jsonl"
    write_dataset(data, generate_toy_corpus(pages=6, seed=2))
    model, history, report = tmp_path / "toy.semt", tmp_path / "history.json", tmp_path / "report.json"

    result = runner.invoke(cli.app, [
        "train", "--data", str(data), "--out", str(model), "--config", str(tiny_config(tmp_path)),
        "--history", str(history), "--seed", "3",
    ])
    assert result.exit_code == 0, result.output
    assert "validation P=" in result.output
    loaded = load_model(model)
    assert loaded.config.n == 5 and loaded.config.hidden_size == 4
    assert [r["epoch"] for r in json.loads(history.read_text(encoding="utf-8"))] == [1, 2]

    result = runner.invoke(cli.app, ["eval", "--data", str(data), "--model", str(model), "--report", str(report)])
    assert result.exit_code == 0, result.output
    assert "macro-F1=" in result.output
    saved = json.loads(report.read_text(encoding="utf-8"))
    assert saved["tp"] + saved["fp"] + saved["fn"] + saved["tn"] == sum(len(p) for p in read_dataset(data))


def test_train_on_empty_dataset_exits_2(tmp_path: Path):
    data = tmp_path / "empty.jsonl"
    data.write_text("", encoding="utf-8")
    result = runner.invoke(cli.app, [
        "train", "--data", str(data), "--out", str(tmp_path / "m.semt"), "--config", str(tiny_config(tmp_path)),
    ])
    assert result.exit_code == cli.EXIT_INPUT


def test_eval_with_all_main_model_has_full_recall(tmp_path: Path, main_model: Path):
    data = tmp_path / "toy.jsonl"
    write_dataset(data, generate_toy_corpus(pages=3, seed=4))
    report = tmp_path / "report.json"
    result = runner.invoke(cli.app, ["eval", "-d", str(data), "-m", str(main_model), "-r", str(report)])
    assert result.exit_code == 0, result.output
    assert json.loads(report.read_text(encoding="utf-8"))["recall"] == 1.0


def wide_vectors_config(tmp_path: Path) -> Path:
    vectors = tmp_path / "wide.vec"
    vectors.write_text("1 7\nnews 1 2 3 4 5 6 7\n", encoding="utf-8")
    p = tmp_path / "wide.yaml"
    p.write_text(f"embeddings: {vectors}\n", encoding="utf-8")
    return p


def test_eval_reads_embeddings_from_config(tmp_path: Path, main_model: Path):
    data = tmp_path / "toy.jsonl"
    write_dataset(data, generate_toy_corpus(pages=2, seed=4))
    base = ["eval", "-d", str(data), "-m", str(main_model)]
    assert runner.invoke(cli.app, base).exit_code == 0
    result = runner.invoke(cli.app, [*base, "--config", str(wide_vectors_config(tmp_path))])
    assert result.exit_code == cli.EXIT_MODEL
    assert "dimension 7" in result.output


def test_extract_reads_embeddings_from_config(tmp_path: Path, main_model: Path):
    result = runner.invoke(cli.app, [
        "extract", "-m", str(main_model), "-c", str(wide_vectors_config(tmp_path)), str(FIXTURES / "01_minimal.html"),
    ])
    assert result.exit_code == cli.EXIT_MODEL


def test_run_reports_bad_option_values_as_usage_errors(monkeypatch: pytest.MonkeyPatch, main_model: Path):
    monkeypatch.setattr(sys, "argv", ["semtext", "extract", "-m", str(main_model), "-j", "0", "x.html"])
    with pytest.raises(SystemExit) as e:
        cli.run()
    assert e.value.code == cli.EXIT_USAGE


def test_check_config_valid(tmp_path: Path):
    result = runner.invoke(cli.app, ["check-config", "--config", str(tiny_config(tmp_path))])
    assert result.exit_code == 0
    assert "Configuration is valid." in result.output


def test_check_config_invalid(tmp_path: Path):
    p = tmp_path / "bad.yaml"
    p.write_text("n: 0\n", encoding="utf-8")
    result = runner.invoke(cli.app, ["check-config", "--config", str(p)])
    assert result.exit_code == cli.EXIT_INPUT


def test_check_config_missing_file(tmp_path: Path):
    result = runner.invoke(cli.app, ["check-config", "--config", str(tmp_path / "nope.yaml")])
    assert result.exit_code == cli.EXIT_INPUT


def test_check_config_schema():
    result = runner.invoke(cli.app, ["check-config", "--schema"])
    assert result.exit_code == 0
    assert "learning_rate" in result.output
