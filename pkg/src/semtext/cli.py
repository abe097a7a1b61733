from __future__ import annotations
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional, TextIO, TypeVar
import json, logging, sys, time

import typer

from . import __version__
from .config import ConfigLoadError, SemTextConfig, app_config_json_schema, build_config
from .dataset import DatasetError, read_dataset, write_dataset
from .dom import HtmlParseError, load_tag_groups
from .embedding import EmbeddingError, load_embeddings
from .encoder import ShapeError
from .labeler import LengthMismatch
from .metrics import evaluate
from .model import ModelConfig, build_lexicalizer, build_store
from .pipeline import Extractor, InputDocument, PageResult, iter_inputs, segment_page
from .resources import DataFiles, ResourceError
from .synthetic import generate_toy_corpus
from .trainer import (
    EmptyCorpus, ModelFileError, TrainConfig, TrainingError, load_model, save_model, train,
)
from .writers import WriterError, get_writer

logger = logging.getLogger("semtext.cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_MODEL = 3
EXIT_INTERRUPTED = 130

_LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s"
_handlers: list[logging.Handler] = []

# BadParameter -> UsageError -> ClickException, taken from whichever click typer ships with
_ClickException = typer.BadParameter.__mro__[2]

T = TypeVar("T")
R = TypeVar("R")


def setup_logging(verbose: bool = False, log_file: Path | None = None) -> None:
    """
    Console (stderr): WARNING+, INFO+ with --verbose.
    File (if provided): INFO by default; DEBUG with --verbose.
    """
    root = logging.getLogger()
    for h in _handlers:
        root.removeHandler(h)
        h.close()
    _handlers.clear()
    root.setLevel(logging.DEBUG)

    console = logging.StreamHandler(sys.stderr)
    console.setLevel(logging.INFO if verbose else logging.WARNING)
    console.setFormatter(logging.Formatter(_LOG_FORMAT, datefmt="%H:%M:%S"))
    _handlers.append(console)

    if log_file:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        fh = RotatingFileHandler(str(log_file), maxBytes=2_000_000, backupCount=3, encoding="utf-8")
        fh.setLevel(logging.DEBUG if verbose else logging.INFO)
        fh.setFormatter(logging.Formatter(_LOG_FORMAT, datefmt="%Y-%m-%d %H:%M:%S"))
        _handlers.append(fh)

    for h in _handlers:
        root.addHandler(h)


def _exit_code(error: BaseException) -> int:
    if isinstance(error, EmptyCorpus):
        return EXIT_INPUT
    if isinstance(error, (ModelFileError, EmbeddingError, TrainingError, ShapeError)):
        return EXIT_MODEL
    if isinstance(error, (HtmlParseError, DatasetError, ConfigLoadError, ResourceError,
                          LengthMismatch, FileNotFoundError, IsADirectoryError)):
        return EXIT_INPUT
    if isinstance(error, WriterError):
        return EXIT_USAGE
    return EXIT_INPUT


def _one_line(error: BaseException) -> str:
    origin = type(error).__module__.rsplit(".", 1)[-1]
    if origin in ("builtins", "exceptions"):
        origin = "semtext"
    text = " ".join(str(error).split()) or type(error).__name__
    return f"{origin}: {type(error).__name__}: {text}"


@contextmanager
def _reporting(command: str) -> Iterator[None]:
    start_ts = time.perf_counter()
    try:
        yield
    except (typer.Exit, _ClickException):
        raise
    except KeyboardInterrupt:
        typer.echo("\nInterrupted by user.", err=True)
        logger.warning("%s interrupted after %.2fs", command, time.perf_counter() - start_ts)
        raise typer.Exit(code=EXIT_INTERRUPTED)
    except ConfigLoadError as e:
        typer.echo(str(e), err=True)
        raise typer.Exit(code=EXIT_INPUT)
    except (OSError, RuntimeError, ValueError) as e:
        typer.echo(_one_line(e), err=True)
        logger.debug("%s failed", command, exc_info=True)
        raise typer.Exit(code=_exit_code(e))
    else:
        logger.info("%s completed in %.2fs", command, time.perf_counter() - start_ts)


def _ordered_map(fn: Callable[[T], R], items: Iterable[T], jobs: int) -> Iterator[R]:
    """Map in parallel while yielding results in input order, holding at most 2*jobs in flight."""
    if jobs <= 1:
        for item in items:
            yield fn(item)
        return
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        window = deque()
        for item in items:
            window.append(pool.submit(fn, item))
            if len(window) >= 2 * jobs:
                yield window.popleft().result()
        while window:
            yield window.popleft().result()


@contextmanager
def _output(path: Optional[Path]) -> Iterator[TextIO]:
    if path is None or str(path) == "-":
        yield sys.stdout
        sys.stdout.flush()
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        yield f


def _config(config: Optional[Path], **overrides) -> SemTextConfig:
    return build_config(config, overrides)


def _tag_groups(data_dir: Optional[Path]):
    return load_tag_groups(files=DataFiles(data_dir)) if data_dir else None


def _extractor(model_path: Path, embeddings: Optional[Path], data_dir: Optional[Path]) -> Extractor:
    model = load_model(model_path)
    mcfg: ModelConfig = model.config
    if embeddings is not None:
        mcfg = mcfg.model_copy(update={"embeddings": str(embeddings.expanduser().resolve())})
    store = build_store(mcfg)
    return Extractor(model, store, build_lexicalizer(mcfg, store, data_dir), _tag_groups(data_dir))


app = typer.Typer(help="SemText - segment HTML into text blocks and label main content vs. boilerplate.",
                  no_args_is_help=True)


@app.callback(invoke_without_command=True)
def main(version: bool = typer.Option(False, "--version", help="Show SemText version.")):
    if version:
        typer.echo(f"SemText version: {__version__}")
        raise typer.Exit()


@app.command(help="Extract main-content blocks from HTML files, a directory, or '-' for stdin.")
def extract(
    inputs: list[str] = typer.Argument(..., help="HTML file(s), directories, or '-'."),
    model: Optional[Path] = typer.Option(None, "--model", "-m", help="Trained model file."),
    embeddings: Optional[Path] = typer.Option(None, "--embeddings", "-e", help="Override the model's embeddings file."),
    fmt: str = typer.Option("text", "--format", "-f", help="Output format: text or jsonl."),
    blocks_only: bool = typer.Option(False, "--blocks-only", help="Only segment; emit one JSON record per block."),
    include_ids: bool = typer.Option(False, "--include-ids", help="With --blocks-only: append id tokens to class paths."),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Write to this file instead of stdout."),
    jobs: int = typer.Option(1, "--jobs", "-j", min=1, help="Documents processed in parallel."),
    data_dir: Optional[Path] = typer.Option(None, "--data-dir", help="Directory overriding the packaged data files."),
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Path to YAML config."),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="INFO on the console, DEBUG in the log file."),
    log_file: Path | None = typer.Option(None, "--log-file", help="Write logs to this file."),
):
    setup_logging(verbose, log_file)
    with _reporting("extract"):
        if blocks_only:
            _segment(inputs, include_ids, output, jobs, data_dir)
            return
        if model is None:
            raise typer.BadParameter("--model is required unless --blocks-only is given", param_hint="--model")
        if fmt not in ("text", "jsonl"):
            raise typer.BadParameter(f"unknown format {fmt!r}; use text or jsonl", param_hint="--format")
        cfg = _config(config, data_dir=data_dir)
        extractor = _extractor(model, embeddings or cfg.embeddings, cfg.data_dir)
        writer = get_writer(fmt)

        def run_one(doc: InputDocument) -> PageResult:
            return extractor.extract(doc.data, doc.source_id)

        with _output(output) as out:
            for page in _ordered_map(run_one, _documents(inputs), jobs):
                writer.write_page(page, out)
            writer.finish(out)


def _documents(inputs: Iterable[str]) -> Iterator[InputDocument]:
    for item in inputs:
        yield from iter_inputs(item)


def _segment(inputs, include_ids: bool, output: Optional[Path], jobs: int, data_dir: Optional[Path]) -> None:
    table = _tag_groups(data_dir)
    writer = get_writer("blocks")

    def run_one(doc: InputDocument) -> PageResult:
        return segment_page(doc.data, doc.source_id, include_ids=include_ids, table=table)

    with _output(output) as out:
        for page in _ordered_map(run_one, _documents(inputs), jobs):
            writer.write_page(page, out)
        writer.finish(out)


@app.command(help="Segment HTML into text blocks (same as extract --blocks-only).")
def segment(
    inputs: list[str] = typer.Argument(..., help="HTML file(s), directories, or '-'."),
    include_ids: bool = typer.Option(False, "--include-ids", help="Append id tokens to class paths."),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Write to this file instead of stdout."),
    jobs: int = typer.Option(1, "--jobs", "-j", min=1, help="Documents processed in parallel."),
    data_dir: Optional[Path] = typer.Option(None, "--data-dir", help="Directory overriding the packaged data files."),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="INFO on the console, DEBUG in the log file."),
    log_file: Path | None = typer.Option(None, "--log-file", help="Write logs to this file."),
):
    setup_logging(verbose, log_file)
    with _reporting("segment"):
        _segment(inputs, include_ids, output, jobs, data_dir)


@app.command("train", help="Train a model on a JSON-Lines dataset.")
def train_command(
    data: Path = typer.Option(..., "--data", "-d", help="Training data (JSON Lines)."),
    out: Path = typer.Option(..., "--out", "-o", help="Where to write the model file."),
    embeddings: Optional[Path] = typer.Option(None, "--embeddings", "-e", help="Word vectors (COUNT DIM text format)."),
    seed: Optional[int] = typer.Option(None, "--seed"),
    epochs: Optional[int] = typer.Option(None, "--epochs"),
    lr: Optional[float] = typer.Option(None, "--lr", help="SGD learning rate."),
    momentum: Optional[float] = typer.Option(None, "--momentum"),
    clip: Optional[float] = typer.Option(None, "--clip", help="Clip the gradient norm to this value."),
    batch_size: Optional[int] = typer.Option(None, "--batch-size"),
    n: Optional[int] = typer.Option(None, "--n", help="Words kept per word string."),
    m: Optional[int] = typer.Option(None, "--m", help="Maximum blocks per sub-sequence."),
    hidden: Optional[int] = typer.Option(None, "--hidden", help="LSTM hidden units per direction."),
    feature_maps: Optional[str] = typer.Option(None, "--feature-maps", help="Comma list of tags,classes,text."),
    include_ids: Optional[bool] = typer.Option(None, "--include-ids/--no-include-ids"),
    init_from: Optional[Path] = typer.Option(None, "--init-from", help="Continue training an existing model."),
    history: Optional[Path] = typer.Option(None, "--history", help="Write per-epoch loss and F1 as JSON."),
    data_dir: Optional[Path] = typer.Option(None, "--data-dir", help="Directory overriding the packaged data files."),
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Path to YAML config."),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="INFO on the console, DEBUG in the log file."),
    log_file: Path | None = typer.Option(None, "--log-file", help="Write logs to this file."),
):
    setup_logging(verbose, log_file)
    with _reporting("train"):
        cfg = _config(
            config, embeddings=embeddings, seed=seed, epochs=epochs, learning_rate=lr, momentum=momentum,
            clip_grad_norm=clip, batch_size=batch_size, n=n, m=m, hidden_size=hidden,
            feature_maps=feature_maps.split(",") if feature_maps else None,
            include_ids=include_ids, data_dir=data_dir,
        )
        tcfg = cfg.train_settings()
        initial = None
        if init_from is not None:
            initial = load_model(init_from)
            mcfg = initial.config
            if cfg.embeddings is not None:
                mcfg = mcfg.model_copy(update={"embeddings": str(cfg.embeddings)})
                initial.config = mcfg
            tcfg = TrainConfig(**{**tcfg.model_dump(), "n": mcfg.n, "m": mcfg.m})
            store = build_store(mcfg)
        elif cfg.embeddings is not None:
            store = load_embeddings(cfg.embeddings, buckets=cfg.subword_buckets, seed=cfg.subword_seed,
                                    min_n=cfg.subword_min_n, max_n=cfg.subword_max_n)
            mcfg = cfg.model_settings(embed_dim=store.dim)
        else:
            mcfg = cfg.model_settings()
            store = build_store(mcfg)

        corpus = read_dataset(data)
        lexicalizer = build_lexicalizer(mcfg, store, cfg.data_dir)
        result = train(corpus, tcfg, store=store, lexicalizer=lexicalizer, model_config=mcfg, init_from=initial)
        save_model(out, result.model)
        if history is not None:
            result.write_history(history)
        best = result.history[result.best_epoch - 1]
        typer.echo(f"epoch {best.epoch}: validation P={best.precision:.4f} R={best.recall:.4f} F1={best.f1:.4f}")


@app.command("eval", help="Score a model against a labeled JSON-Lines dataset.")
def eval_command(
    data: Path = typer.Option(..., "--data", "-d", help="Gold data (JSON Lines)."),
    model: Path = typer.Option(..., "--model", "-m", help="Trained model file."),
    report: Optional[Path] = typer.Option(None, "--report", "-r", help="Write the JSON report here."),
    embeddings: Optional[Path] = typer.Option(None, "--embeddings", "-e", help="Override the model's embeddings file."),
    data_dir: Optional[Path] = typer.Option(None, "--data-dir", help="Directory overriding the packaged data files."),
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Path to YAML config."),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="INFO on the console, DEBUG in the log file."),
    log_file: Path | None = typer.Option(None, "--log-file", help="Write logs to this file."),
):
    setup_logging(verbose, log_file)
    with _reporting("eval"):
        cfg = _config(config, data_dir=data_dir)
        extractor = _extractor(model, embeddings or cfg.embeddings, cfg.data_dir)
        pages = read_dataset(data)
        preds = [extractor.predict_page(p) for p in pages]
        result = evaluate(preds, [list(p.labels) for p in pages], [p.source_id for p in pages])
        if report is not None:
            result.write(report)
        typer.echo(f"blocks={result.total} P={result.precision:.4f} R={result.recall:.4f} "
                   f"F1={result.f1:.4f} macro-F1={result.macro_f1:.4f}")


@app.command(help="Write the generated toy corpus as JSON Lines.")
def synth(
    out: Path = typer.Option(..., "--out", "-o", help="Output dataset path."),
    pages: int = typer.Option(200, "--pages", min=1),
    seed: int = typer.Option(7, "--seed"),
    ambiguous_ratio: float = typer.Option(0.2, "--ambiguous-ratio", min=0.0, max=0.95),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="INFO on the console, DEBUG in the log file."),
):
    setup_logging(verbose, None)
    with _reporting("synth"):
        count = write_dataset(out, generate_toy_corpus(pages, seed, ambiguous_ratio))
        typer.echo(f"wrote {count} pages to {out}")


@app.command("check-config", help="Validate a SemText YAML config and report any errors.")
def check_config(
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Path to YAML config."),
    schema: bool = typer.Option(False, "--schema", help="Print the JSON schema of the config instead."),
):
    """
    Validate a config file and exit with code 0 on success, 2 on failure.
    """
    if schema:
        typer.echo(json.dumps(app_config_json_schema(), indent=2))
        return
    if config is None:
        raise typer.BadParameter("--config is required unless --schema is given", param_hint="--config")
    if not config.exists():
        typer.secho(f"Config file not found: {config}", fg=typer.colors.RED, err=True)
        raise typer.Exit(code=EXIT_INPUT)
    try:
        build_config(config)
    except ConfigLoadError as e:
        typer.secho("Config validation failed.", fg=typer.colors.RED, err=True)
        typer.echo(str(e), err=True)
        raise typer.Exit(code=EXIT_INPUT)
    typer.secho("Configuration is valid.", fg=typer.colors.GREEN)


def run() -> None:
    """Console entry point: usage errors exit 1 rather than click's 2."""
    try:
        code = app(standalone_mode=False)
    except typer.Abort:
        typer.echo("\nInterrupted by user.", err=True)
        code = EXIT_INTERRUPTED
    except _ClickException as e:
        e.show()
        code = EXIT_USAGE
    sys.exit(code if isinstance(code, int) else EXIT_OK)


if __name__ == "__main__":
    run()
