"""
Command-line interface for preparing corpora, training, evaluating and
explaining the polarity-wise recommender.

Exit codes: 0 success, 1 usage error, 2 data error, 3 divergence or a
failed gradient certification.
"""

from __future__ import annotations

import io
import json
import logging
import statistics
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import click
import numpy as np
import typer
import yaml
from rich.console import Console
from rich.table import Table

from .. import __version__
from ..corpus import PreparedCorpus, prepare_corpus
from ..corpus.ingest import dataset_statistics, ingest_records, k_core
from ..corpus.synthetic import generate_synthetic
from ..evaluation.explain import (
    explain_rating,
    render_explanation,
    render_top_words,
    top_aspect_words,
)
from ..evaluation.metrics import evaluate, metrics_rows, render_metrics_table
from ..lib.core.banner import print_banner
from ..lib.core.config import get_settings
from ..lib.core.errors import (
    ArtifactNotFoundError,
    CheckpointError,
    ConfigError,
    DataError,
    DivergenceError,
    RPRError,
    UsageError,
)
from ..model.params import ModelParams
from ..model.rpr import RPRModel
from ..schemas.config import (
    GRID_PRESETS,
    VARIANT_ORDER,
    SyntheticConfig,
    TrainConfig,
    Variant,
    load_config,
)
from ..schemas.records import (
    AMAZON_SCHEMA,
    SCHEMA_PRESETS,
    DatasetStatistics,
    InteractionRecord,
)
from ..schemas.reports import GridReport, MetricsReport, RunManifest
from ..training.baseline import train_baseline
from ..training.certify import certify_gradients
from ..training.runner import CellRunner
from ..training.search import grid_search
from ..training.trainer import train
from ..training.variants import variant_documents, wiring_for
from .artifacts import (
    atomic_write_bytes,
    atomic_write_text,
    file_digest,
    load_corpus_cache,
    write_corpus_cache,
    write_csv,
    write_manifest,
)
from .checkpoint import load_checkpoint, save_checkpoint

logger = logging.getLogger(__name__)

CHECKPOINT_FILE = "model.ckpt"
HISTORY_FILE = "history.csv"

# --- Typer App and Console ---
app = typer.Typer(
    name="rpr",
    help="Review polarity-wise recommender: prepare, train, evaluate, explain.",
    add_completion=False,
    no_args_is_help=True,
    pretty_exceptions_enable=False,
)
console = Console()


def configure_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler(sys.stdout)],
    )


@app.callback()
def main_callback(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging."),
):
    configure_logging(verbose)


# --- Shared option helpers ---


def _now() -> datetime:
    return datetime.now(timezone.utc)


def resolve_corpus_dir(data: Path) -> Path:
    """A cache directory given directly, or a corpus name under the cache root"""
    if data.is_dir():
        return data
    return get_settings().corpus_dir(str(data))


def resolve_config(
    config_path: Optional[Path],
    seed: Optional[int] = None,
    variant: Optional[str] = None,
    freeze_embeddings: bool = False,
    epoch_schedule: bool = False,
) -> TrainConfig:
    """Config file values overridden by command-line flags"""
    base = load_config(config_path) if config_path else TrainConfig()
    return base.with_overrides(
        seed=seed,
        variant=variant,
        freeze_embeddings=True if freeze_embeddings else None,
        epoch_schedule=True if epoch_schedule else None,
    )


def parse_seeds(raw: Optional[str], default: int) -> List[int]:
    if not raw:
        return [default]
    try:
        seeds = [int(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"--seeds expects comma-separated integers, got {raw!r}")
    if not seeds or any(s < 0 for s in seeds):
        raise UsageError(f"--seeds expects non-negative integers, got {raw!r}")
    return seeds


def new_manifest(
    command: str,
    config: Dict[str, object],
    seeds: Sequence[int],
    inputs: Sequence[Path] = (),
) -> RunManifest:
    return RunManifest(
        command=command,
        config=config,
        seeds=list(seeds),
        input_digests={str(p): file_digest(p) for p in inputs if p.is_file()},
        tool_version=__version__,
        started_at=_now(),
    )


def finish(out: Path, manifest: RunManifest) -> None:
    manifest.finished_at = _now()
    write_manifest(out, manifest)


def build_model(
    params: ModelParams, corpus: PreparedCorpus, variant: Optional[str]
) -> RPRModel:
    name = variant or params.extra.get("variant", Variant.BASE.value)
    wiring = wiring_for(name)
    return RPRModel(
        params,
        variant_documents(corpus, wiring),
        corpus.user_index,
        corpus.item_index,
        wiring,
    )


def document_settings(config: TrainConfig) -> Dict[str, str]:
    """Document overrides a checkpoint must be evaluated with"""
    settings = {}
    if config.polarity_threshold is not None:
        settings["polarity_threshold"] = repr(config.polarity_threshold)
    if config.max_doc_len is not None:
        settings["max_doc_len"] = str(config.max_doc_len)
    return settings


def load_model(
    data: Path, checkpoint: Path, variant: Optional[str]
) -> Tuple[ModelParams, PreparedCorpus, RPRModel]:
    params = load_checkpoint(checkpoint)
    threshold = params.extra.get("polarity_threshold")
    max_len = params.extra.get("max_doc_len")
    corpus = load_corpus_cache(
        resolve_corpus_dir(data),
        float(threshold) if threshold is not None else None,
        int(max_len) if max_len is not None else None,
    )
    if params.vocab_digest != corpus.vocab.digest():
        raise CheckpointError(
            f"checkpoint {checkpoint} was trained on another vocabulary"
        )
    return params, corpus, build_model(params, corpus, variant)


def render_statistics(stats: DatasetStatistics) -> Table:
    table = Table(title="Dataset statistics")
    table.add_column("Users", justify="right")
    table.add_column("Items", justify="right")
    table.add_column("Ratings", justify="right")
    table.add_column("Density", justify="right")
    table.add_column("Positive", justify="right")
    table.add_column("Users by positive fraction (tenths)")
    table.add_row(
        str(stats.n_users),
        str(stats.n_items),
        str(stats.n_ratings),
        f"{stats.density:.5f}",
        f"{stats.positive_fraction:.3f}",
        " ".join(str(n) for n in stats.imbalance_histogram),
    )
    return table


def render_grid(report: GridReport) -> Table:
    table = Table(title="Grid search (validation MSE)")
    for column in ("#", "f", "aspects", "lr", "batch", "seed", "val MSE", "epoch"):
        table.add_column(column, justify="right")
    for cell in report.cells:
        style = "bold green" if cell.index == report.best_index else None
        table.add_row(
            str(cell.index),
            str(cell.n_factors),
            str(cell.n_aspects),
            f"{cell.learning_rate:g}",
            str(cell.batch_size),
            str(cell.seed),
            f"{cell.val_mse:.4f}",
            str(cell.best_epoch or "-"),
            style=style,
        )
    return table


def grid_rows(report: GridReport) -> List[List[str]]:
    rows = [
        [
            "index",
            "n_factors",
            "n_aspects",
            "learning_rate",
            "batch_size",
            "seed",
            "val_mse",
            "best_epoch",
        ]
    ]
    for c in report.cells:
        rows.append(
            [
                str(c.index),
                str(c.n_factors),
                str(c.n_aspects),
                repr(c.learning_rate),
                str(c.batch_size),
                str(c.seed),
                repr(c.val_mse),
                str(c.best_epoch or ""),
            ]
        )
    return rows


# --- Commands ---


@app.command()
def prepare(
    data: Path = typer.Option(..., "--data", help="Raw JSON-lines review dump."),
    name: Optional[str] = typer.Option(
        None, "--name", help="Cache name (defaults to the dump's file stem)."
    ),
    out: Optional[Path] = typer.Option(
        None, "--out", help="Cache directory (overrides $RPR_CACHE_DIR/<name>/v1)."
    ),
    seed: int = typer.Option(0, "--seed", min=0, help="Split seed."),
    embeddings: Optional[Path] = typer.Option(
        None, "--embeddings", help="Pretrained word vectors (token v1 ... vd)."
    ),
    schema: str = typer.Option("amazon", "--schema", help="amazon or yelp."),
    min_k: int = typer.Option(0, "--k-core", min=0, help="k-core filter (0: off)."),
    max_len: int = typer.Option(500, "--max-len", min=1, help="Tokens per document."),
    min_count: int = typer.Option(1, "--min-count", min=1, help="Vocabulary cutoff."),
    embedding_dim: int = typer.Option(50, "--embedding-dim", min=1),
    threshold: float = typer.Option(3.0, "--threshold", help="Positive cutoff."),
):
    """
    Ingest, split and index a review dump into the corpus cache.
    """
    if schema not in SCHEMA_PRESETS:
        known = list(SCHEMA_PRESETS)
        raise UsageError(f"unknown schema '{schema}', expected one of {known}")
    if not data.is_file():
        raise ArtifactNotFoundError(data)

    with open(data, "rb") as fh:
        records, _ = ingest_records(fh, SCHEMA_PRESETS[schema])
    if min_k > 1:
        records = k_core(records, min_k)
    if not records:
        raise DataError(f"no usable records in {data}")
    console.print(render_statistics(dataset_statistics(records, threshold)))

    with console.status("[bold cyan]Building corpus...[/bold cyan]"):
        corpus = prepare_corpus(
            records,
            seed,
            embeddings_path=embeddings,
            embedding_dim=embedding_dim,
            threshold=threshold,
            max_len=max_len,
            min_count=min_count,
        )

    target = out or get_settings().corpus_dir(name or data.stem)
    manifest = new_manifest(
        "prepare",
        {
            "schema": schema,
            "k_core": min_k,
            "max_doc_len": max_len,
            "min_count": min_count,
            "embedding_dim": embedding_dim,
            "polarity_threshold": threshold,
            "embedding_coverage": corpus.embeddings.coverage,
        },
        [seed],
        [p for p in (data, embeddings) if p is not None],
    )
    manifest.finished_at = _now()
    write_corpus_cache(target, records, corpus, manifest)
    console.print(f"[bold green]Corpus cache:[/bold green] {target}")


@app.command("train")
def train_command(
    data: Path = typer.Option(..., "--data", help="Corpus cache directory or name."),
    out: Path = typer.Option(Path("runs/train"), "--out", help="Output directory."),
    config: Optional[Path] = typer.Option(None, "--config", help="YAML config."),
    seed: Optional[int] = typer.Option(None, "--seed", min=0),
    variant: Optional[str] = typer.Option(None, "--variant"),
    freeze_embeddings: bool = typer.Option(False, "--freeze-embeddings"),
    epoch_schedule: bool = typer.Option(
        False, "--epoch-schedule", help="Alternate parameter groups per epoch."
    ),
):
    """
    Train a model and write its checkpoint, history and manifest.
    """
    cfg = resolve_config(config, seed, variant, freeze_embeddings, epoch_schedule)
    corpus_dir = resolve_corpus_dir(data)
    corpus = load_corpus_cache(corpus_dir, cfg.polarity_threshold, cfg.max_doc_len)
    print_banner(console, get_settings(), cfg, corpus_dir)

    manifest = new_manifest(
        "train",
        cfg.model_dump(mode="json"),
        [cfg.seed],
        [config] if config else [],
    )
    manifest.input_digests["corpus"] = corpus.vocab.digest()
    try:
        params, history = train(corpus, cfg)
    except DivergenceError as e:
        if e.params is not None:
            e.params.extra.update(document_settings(cfg))
            save_checkpoint(e.params, out / CHECKPOINT_FILE)
        if e.history is not None:
            write_csv(out / HISTORY_FILE, e.history.to_rows())
        finish(out, manifest)
        raise

    params.extra.update(document_settings(cfg))
    save_checkpoint(params, out / CHECKPOINT_FILE)
    write_csv(out / HISTORY_FILE, history.to_rows())
    finish(out, manifest)
    console.print(
        f"[bold green]Best epoch {history.best_epoch}[/bold green] "
        f"validation MSE {history.best_val_mse:.4f} -> {out / CHECKPOINT_FILE}"
    )


@app.command("evaluate")
def evaluate_command(
    data: Path = typer.Option(..., "--data", help="Corpus cache directory or name."),
    checkpoint: Path = typer.Option(..., "--checkpoint", help="Checkpoint file."),
    split: str = typer.Option("test", "--split", help="train, validation or test."),
    variant: Optional[str] = typer.Option(None, "--variant"),
    clip_predictions: bool = typer.Option(
        False, "--clip-predictions", help="Clip predictions to [1, 5]."
    ),
    fallback_mean: bool = typer.Option(
        False, "--fallback-mean", help="Predict the mean rating for unseen ids."
    ),
    out: Optional[Path] = typer.Option(None, "--out", help="Write metrics.csv here."),
):
    """
    Report MSE and MAE of a checkpoint on one partition.
    """
    if split not in ("train", "validation", "test"):
        raise UsageError(f"unknown split '{split}'")
    params, corpus, model = load_model(data, checkpoint, variant)
    records: List[InteractionRecord] = getattr(corpus.split, split)
    if not records:
        raise DataError(f"the {split} partition is empty")
    mean = None
    if fallback_mean:
        mean = float(np.mean([r.rating for r in corpus.split.train]))

    report = evaluate(
        model, records, clip_predictions, mean, label=model.wiring.name
    )
    console.print(render_metrics_table([report], title=f"Rating prediction ({split})"))
    if out is not None:
        write_csv(out / "metrics.csv", metrics_rows([report]))
        manifest = new_manifest("evaluate", {"split": split}, [], [checkpoint])
        finish(out, manifest)


@app.command()
def explain(
    data: Path = typer.Option(..., "--data", help="Corpus cache directory or name."),
    checkpoint: Path = typer.Option(..., "--checkpoint", help="Checkpoint file."),
    user: str = typer.Option(..., "--user", help="User id."),
    item: str = typer.Option(..., "--item", help="Item id."),
    variant: Optional[str] = typer.Option(None, "--variant"),
    top_words: int = typer.Option(
        0, "--top-words", min=0, help="Also list k top words per aspect."
    ),
    as_json: bool = typer.Option(False, "--json", help="Print the report as JSON."),
    out: Optional[Path] = typer.Option(None, "--out", help="Write the JSON here."),
):
    """
    Break one (user, item) prediction down by aspect.
    """
    params, corpus, model = load_model(data, checkpoint, variant)
    report = explain_rating(model, user, item)

    if as_json:
        console.print_json(report.model_dump_json())
    else:
        console.print(render_explanation(report))

    if top_words:
        pos, neg = model.documents[model.user_row(user)]
        for tokens, positive in ((pos, True), (neg, False)):
            ranked = top_aspect_words(params, tokens, positive, corpus.vocab, top_words)
            console.print(render_top_words(ranked, positive))

    if out is not None:
        atomic_write_text(out / "explanation.json", report.model_dump_json(indent=2))
        keys = {"user": user, "item": item}
        manifest = new_manifest("explain", keys, [], [checkpoint])
        finish(out, manifest)


@app.command()
def ablate(
    data: Path = typer.Option(..., "--data", help="Corpus cache directory or name."),
    out: Path = typer.Option(Path("runs/ablate"), "--out", help="Output directory."),
    config: Optional[Path] = typer.Option(None, "--config", help="YAML config."),
    seed: int = typer.Option(0, "--seed", min=0),
    seeds: Optional[str] = typer.Option(
        None, "--seeds", help="Comma-separated seeds; medians are reported."
    ),
    with_baseline: bool = typer.Option(
        False, "--with-baseline", help="Add the matrix-factorisation baseline."
    ),
    workers: int = typer.Option(1, "--workers", min=1),
    clip_predictions: bool = typer.Option(False, "--clip-predictions"),
):
    """
    Train the full model and its four ablations on one split.
    """
    base = resolve_config(config)
    run_seeds = parse_seeds(seeds, seed)
    corpus = load_corpus_cache(
        resolve_corpus_dir(data), base.polarity_threshold, base.max_doc_len
    )
    labels = [v.value for v in VARIANT_ORDER] + (["mf"] if with_baseline else [])
    cells: List[Tuple[str, int]] = [(lab, s) for s in run_seeds for lab in labels]

    def run_cell(cell: Tuple[str, int]) -> MetricsReport:
        label, cell_seed = cell
        if label == "mf":
            model, _ = train_baseline(corpus, base.with_overrides(seed=cell_seed))
        else:
            cfg = base.with_overrides(variant=label, seed=cell_seed)
            params, _ = train(corpus, cfg)
            model = build_model(params, corpus, label)
        return evaluate(model, corpus.split.test, clip_predictions, label=label)

    with console.status(f"[bold cyan]Training {len(cells)} models...[/bold cyan]"):
        results = CellRunner(workers).run(run_cell, cells)

    reports = []
    for label in labels:
        mine = [r for (lab, _), r in zip(cells, results) if lab == label]
        reports.append(
            MetricsReport(
                mse=statistics.median(r.mse for r in mine),
                mae=statistics.median(r.mae for r in mine),
                n=mine[0].n,
                label=label,
            )
        )
    title = f"Ablation on test (median over {len(run_seeds)} seeds)"
    console.print(render_metrics_table(reports, title=title))
    write_csv(out / "ablation.csv", metrics_rows(reports))
    finish(out, new_manifest("ablate", base.model_dump(mode="json"), run_seeds))


@app.command()
def gradcheck(
    seed: int = typer.Option(0, "--seed", min=0),
    variant: str = typer.Option(Variant.BASE.value, "--variant"),
):
    """
    Certify analytic gradients against central finite differences.
    """
    report = certify_gradients(seed, wiring_for(variant))
    if report.passed:
        status = "[bold green]PASS[/bold green]"
    else:
        status = "[bold red]FAIL[/bold red]"
    console.print(
        f"{status} max relative error {report.max_checked_relative_error:.3e} "
        f"({report.worst_parameter}{report.worst_index}) over "
        f"{report.n_coordinates} coordinates"
    )
    if not report.passed:
        raise typer.Exit(code=3)


@app.command()
def sweep(
    data: Path = typer.Option(..., "--data", help="Corpus cache directory or name."),
    out: Path = typer.Option(Path("runs/sweep"), "--out", help="Output directory."),
    config: Optional[Path] = typer.Option(None, "--config", help="YAML config."),
    preset: str = typer.Option("aspects", "--preset", help="Grid preset."),
    seed: Optional[int] = typer.Option(None, "--seed", min=0),
    variant: Optional[str] = typer.Option(None, "--variant"),
    workers: int = typer.Option(1, "--workers", min=1),
):
    """
    Grid-search hyper-parameters on validation MSE.
    """
    if preset not in GRID_PRESETS:
        raise ConfigError(f"unknown preset '{preset}', expected {list(GRID_PRESETS)}")
    base = resolve_config(config, seed, variant)
    corpus = load_corpus_cache(
        resolve_corpus_dir(data), base.polarity_threshold, base.max_doc_len
    )
    spec = GRID_PRESETS[preset]
    with console.status(f"[bold cyan]Training {spec.size} cells...[/bold cyan]"):
        best, report = grid_search(corpus, spec, base, workers=workers)

    console.print(render_grid(report))
    write_csv(out / "grid.csv", grid_rows(report))
    atomic_write_text(
        out / "best_config.yaml",
        yaml.safe_dump(best.model_dump(mode="json"), sort_keys=True),
    )
    manifest = new_manifest("sweep", base.model_dump(mode="json"), [base.seed])
    manifest.config["preset"] = preset
    finish(out, manifest)


@app.command()
def synth(
    out: Path = typer.Option(..., "--out", help="Output directory."),
    n_users: int = typer.Option(500, "--users", min=1),
    n_items: int = typer.Option(200, "--items", min=1),
    n_aspects: int = typer.Option(2, "--aspects", min=1),
    imbalance: float = typer.Option(0.5, "--imbalance", help="Positive share."),
    noise: float = typer.Option(0.0, "--noise", min=0.0),
    seed: int = typer.Option(0, "--seed", min=0),
):
    """
    Generate a review corpus with planted aspect structure.
    """
    cfg = SyntheticConfig(
        n_users=n_users,
        n_items=n_items,
        n_aspects=n_aspects,
        imbalance_ratio=imbalance,
        noise=noise,
        seed=seed,
    )
    records, truth = generate_synthetic(cfg)

    s = AMAZON_SCHEMA
    lines = [
        json.dumps(
            {
                s.user: r.user_id,
                s.item: r.item_id,
                s.rating: r.rating,
                s.review: r.review,
            }
        )
        for r in records
    ]
    atomic_write_text(out / "records.jsonl", "\n".join(lines) + "\n")
    buffer = io.BytesIO()
    np.savez(
        buffer,
        rho_p=truth.rho_p,
        rho_r=truth.rho_r,
        quality_p=truth.quality_p,
        quality_r=truth.quality_r,
        preferred_pools=np.array(truth.preferred_pools),
        rejected_pools=np.array(truth.rejected_pools),
    )
    atomic_write_bytes(out / "ground_truth.npz", buffer.getvalue())
    finish(out, new_manifest("synth", cfg.model_dump(mode="json"), [seed]))
    console.print(f"[bold green]{len(records)} records[/bold green] -> {out}")


# --- Entry points ---


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and map its outcome to an exit code"""
    try:
        rv = app(
            args=list(argv) if argv is not None else None,
            prog_name="rpr",
            standalone_mode=False,
        )
    except click.exceptions.UsageError as e:
        e.show()
        return 1
    except click.exceptions.Abort:
        console.print("[bold red]Aborted.[/bold red]")
        return 1
    except click.exceptions.ClickException as e:
        e.show()
        return e.exit_code
    except RPRError as e:
        logger.error(str(e))
        console.print(f"[bold red]Error:[/bold red] {e}")
        return e.exit_code
    return rv if isinstance(rv, int) else 0


def main():
    """Entry point for the CLI application."""
    sys.exit(run())


if __name__ == "__main__":
    main()
