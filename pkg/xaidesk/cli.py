"""
Command-line entry point.

Every command prints its resolved configuration to standard error. Engine
errors end the process with a single-line diagnostic and the exit code
carried by the exception: 2 for arguments, 3 for files, 4 for capability.
"""

import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Tuple

import click
from pydantic import ValidationError

from xaidesk import __version__
from xaidesk.config import settings
from xaidesk.core.exceptions import EXIT_ARGUMENT, EXIT_INTERNAL, XaiException
from xaidesk.models.dataset import gen_shapes_dataset, read_dataset, write_dataset
from xaidesk.models.network import ModelHandle, build_toycnn
from xaidesk.models.weights import load_weights, save_weights
from xaidesk.schemas.explanation import LimeConfig, ShapConfig
from xaidesk.schemas.pipeline import ExplainOptions
from xaidesk.schemas.report import METHOD_ORDER, ReportDocument
from xaidesk.schemas.segmentation import Baseline, SlicConfig
from xaidesk.services.explain_service import explain_image, overlay_row, resolve_class
from xaidesk.services.report_service import method_maps, render_grid, render_overlay, write_report
from xaidesk.services.segmentation_service import export_segmentation_pgm
from xaidesk.services.training_service import evaluate_accuracy, train as train_network
from xaidesk.services.verification_service import SUITES, run_verification
from xaidesk.utils.digest import file_digest
from xaidesk.utils.imageio import read_ppm, write_ppm
from xaidesk.utils.validators import validate_class_index, validate_image

logger = logging.getLogger(__name__)

METHOD_CHOICES = list(METHOD_ORDER) + ["all"]
# held-out evaluation data must not overlap the training seed stream
EVAL_SEED_OFFSET = 1_000_003


class XaiGroup(click.Group):
    """Group that turns engine exceptions into exit codes."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except XaiException as exc:
            click.echo(f"error: {exc.detail}", err=True)
            ctx.exit(exc.exit_code)
        except ValidationError as exc:
            error = exc.errors()[0]
            location = ".".join(str(part) for part in error["loc"])
            click.echo(f"error: invalid {location}: {error['msg']}", err=True)
            ctx.exit(EXIT_ARGUMENT)


def echo_config(ctx: click.Context) -> None:
    """Print the command's resolved parameters, defaults included."""
    resolved = {"command": ctx.info_name, **ctx.params}
    click.echo(f"config: {json.dumps(resolved, default=str)}", err=True)


def parse_class(ctx, param, value: str) -> Optional[int]:
    if value == "auto":
        return None
    try:
        index = int(value)
    except ValueError:
        raise click.BadParameter("expected 'auto' or a class index")
    if index < 0:
        raise click.BadParameter("class index must be nonnegative")
    return index


def expand_methods(methods: Tuple[str, ...]) -> List[str]:
    if "all" in methods:
        return list(METHOD_ORDER)
    return [name for name in METHOD_ORDER if name in methods]


def grid_option(rows: Optional[int], cols: Optional[int]) -> Optional[Tuple[int, int]]:
    if (rows is None) != (cols is None):
        raise click.UsageError("--grid-rows and --grid-cols must be given together")
    return None if rows is None else (rows, cols)


def load_model(path: Path) -> ModelHandle:
    return ModelHandle.from_network(load_weights(path))


@click.group(cls=XaiGroup)
@click.version_option(__version__)
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"]),
    default=settings.LOG_LEVEL,
    show_default=True,
)
def cli(log_level: str) -> None:
    """Desk-scale explainability engine: data, training, explanations and oracle checks."""
    logging.basicConfig(level=log_level, format=settings.LOG_FORMAT, stream=sys.stderr, force=True)


@cli.command("gen-data")
@click.option("--n", "count", type=int, required=True, help="Number of samples")
@click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True, help="Output directory")
@click.pass_context
def gen_data(ctx: click.Context, count: int, seed: int, out: Path) -> None:
    """Generate the synthetic shapes dataset as NNNNN_<label>.ppm files."""
    echo_config(ctx)
    paths = write_dataset(gen_shapes_dataset(count, seed), out)
    click.echo(f"Wrote {len(paths)} samples to {out}")


@cli.command()
@click.option("--data", type=click.Path(path_type=Path), required=True, help="Dataset directory")
@click.option("--epochs", type=int, default=settings.TRAIN_EPOCHS, show_default=True)
@click.option("--lr", type=float, default=settings.TRAIN_LR, show_default=True)
@click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True, help="Weights file")
@click.option("--eval-n", type=click.IntRange(0), default=settings.EVAL_SAMPLES, show_default=True,
              help="Held-out samples to generate and score after training (0 skips)")
@click.pass_context
def train(ctx: click.Context, data: Path, epochs: int, lr: float, seed: int, out: Path, eval_n: int) -> None:
    """Train the toy CNN with plain SGD."""
    echo_config(ctx)
    samples = read_dataset(data)
    for sample in samples:
        validate_image(sample.image, 64)
    network, losses = train_network(build_toycnn(seed), samples, epochs, lr, seed)
    save_weights(network, out)
    if eval_n:
        held_out = gen_shapes_dataset(eval_n, seed + EVAL_SEED_OFFSET)
        logger.info(f"Held-out accuracy on {eval_n} samples: {evaluate_accuracy(network, held_out):.4f}")
    click.echo(f"Saved weights to {out} (final loss {losses[-1]:.4f})")


def build_options(
        methods: List[str],
        grid_rows: Optional[int],
        grid_cols: Optional[int],
        segmenter: str,
        slic_k: int,
        compactness: float,
        iters: int,
        baseline_level: int,
        lime_samples: int,
        top_k: int,
        kernel_width: float,
        shap_mode: str,
        perms: int,
        seed: int,
        tap: str,
        steps: int,
        alpha: float,
        stability_runs: int,
        workers: int,
) -> ExplainOptions:
    baseline = Baseline.gray(baseline_level)
    return ExplainOptions(
        methods=methods,
        grid=grid_option(grid_rows, grid_cols),
        segmenter=segmenter,
        slic=SlicConfig(n_segments=slic_k, compactness=compactness, iterations=iters),
        baseline=baseline,
        lime=LimeConfig(n_samples=lime_samples, top_k=top_k, kernel_width=kernel_width,
                        baseline=baseline, seed=seed),
        shap=ShapConfig(mode=shap_mode, n_permutations=perms, baseline=baseline, seed=seed),
        tap_layer=tap,
        deletion_steps=steps,
        alpha=alpha,
        stability_runs=stability_runs,
        workers=workers,
    )


def explanation_options(command):
    """Options shared by explain and grid."""
    options = [
        click.option("--grid-rows", type=int, default=None, help="Grid segmentation rows"),
        click.option("--grid-cols", type=int, default=None, help="Grid segmentation columns"),
        click.option("--segmenter", type=click.Choice(["grid", "slic"]), default="grid", show_default=True),
        click.option("--slic-k", type=int, default=64, show_default=True),
        click.option("--compactness", type=float, default=10.0, show_default=True),
        click.option("--iters", type=int, default=10, show_default=True),
        click.option("--baseline-level", type=click.IntRange(0, 255), default=settings.BASELINE_GRAY,
                     show_default=True, help="Gray level replacing removed content"),
        click.option("--lime-samples", type=int, default=1000, show_default=True),
        click.option("--top-k", type=int, default=8, show_default=True),
        click.option("--kernel-width", type=float, default=0.25, show_default=True),
        click.option("--shap-mode", type=click.Choice(["exact", "mc"]), default="exact", show_default=True),
        click.option("--perms", type=int, default=1000, show_default=True, help="Monte-Carlo permutations"),
        click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=0, show_default=True),
        click.option("--tap", default=settings.GRADCAM_TAP, show_default=True, help="Grad-CAM layer"),
        click.option("--steps", type=int, default=settings.DELETION_STEPS, show_default=True,
                     help="Deletion curve steps"),
        click.option("--alpha", type=float, default=settings.OVERLAY_ALPHA, show_default=True),
        click.option("--workers", type=click.IntRange(1), default=settings.WORKERS, show_default=True),
    ]
    for option in reversed(options):
        command = option(command)
    return command


@cli.command()
@click.option("--model", "model_path", type=click.Path(path_type=Path), required=True)
@click.option("--image", "image_path", type=click.Path(path_type=Path), required=True)
@click.option("--method", type=click.Choice(METHOD_CHOICES), required=True)
@click.option("--class", "class_index", default="auto", show_default=True, callback=parse_class)
@click.option("--stability-runs", type=click.IntRange(0), default=0, show_default=True,
              help="LIME reruns with consecutive seeds for the stability score")
@click.option("--with-grid", is_flag=True, help="Also write a one-row comparison grid")
@click.option("--out", type=click.Path(path_type=Path), required=True, help="Output directory")
@explanation_options
@click.pass_context
def explain(
        ctx: click.Context,
        model_path: Path,
        image_path: Path,
        method: str,
        class_index: Optional[int],
        stability_runs: int,
        with_grid: bool,
        out: Path,
        **knobs,
) -> None:
    """Explain one image and write report.json with overlays and maps."""
    echo_config(ctx)
    model = load_model(model_path)
    image = validate_image(read_ppm(image_path), model.network.input_shape[1])
    class_index = resolve_class(model, image, class_index)
    validate_class_index(class_index, model.class_count(image))
    options = build_options(expand_methods((method,)), stability_runs=stability_runs, **knobs)

    segmentation, runs = explain_image(model, image, class_index, options)
    document = ReportDocument(
        version=settings.REPORT_VERSION,
        model_digest=file_digest(model_path),
        image=str(image_path),
        class_index=class_index,
        methods=[run.entry() for run in runs],
    )
    overlays = {run.name: render_overlay(image, run.attribution, options.alpha) for run in runs}
    maps = method_maps({run.name: run.attribution for run in runs})
    grid = None
    if with_grid:
        grid = render_grid([overlay_row(image, runs, options.alpha)], ["original"] + [run.name for run in runs])
    write_report(document, out, overlays, maps, grid)
    if any(run.attribution.kind == "superpixel" for run in runs):
        export_segmentation_pgm(segmentation, out / "segmentation.pgm")
    click.echo(f"Explained class {class_index} with {', '.join(options.methods)} into {out}")


@cli.command()
@click.option("--model", "model_path", type=click.Path(path_type=Path), required=True)
@click.option("--images", "images_dir", type=click.Path(path_type=Path), required=True,
              help="Directory of PPM images, one grid row each")
@click.option("--methods", type=click.Choice(METHOD_CHOICES), multiple=True, default=("all",), show_default=True)
@click.option("--limit", type=click.IntRange(1), default=None, help="Use only the first N images")
@click.option("--out", type=click.Path(path_type=Path), required=True, help="Grid PPM file")
@explanation_options
@click.pass_context
def grid(
        ctx: click.Context,
        model_path: Path,
        images_dir: Path,
        methods: Tuple[str, ...],
        limit: Optional[int],
        out: Path,
        **knobs,
) -> None:
    """Render the image x method comparison grid."""
    echo_config(ctx)
    model = load_model(model_path)
    paths = sorted(images_dir.glob("*.ppm")) if images_dir.is_dir() else []
    if not paths:
        raise click.BadParameter(f"no .ppm images in {images_dir}", param_hint="--images")
    paths = paths[:limit] if limit else paths
    workers = knobs.pop("workers")
    options = build_options(expand_methods(methods), stability_runs=0, workers=1, **knobs)
    side = model.network.input_shape[1]

    def row(path: Path):
        image = validate_image(read_ppm(path), side)
        _, runs = explain_image(model, image, resolve_class(model, image, None), options)
        return overlay_row(image, runs, options.alpha)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, paths))
    else:
        rows = []
        for number, path in enumerate(paths, start=1):
            rows.append(row(path))
            logger.info(f"[{number}/{len(paths)}] {path.name}")
    canvas = render_grid(rows, ["original"] + options.methods)
    write_ppm(out, canvas)
    click.echo(f"Wrote {canvas.shape[0]}x{canvas.shape[1]} grid to {out}")


@cli.command()
@click.option("--suite", type=click.Choice(list(SUITES) + ["all"]), default="all", show_default=True)
@click.pass_context
def verify(ctx: click.Context, suite: str) -> None:
    """Check primary algorithms against their brute-force oracles."""
    echo_config(ctx)
    report = run_verification(suite)
    for result in report.results:
        status = "PASS" if result.passed else "FAIL"
        click.echo(f"{result.suite}: {status} max_error={result.max_error:.3e} "
                   f"tolerance={result.tolerance:g} cases={result.cases}")
    if not report.passed:
        ctx.exit(EXIT_INTERNAL)


if __name__ == "__main__":
    cli()
