"""Command line entry points: serve, eval, sweep, demo-model."""

from __future__ import annotations

import asyncio
import json
import logging
import sys

import click

from .backend import load_mock_script, load_onnx_backend, make_mock_backend
from .backend.demo_models import build_conv_model, build_linear_model
from .core import EngineConfig, load_config, load_vocabulary, validate_config
from .errors import SignStreamError
from .evaluation import (
    directory_log_provider,
    load_annotations,
    run_offline,
    sweep as run_sweep,
    write_prediction_log,
)
from .service import DEFAULT_MAX_SESSIONS, DEFAULT_PORT, serve_forever


def _load_vocab(path):
    with open(path, "rb") as f:
        return load_vocabulary(f)


def _load_config_file(path, overrides: dict) -> EngineConfig:
    if path:
        with open(path, "rb") as f:
            cfg = load_config(f)
        if overrides:
            cfg = cfg.with_updates(**overrides)
        return cfg
    defaults = {"window_len": 32, "stride_fraction": 0.5, "avg_size": 2, "threshold": 0.5}
    defaults.update(overrides)
    return validate_config(defaults)


def _make_backend_factory(model, mock_script, vocab, cfg):
    if model and mock_script:
        raise click.UsageError("pass either --model or --mock-script, not both")
    if model:
        return lambda: load_onnx_backend(model, vocab.size,
                                         output_kind=cfg.backend_output,
                                         input_layout=cfg.input_layout)
    if mock_script:
        with open(mock_script, "rb") as f:
            script = load_mock_script(f)
        return lambda: make_mock_backend(script)
    raise click.UsageError("one of --model or --mock-script is required")


def _parse_floats(text):
    return [float(v) for v in text.split(",") if v != ""]


def _parse_range(text):
    """Accept '0.1,0.5,0.9' or 'start:stop:step' (stop inclusive)."""
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        values, v, i = [], start, 0
        while v <= stop + 1e-9:
            values.append(round(v, 10))
            i += 1
            v = start + i * step
        return values
    return _parse_floats(text)


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="debug logging")
def main(verbose):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--model", type=click.Path(exists=True), help="serialized ONNX model")
@click.option("--mock-script", type=click.Path(exists=True), help="scripted mock backend (JSON)")
@click.option("--vocab", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--port", default=DEFAULT_PORT, show_default=True)
@click.option("--host", default="0.0.0.0", show_default=True)
@click.option("--max-sessions", default=DEFAULT_MAX_SESSIONS, show_default=True)
@click.option("--static", "static_dir", type=click.Path(exists=True),
              help="directory of UI assets served over plain HTTP")
def serve(model, mock_script, vocab, config_path, port, host, max_sessions, static_dir):
    """Run the live WebSocket recognition service."""
    vocabulary = _load_vocab(vocab)
    cfg = _load_config_file(config_path, {})
    factory = _make_backend_factory(model, mock_script, vocabulary, cfg)
    factory()  # fail fast on an unloadable model
    try:
        asyncio.run(serve_forever(cfg, vocabulary, factory, host=host, port=port,
                                  max_sessions=max_sessions, static_dir=static_dir))
    except KeyboardInterrupt:
        pass


@main.command("eval")
@click.option("--model", type=click.Path(exists=True))
@click.option("--mock-script", type=click.Path(exists=True))
@click.option("--vocab", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--annotations", required=True, type=click.Path(exists=True))
@click.option("--threshold", type=float)
@click.option("--stride", type=float)
@click.option("--avg-size", type=int)
@click.option("--dump-log", type=click.Path(), help="write per-clip prediction logs (JSONL)")
def eval_cmd(model, mock_script, vocab, config_path, annotations,
             threshold, stride, avg_size, dump_log):
    """Score annotated clips offline and report pooled WER."""
    vocabulary = _load_vocab(vocab)
    overrides = {}
    if threshold is not None:
        overrides["threshold"] = threshold
    if stride is not None:
        overrides["stride_fraction"] = stride
    if avg_size is not None:
        overrides["avg_size"] = avg_size
    cfg = _load_config_file(config_path, overrides)
    factory = _make_backend_factory(model, mock_script, vocabulary, cfg)
    clips = load_annotations(annotations)

    total_errors, total_ref = 0, 0
    for i, clip in enumerate(clips):
        try:
            result = run_offline(clip, cfg, vocabulary, backend=factory())
        except SignStreamError as e:
            click.echo(f"clip {clip.source}: FAILED ({e})", err=True)
            continue
        total_errors += result.counts.distance
        total_ref += result.counts.ref_len
        click.echo(f"clip {clip.source}: wer={result.wer:.4f} "
                   f"hyp={' '.join(result.transcript.labels()) or '(empty)'}")
        if dump_log:
            path = f"{dump_log.rstrip('/')}_clip{i:03d}.jsonl" if len(clips) > 1 else dump_log
            write_prediction_log(result.prediction_log, path)
    if total_ref:
        click.echo(f"pooled WER: {total_errors / total_ref:.4f} "
                   f"({total_errors} errors / {total_ref} reference glosses)")


@main.command("sweep")
@click.option("--model", type=click.Path(exists=True))
@click.option("--mock-script", type=click.Path(exists=True))
@click.option("--logs", "logs_dir", type=click.Path(exists=True),
              help="replay saved prediction logs (stride_<s>/<clip>.jsonl)")
@click.option("--vocab", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--annotations", required=True, type=click.Path(exists=True))
@click.option("--thresholds", default="0.5,0.9,0.99", show_default=True)
@click.option("--strides", default="0.0:1.0:0.1", show_default=True)
@click.option("--avg-sizes", default="1,2,3", show_default=True)
@click.option("--out", "out_csv", required=True, type=click.Path())
@click.option("--markdown", "out_md", type=click.Path(), help="also write a Markdown grid")
def sweep_cmd(model, mock_script, logs_dir, vocab, config_path, annotations,
              thresholds, strides, avg_sizes, out_csv, out_md):
    """Evaluate the threshold x stride x avg-size grid."""
    vocabulary = _load_vocab(vocab)
    cfg = _load_config_file(config_path, {})
    clips = load_annotations(annotations)
    backend = None
    log_provider = None
    if logs_dir:
        log_provider = directory_log_provider(logs_dir)
    else:
        backend = _make_backend_factory(model, mock_script, vocabulary, cfg)()
    result = run_sweep(
        clips, cfg, vocabulary,
        thresholds=_parse_range(thresholds),
        stride_fractions=_parse_range(strides),
        avg_sizes=[int(v) for v in avg_sizes.split(",")],
        backend=backend, log_provider=log_provider)
    with open(out_csv, "w", encoding="utf-8") as f:
        f.write(result.to_csv())
    click.echo(f"wrote {len(result.cells)} cells to {out_csv}")
    if out_md:
        with open(out_md, "w", encoding="utf-8") as f:
            f.write(result.to_markdown())
        click.echo(f"wrote Markdown grid to {out_md}")
    failed = [c for c in result.cells if c.error]
    if failed:
        click.echo(f"{len(failed)} cells failed; see CSV", err=True)


@main.command("demo-model")
@click.option("--out", required=True, type=click.Path())
@click.option("--classes", default=5, show_default=True)
@click.option("--window-len", default=32, show_default=True)
@click.option("--kind", type=click.Choice(["conv", "linear"]), default="conv",
              show_default=True)
@click.option("--vocab-out", type=click.Path(), help="also write a matching vocabulary")
@click.option("--seed", default=0, show_default=True)
def demo_model(out, classes, window_len, kind, vocab_out, seed):
    """Generate a small ONNX classifier for smoke tests and benchmarks."""
    builder = build_conv_model if kind == "conv" else build_linear_model
    data = builder(classes, window_len=window_len, seed=seed)
    with open(out, "wb") as f:
        f.write(data)
    click.echo(f"wrote {kind} model ({len(data)} bytes, {classes} classes) to {out}")
    if vocab_out:
        labels = [f"gloss{i}" for i in range(classes)]
        with open(vocab_out, "w", encoding="utf-8") as f:
            json.dump(labels, f)
        click.echo(f"wrote vocabulary to {vocab_out}")


if __name__ == "__main__":
    main()
