"""embed: one-shot corpus-to-embedding exporter."""
from __future__ import annotations

import sys
from pathlib import Path

import click

from .export import CorpusError, EmbedJob, EncoderError, export


@click.command()
@click.option("--corpus", "corpus_path", type=click.Path(), required=True,
              help="Corpus JSONL (article_id, country, month, sentences).")
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="Output embedding binary; the id sidecar lands next to it.")
@click.option("--model", required=True,
              help="Encoder id: a sentence-transformers name/path, or hash:<dim>.")
@click.option("--batch-size", type=int, default=32, show_default=True)
@click.option("--device", default=None, help="Device hint for transformer backends.")
@click.option("--expect-dim", type=int, default=None,
              help="Fail unless the encoder emits exactly this dimension.")
def main(corpus_path: str, out_path: str, model: str, batch_size: int,
         device: str | None, expect_dim: int | None) -> None:
    """Embed every corpus sentence and write the binary table."""
    job = EmbedJob(corpus=Path(corpus_path), out=Path(out_path), model=model,
                   batch_size=batch_size, device=device, expect_dim=expect_dim)
    try:
        rows, dim = export(job)
    except (CorpusError, EncoderError, OSError, ValueError) as exc:
        click.echo(f"embed: error: {exc}".replace("\n", " "), err=True)
        sys.exit(1)
    click.echo(f"wrote {rows} rows of dim {dim} to {out_path}")


if __name__ == "__main__":
    main()
