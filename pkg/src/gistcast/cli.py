"""Command-line pipeline: synth, interpolate, bootstrap, train, evaluate,
gist, topics, baseline, and report subcommands.

Every subcommand reads a declarative JSON config (flag overrides win),
seeds all randomness explicitly, embeds the config hash and seed in its
outputs, and writes files atomically. Failures exit 1 with a single-line
machine-parsable ``gistcast: error: ...`` message.
"""
from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from . import baseline as adl
from . import bootstrap as bs
from . import gist as gist_mod
from . import topics as topics_mod
from ._util import atomic_write_text, config_hash, meta_comment
from .dataset import assemble_samples, split_samples
from .embeddings import embed_collection, read_table
from .model import (
    TaskWeights,
    forward,
    load_checkpoint,
    save_checkpoint,
)
from .panel import (
    DEFAULT_DEV_END,
    DEFAULT_TRAIN_END,
    Month,
    Split,
    interpolate_ipc,
    load_corpus,
    load_ipc,
    load_labels,
    make_splits,
)
from .synthgen import SynthConfig, generate
from .trainer import TrainConfig, evaluate, save_train_log, save_train_report, train

logger = logging.getLogger(__name__)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _meta(cfg: dict, seed: int | None) -> dict:
    return {"config_hash": config_hash(cfg), "seed": seed}


def _split_bounds(cfg: dict) -> tuple[Month, Month]:
    split_cfg = cfg.get("split", {})
    train_end = Month.parse(split_cfg.get("train_end", str(DEFAULT_TRAIN_END)))
    dev_end = Month.parse(split_cfg.get("dev_end", str(DEFAULT_DEV_END)))
    return train_end, dev_end


@click.group()
def main() -> None:
    """Food-crisis forecasting pipeline."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")


def _fail(message: str) -> None:
    click.echo(f"gistcast: error: {message}", err=True)
    sys.exit(1)


def _run(fn) -> None:
    try:
        fn()
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        _fail(str(exc).replace("\n", " "))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def synth(config_path: str | None, seed: int | None, out_dir: str) -> None:
    """Generate a synthetic corpus, embeddings, labels, and risk factors."""
    def go() -> None:
        cfg = _load_config(config_path)
        synth_cfg = dict(cfg.get("synth", {}))
        if seed is not None:
            synth_cfg["seed"] = seed
        if "start" in synth_cfg:
            synth_cfg["start"] = Month.parse(synth_cfg["start"])
        data = generate(SynthConfig(**synth_cfg))
        paths = data.write(out_dir)
        click.echo(json.dumps({
            "articles": len(data.corpus),
            "sentences": len(data.table.ids),
            "labels": len(data.labels),
            "out": {k: str(v) for k, v in sorted(paths.items())},
        }, sort_keys=True))
    _run(go)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--ipc", "ipc_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def interpolate(config_path: str | None, ipc_path: str, out_path: str) -> None:
    """Interpolate quarterly IPC anchors into a monthly crisis-index CSV."""
    def go() -> None:
        cfg = _load_config(config_path)
        lines = [meta_comment(cfg, None), "country,month,fci"]
        for series in load_ipc(ipc_path):
            for month, value in interpolate_ipc(series):
                lines.append(f"{series.country},{month},{value!r}")
        atomic_write_text(out_path, "\n".join(lines) + "\n")
        click.echo(f"wrote {out_path}")
    _run(go)


@main.command("bootstrap")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
def bootstrap_cmd(config_path: str | None, corpus_path: str, seed: int | None,
                  out_path: str) -> None:
    """Augment a corpus into a pseudo-collection manifest."""
    def go() -> None:
        cfg = _load_config(config_path)
        boot = cfg.get("bootstrap", {})
        run_seed = seed if seed is not None else int(boot.get("seed", 0))
        corpus = load_corpus(corpus_path)
        pools = bs.build_pools(corpus)
        result = bs.augment(
            pools,
            m=int(boot.get("m", bs.DEFAULT_M)),
            n=int(boot.get("n", bs.DEFAULT_N)),
            k=int(boot.get("K", bs.DEFAULT_K)),
            seed=run_seed,
        )
        meta = _meta(cfg, run_seed)
        meta["skipped"] = [str(k) for k in result.skipped]
        bs.save_manifest(result, out_path, meta=meta)
        click.echo(json.dumps({
            "collections": len(result.collections),
            "pseudo_articles": result.pseudo_article_count,
            "skipped": len(result.skipped),
        }, sort_keys=True))
    _run(go)


def _load_samples(cfg: dict, manifest_path: str, embeddings_path: str, labels_path: str):
    collections = bs.load_manifest(manifest_path)
    table = read_table(embeddings_path)
    labels = load_labels(labels_path)
    samples = assemble_samples(collections, table, labels)
    if not samples:
        raise ValueError("no usable samples: check labels coverage")
    train_end, dev_end = _split_bounds(cfg)
    keys = sorted({s.key for s in samples})
    folds = len({s.fold for s in samples})
    assignment = make_splits(keys, folds=folds, train_end=train_end, dev_end=dev_end)
    return samples, split_samples(samples, assignment), collections, table


@main.command("train")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--embeddings", "embeddings_path", type=click.Path(exists=True), required=True)
@click.option("--labels", "labels_path", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--task-weights", "task_weights", type=str, default=None,
              help="Comma-separated fci,price,social loss weights.")
@click.option("--attention", type=click.Choice(["softmax", "raw"]), default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def train_cmd(config_path: str | None, manifest_path: str, embeddings_path: str,
              labels_path: str, seed: int | None, task_weights: str | None,
              attention: str | None, out_dir: str) -> None:
    """Train the multi-task attention model and write a checkpoint."""
    def go() -> None:
        cfg = _load_config(config_path)
        train_cfg_raw = dict(cfg.get("train", {}))
        model_cfg = cfg.get("model", {})
        if seed is not None:
            train_cfg_raw["seed"] = seed
        if task_weights is not None:
            train_cfg_raw["weights"] = task_weights
        if attention is not None:
            train_cfg_raw["attention"] = attention
        weights = train_cfg_raw.pop("weights", "1,1,1")
        if isinstance(weights, str):
            weights = TaskWeights.parse(weights)
        else:
            weights = TaskWeights(*weights)
        tcfg = TrainConfig(weights=weights, **train_cfg_raw)

        samples, by_split, _, _ = _load_samples(cfg, manifest_path, embeddings_path,
                                                labels_path)
        train_set = by_split[Split.TRAIN]
        dev_set = by_split[Split.DEV] or train_set
        report = train(
            train_set, dev_set, tcfg,
            d_h=int(model_cfg.get("d_h", 128)),
            shared=bool(model_cfg.get("shared", True)),
        )
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        meta = _meta(cfg, tcfg.seed)
        save_checkpoint(report.best_params, out / "checkpoint.json",
                        scaler=report.target_scaler, attention=tcfg.attention,
                        meta=meta)
        save_train_log(report, out / "train_log.csv",
                       meta=meta_comment(cfg, tcfg.seed))
        test_eval = None
        if by_split[Split.TEST]:
            test_eval = evaluate(report.best_params, by_split[Split.TEST],
                                 attention=tcfg.attention,
                                 scaler=report.target_scaler)
        save_train_report(report, out / "report.json", test_eval=test_eval, meta=meta)
        click.echo(json.dumps({
            "stop_reason": report.stop_reason.value,
            "best_step": report.best_step,
            "best_dev_rmse_fci": report.best_dev_rmse,
            "train_samples": len(train_set),
        }, sort_keys=True))
    _run(go)


@main.command("evaluate")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True), required=True)
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--embeddings", "embeddings_path", type=click.Path(exists=True), required=True)
@click.option("--labels", "labels_path", type=click.Path(exists=True), required=True)
@click.option("--split", "split_name", type=click.Choice(["train", "dev", "test", "all"]),
              default="test")
@click.option("--out", "out_path", type=click.Path(), required=True)
def evaluate_cmd(config_path: str | None, checkpoint_path: str, manifest_path: str,
                 embeddings_path: str, labels_path: str, split_name: str,
                 out_path: str) -> None:
    """Evaluate a checkpoint's RMSE overall and per country."""
    def go() -> None:
        cfg = _load_config(config_path)
        params, scaler, attention = load_checkpoint(checkpoint_path)
        samples, by_split, _, _ = _load_samples(cfg, manifest_path, embeddings_path,
                                                labels_path)
        chosen = samples if split_name == "all" else by_split[Split(split_name)]
        if not chosen:
            raise ValueError(f"no samples in split {split_name!r}")
        result = evaluate(params, chosen, attention=attention, scaler=scaler)
        obj = result.to_json()
        obj["split"] = split_name
        obj["meta"] = _meta(cfg, None)
        atomic_write_text(out_path, json.dumps(obj, sort_keys=True, indent=1) + "\n")
        click.echo(json.dumps({"rmse_fci": result.rmse_fci, "split": split_name},
                              sort_keys=True))
    _run(go)


@main.command("gist")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True), required=True)
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--embeddings", "embeddings_path", type=click.Path(exists=True), required=True)
@click.option("--labels", "labels_path", type=click.Path(exists=True), required=True)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), required=True)
@click.option("--split", "split_name", type=click.Choice(["train", "dev", "test", "all"]),
              default="test")
@click.option("--per-country", is_flag=True, default=False,
              help="Rank sentences within each country instead of globally.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
def gist_cmd(config_path: str | None, checkpoint_path: str, manifest_path: str,
             embeddings_path: str, labels_path: str, corpus_path: str,
             split_name: str, per_country: bool, out_dir: str) -> None:
    """Extract high/low gist sentences from attention traces."""
    def go() -> None:
        cfg = _load_config(config_path)
        fraction = float(cfg.get("gist", {}).get("fraction", gist_mod.DEFAULT_FRACTION))
        zero_centered = bool(cfg.get("gist", {}).get("zero_centered", True))
        params, _, attention = load_checkpoint(checkpoint_path)
        collections = bs.load_manifest(manifest_path)
        table = read_table(embeddings_path)
        labels = load_labels(labels_path)
        corpus = load_corpus(corpus_path)
        texts = {
            bs.sentence_id(a.article_id, i): text
            for a in corpus for i, text in enumerate(a.sentences)
        }
        if split_name != "all":
            train_end, dev_end = _split_bounds(cfg)
            keys = sorted({c.key for c in collections})
            assignment = make_splits(keys, folds=1, train_end=train_end, dev_end=dev_end)
            collections = [c for c in collections
                           if assignment.split_of(c.key) is Split(split_name)]
        if not collections:
            raise ValueError(f"no collections in split {split_name!r}")

        traces = []
        for coll in sorted(collections, key=lambda c: (c.key, c.fold)):
            trace = forward(embed_collection(coll, table).matrix, params, attention)
            traces.append(gist_mod.CollectionTrace(
                collection=coll, attn_w=trace.attn_w, prediction=trace.pred("fci"),
            ))
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        meta = _meta(cfg, None)
        groups = {"": traces}
        if per_country:
            groups = {}
            for t in traces:
                groups.setdefault(t.collection.key.country, []).append(t)
        reports = {}
        for name, group in sorted(groups.items()):
            scored = gist_mod.score_sentences(group, texts, zero_centered=zero_centered)
            report = gist_mod.extract_gists(scored, fraction=fraction)
            suffix = f"_{name}" if name else ""
            gist_mod.save_gist_tsv(report, out / f"gists{suffix}.tsv",
                                   meta=meta_comment(cfg, None))
            gist_mod.save_gist_summary(report, scored, out / f"gist_summary{suffix}.json",
                                       meta=meta)
            reports[name or "all"] = report.population_size
        click.echo(json.dumps({"populations": reports, "labels": len(labels)},
                              sort_keys=True))
    _run(go)


@main.command("topics")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), required=True)
@click.option("--gists", "gists_path", type=click.Path(exists=True), default=None,
              help="Gist TSV to profile against the fitted topics.")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def topics_cmd(config_path: str | None, corpus_path: str, gists_path: str | None,
               seed: int | None, out_dir: str) -> None:
    """Fit LDA on the corpus and profile gist sentences by topic."""
    def go() -> None:
        cfg = _load_config(config_path)
        lda_cfg = cfg.get("lda", {})
        run_seed = seed if seed is not None else int(lda_cfg.get("seed", 0))
        k = int(lda_cfg.get("K", topics_mod.DEFAULT_K))
        corpus = load_corpus(corpus_path)
        docs = [topics_mod.preprocess(" ".join(a.sentences)) for a in corpus]
        vocab = topics_mod.Vocabulary.build(
            docs,
            min_df=int(lda_cfg.get("min_df", 3)),
            max_df_frac=float(lda_cfg.get("max_df_frac", 0.5)),
        )
        model = topics_mod.fit_lda(
            docs, k=k,
            iterations=int(lda_cfg.get("iterations", topics_mod.DEFAULT_ITERATIONS)),
            alpha=lda_cfg.get("alpha"),
            beta=float(lda_cfg.get("beta", topics_mod.DEFAULT_BETA)),
            seed=run_seed,
            vocab=vocab,
        )
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        meta = _meta(cfg, run_seed)
        topics_mod.save_topic_model(model, out / "topic_model.json", meta=meta)
        topics_mod.save_topic_summary(model, out / "topic_summary.tsv",
                                      meta=meta_comment(cfg, run_seed))
        if gists_path is not None:
            report = _read_gist_tsv(gists_path)
            high, low = topics_mod.profile_gists(report, model, seed=run_seed)
            topics_mod.save_profiles(high, low, out / "topic_profiles.tsv",
                                     meta=meta_comment(cfg, run_seed))
        click.echo(json.dumps({"topics": model.k, "vocab": len(model.vocab)},
                              sort_keys=True))
    _run(go)


def _read_gist_tsv(path: str) -> gist_mod.GistReport:
    from .panel import CountryMonthKey
    high, low = [], []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#") or line.startswith("rank\t"):
            continue
        rank, side, w_s, country, month, fold, sid, text = line.split("\t")
        rec = gist_mod.GistRecord(
            sentence_id=sid, text=text, w_s=float(w_s),
            source=gist_mod.Occurrence(
                CountryMonthKey(country, Month.parse(month)), int(fold), 0),
            article_weight=0.0, prediction=0.0,
            side=gist_mod.Side(side),
        )
        (high if rec.side is gist_mod.Side.HIGH else low).append(rec)
    population = max(len(high) + len(low), 1)
    return gist_mod.GistReport(high=high, low=low, fraction=0.05,
                               population_size=population)


@main.command("baseline")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--labels", "labels_path", type=click.Path(exists=True), required=True)
@click.option("--traditional", "traditional_path", type=click.Path(exists=True), required=True)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None)
@click.option("--keywords", "keywords_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def baseline_cmd(config_path: str | None, labels_path: str, traditional_path: str,
                 corpus_path: str | None, keywords_path: str | None,
                 out_dir: str) -> None:
    """Fit the lagged-regression baseline and report split RMSE."""
    def go() -> None:
        cfg = _load_config(config_path)
        labels = load_labels(labels_path)
        traditional = adl.load_traditional(traditional_path)
        kw_feats, kw_names = None, ()
        if keywords_path is not None:
            if corpus_path is None:
                raise ValueError("--keywords requires --corpus")
            kw_cfg = adl.KeywordConfig.load(keywords_path)
            kw_feats = adl.keyword_features(load_corpus(corpus_path), kw_cfg)
            kw_names = kw_cfg.keywords
        ridge = float(cfg.get("baseline", {}).get("ridge", adl.DEFAULT_RIDGE))
        dummies = bool(cfg.get("baseline", {}).get("country_dummies", False))
        design = adl.build_design(labels, traditional, kw_feats, kw_names,
                                  country_dummies=dummies)
        train_end, dev_end = _split_bounds(cfg)
        assignment = make_splits(sorted({r.key for r in labels}), folds=1,
                                 train_end=train_end, dev_end=dev_end)

        def subset(split: Split) -> adl.DesignMatrix:
            mask = [assignment.split_of(k) is split for k in design.row_keys]
            idx = np.flatnonzero(mask)
            return adl.DesignMatrix(
                x=design.x[idx], y=design.y[idx],
                row_keys=[design.row_keys[i] for i in idx],
                columns=design.columns, dropped=[],
            )

        train_design = subset(Split.TRAIN)
        model = adl.fit_adl(train_design, ridge=ridge)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        meta = _meta(cfg, None)
        adl.save_adl_model(model, out / "adl_model.json", meta=meta)
        results = {}
        for split in (Split.TRAIN, Split.DEV, Split.TEST):
            part = subset(split)
            if len(part.y) == 0:
                continue
            preds = adl.predict_adl(model, part)
            per_country: dict[str, float] = {}
            for country in sorted({k.country for k in part.row_keys}):
                mask = np.array([k.country == country for k in part.row_keys])
                per_country[country] = adl.rmse(preds[mask], part.y[mask])
            results[split.value] = {
                "rmse_fci": adl.rmse(preds, part.y),
                "per_country": per_country,
                "rows": int(len(part.y)),
            }
        atomic_write_text(out / "baseline_eval.json", json.dumps(
            {"meta": meta, "results": results, "dropped_rows": len(design.dropped)},
            sort_keys=True, indent=1) + "\n")
        click.echo(json.dumps({
            "test_rmse_fci": results.get("test", {}).get("rmse_fci"),
            "rows": int(len(design.y)),
        }, sort_keys=True))
    _run(go)


@main.command("report")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--model-eval", "model_evals", type=(str, click.Path(exists=True)),
              multiple=True, help="NAME PATH pairs of model evaluation JSONs.")
@click.option("--baseline-eval", "baseline_eval", type=click.Path(exists=True),
              default=None)
@click.option("--gist-summary", "gist_summary", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
def report_cmd(config_path: str | None, model_evals: tuple[tuple[str, str], ...],
               baseline_eval: str | None, gist_summary: str | None,
               out_path: str) -> None:
    """Assemble a per-country RMSE table across model variants."""
    def go() -> None:
        cfg = _load_config(config_path)
        columns: dict[str, dict] = {}
        if baseline_eval is not None:
            obj = json.loads(Path(baseline_eval).read_text(encoding="utf-8"))
            test = obj.get("results", {}).get("test")
            if test is not None:
                columns["baseline"] = {
                    "all": test["rmse_fci"], **test.get("per_country", {})}
        for name, path in model_evals:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
            columns[name] = {"all": obj["rmse_fci"], **obj.get("per_country", {})}
        if not columns:
            raise ValueError("nothing to report: pass --model-eval or --baseline-eval")
        rows = sorted({c for col in columns.values() for c in col} - {"all"})
        table = {"all": {name: col.get("all") for name, col in columns.items()}}
        for row in rows:
            table[row] = {name: col.get(row) for name, col in columns.items()}
        obj = {"meta": _meta(cfg, None), "rmse_fci": table}
        if gist_summary is not None:
            obj["gist_summary"] = json.loads(Path(gist_summary).read_text(encoding="utf-8"))
        atomic_write_text(out_path, json.dumps(obj, sort_keys=True, indent=1) + "\n")
        click.echo(f"wrote {out_path}")
    _run(go)


if __name__ == "__main__":
    main()
