"""Experiment orchestration: train seeds, evaluate, emit reports.

A run is described by an ``ExperimentConfig`` (usually a JSON file).  For
every (architecture, seed) pair the runner trains a model with teacher
forcing and batched gradient accumulation, keeps the checkpoint with the
best greedy dev accuracy (ties go to the earlier epoch), then scores the
test set with beam search and the wug items with forced scoring.

Everything emitted is byte-deterministic for a given config: row orders
are fixed, floats are written in shortest round-trip form, and nothing
derived from wall-clock time reaches a file.  Set WUGBENCH_THREADS to
train (arch, seed) units in parallel processes; outputs are identical
either way.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import corpus as cp
from .decode import beam_search, force_score, greedy_decode, sample_decode
from .ndiff import (
    Adam,
    DROPOUT_STREAM,
    INIT_STREAM,
    SAMPLE_STREAM,
    SHUFFLE_STREAM,
    backward,
    clip_global_norm,
    load_checkpoint,
    restore_into,
    save_checkpoint,
    seeded_rng,
)
from .seq2seq import ARCHITECTURES, ModelConfig, build_model, count_parameters
from .wugeval import (
    CorrelationResult,
    accuracy_by_class,
    accuracy_correlation_grid,
    exact_match_accuracy,
    f1_by_class,
    model_rating,
    pearson,
    production_probabilities,
    spearman,
)

EN_REPORT_CLASSES = ("regular", "irregular", cp.OTHER_CLASS)
DE_REPORT_CLASSES = cp.GERMAN_CLASSES + (cp.OTHER_CLASS,)

CURVES_HEADER = ("lang", "model", "seed", "epoch", "train_loss", "dev_accuracy")
ACCURACY_HEADER = ("lang", "model", "seed", "class", "accuracy")
F1_HEADER = ("lang", "model", "seed", "class", "f1")
RATINGS_HEADER = ("lemma", "form", "class", "context", "seed",
                  "normalized_prob", "raw_logprob")
PRODUCTIONS_HEADER = ("lang", "model", "lemma", "context", "class", "probability")
CORRELATIONS_HEADER = ("lang", "model", "group", "n", "spearman_rho", "spearman_p",
                       "pearson_r", "pearson_p")


class RunnerError(Exception):
    """Configuration or orchestration problem."""


class TrainingDiverged(Exception):
    """Loss or gradients went non-finite; carries a diagnostic string."""


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a run's outputs.

    Data is given either as one ``dataset`` file (split here by
    ``split_ratios``/``split_seed``) or as explicit train/dev/test paths.
    ``model_overrides`` maps 'default' or an architecture name to
    ModelConfig field overrides, e.g. shrinking dims for smoke tests.
    """

    out_dir: str
    dataset: str | None = None
    train: str | None = None
    dev: str | None = None
    test: str | None = None
    wugs: str | None = None
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    split_seed: int = 0
    architectures: tuple[str, ...] = ARCHITECTURES
    seeds: tuple[int, ...] = tuple(range(1, 11))
    epochs: int = 50
    batch_size: int = 32
    beam_width: int = 12
    lr: float = 0.001
    clip_norm: float = 5.0
    sample_productions: int = 0
    save_checkpoints: bool = True
    model_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dataset is None and not (self.train and self.dev and self.test):
            raise RunnerError("config needs either 'dataset' or all of train/dev/test")
        if self.dataset is not None and (self.train or self.dev or self.test):
            raise RunnerError("give 'dataset' or explicit splits, not both")
        unknown = set(self.architectures) - set(ARCHITECTURES)
        if unknown:
            raise RunnerError(f"unknown architectures: {sorted(unknown)}")
        if not self.seeds:
            raise RunnerError("at least one seed is required")
        if self.epochs < 1 or self.batch_size < 1 or self.beam_width < 1:
            raise RunnerError("epochs, batch_size and beam_width must be >= 1")
        for key in self.model_overrides:
            if key != "default" and key not in ARCHITECTURES:
                raise RunnerError(f"model_overrides key {key!r} is not an architecture")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        for key in ("split_ratios", "architectures", "seeds"):
            if key in d and d[key] is not None:
                d[key] = tuple(d[key])
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise RunnerError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise RunnerError(f"bad config: {exc}") from exc

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            blob = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise RunnerError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(blob)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["split_ratios"] = list(self.split_ratios)
        d["architectures"] = list(self.architectures)
        d["seeds"] = list(self.seeds)
        return d

    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def model_config(self, arch: str, vocab_size: int) -> ModelConfig:
        overrides = dict(self.model_overrides.get("default", {}))
        overrides.update(self.model_overrides.get(arch, {}))
        return ModelConfig(arch=arch, vocab_size=vocab_size, **overrides)


def report_classes(lang: str) -> tuple[str, ...]:
    return EN_REPORT_CLASSES if lang == "en" else DE_REPORT_CLASSES


def grid_classes(lang: str) -> tuple[str, ...]:
    return cp.ENGLISH_CLASSES if lang == "en" else cp.GERMAN_CLASSES


# ---------------------------------------------------------------------------
# data loading


@dataclass(frozen=True)
class DataBundle:
    lang: str
    train: tuple[cp.InflectionExample, ...]
    dev: tuple[cp.InflectionExample, ...]
    test: tuple[cp.InflectionExample, ...]
    wugs: cp.WugSet | None
    alphabet: cp.Alphabet


def load_data(config: ExperimentConfig) -> DataBundle:
    if config.dataset is not None:
        lang, examples = cp.parse_dataset(config.dataset)
        rng = seeded_rng(config.split_seed, SHUFFLE_STREAM)
        train, dev, test = cp.split_dataset(
            examples, config.split_ratios, rng, stratify=lambda ex: ex.cls)
    else:
        lang, train = cp.parse_dataset(config.train)
        lang_dev, dev = cp.parse_dataset(config.dev)
        lang_test, test = cp.parse_dataset(config.test)
        if not (lang == lang_dev == lang_test):
            raise RunnerError("train/dev/test language headers disagree")
    wugs = None
    if config.wugs is not None:
        wugs = cp.parse_wugs(config.wugs)
        if wugs.lang != lang:
            raise RunnerError(f"wug language {wugs.lang!r} != dataset language {lang!r}")
    alphabet = cp.build_alphabet([*train, *dev, *test], [wugs] if wugs else [])
    return DataBundle(lang, tuple(train), tuple(dev), tuple(test), wugs, alphabet)


# ---------------------------------------------------------------------------
# training one (arch, seed) unit


def _greedy_accuracy(model, alphabet: cp.Alphabet,
                     examples: Sequence[cp.InflectionExample]) -> float:
    golds = [ex.form for ex in examples]
    preds = []
    for ex in examples:
        hyp = greedy_decode(model, alphabet.encode_source(ex.tags, ex.lemma))
        preds.append(alphabet.decode(hyp.symbols))
    return exact_match_accuracy(golds, preds)


@dataclass
class TrainOutcome:
    arch: str
    seed: int
    curve_rows: list[dict]
    best_epoch: int
    best_dev_accuracy: float
    param_count: int
    diverged: bool = False
    diagnostic: str = ""


def train_unit(config: ExperimentConfig, bundle: DataBundle, arch: str,
               seed: int) -> tuple[TrainOutcome, object]:
    """Train one model; returns its outcome record and the model restored to
    its best-dev checkpoint (None after divergence)."""
    mcfg = config.model_config(arch, len(bundle.alphabet))
    model = build_model(mcfg, seeded_rng(seed, INIT_STREAM))
    dropout_rng = seeded_rng(seed, DROPOUT_STREAM)
    shuffle_rng = seeded_rng(seed, SHUFFLE_STREAM)
    optim = Adam(model.params, lr=config.lr)
    encoded = [
        (bundle.alphabet.encode_source(ex.tags, ex.lemma),
         bundle.alphabet.encode_target(ex.form))
        for ex in bundle.train
    ]
    outcome = TrainOutcome(arch, seed, [], 0, -math.inf, count_parameters(model))
    best_params: dict[str, np.ndarray] | None = None

    try:
        for epoch in range(1, config.epochs + 1):
            order = shuffle_rng.permutation(len(encoded))
            epoch_loss = 0.0
            for start in range(0, len(order), config.batch_size):
                batch = order[start:start + config.batch_size]
                optim.zero_grad()
                for i in batch:
                    src, tgt = encoded[i]
                    loss = model.loss(src, tgt, rng=dropout_rng, train=True)
                    value = loss.item()
                    if not math.isfinite(value):
                        raise TrainingDiverged(
                            f"{arch} seed {seed}: non-finite loss {value} at "
                            f"epoch {epoch}, example {int(i)}"
                        )
                    epoch_loss += value
                    backward(loss)
                for p in model.params.values():
                    if p.grad is not None:
                        p.grad /= len(batch)
                norm = clip_global_norm(model.params, config.clip_norm)
                if not math.isfinite(norm):
                    raise TrainingDiverged(
                        f"{arch} seed {seed}: non-finite gradient norm at epoch {epoch}"
                    )
                optim.step()
            dev_acc = _greedy_accuracy(model, bundle.alphabet, bundle.dev)
            outcome.curve_rows.append({
                "lang": bundle.lang, "model": arch, "seed": seed, "epoch": epoch,
                "train_loss": epoch_loss / len(encoded), "dev_accuracy": dev_acc,
            })
            if dev_acc > outcome.best_dev_accuracy:
                outcome.best_dev_accuracy = dev_acc
                outcome.best_epoch = epoch
                best_params = {k: p.data.copy() for k, p in model.params.items()}
    except TrainingDiverged as exc:
        outcome.diverged = True
        outcome.diagnostic = str(exc)
        return outcome, None

    restore_into(model.params, best_params)
    return outcome, model


# ---------------------------------------------------------------------------
# evaluation of a trained model


def eval_test(model, bundle: DataBundle, beam_width: int, arch: str,
              seed: int) -> tuple[list[dict], list[dict]]:
    """Beam-decode the test set; returns (accuracy rows, f1 rows)."""
    alphabet = bundle.alphabet
    golds, preds, classes = [], [], []
    for ex in bundle.test:
        hyp = beam_search(model, alphabet.encode_source(ex.tags, ex.lemma), beam_width)[0]
        golds.append(ex.form)
        preds.append(alphabet.decode(hyp.symbols))
        classes.append(ex.cls)
    acc_rows = [{
        "lang": bundle.lang, "model": arch, "seed": seed, "class": "all",
        "accuracy": exact_match_accuracy(golds, preds),
    }]
    for cls, acc in accuracy_by_class(classes, golds, preds).items():
        acc_rows.append({"lang": bundle.lang, "model": arch, "seed": seed,
                         "class": cls, "accuracy": acc})
    f1_rows = []
    if bundle.lang == "de":
        pred_classes = [
            cp.classify_german_suffix(ex.lemma, p) for ex, p in zip(bundle.test, preds)
        ]
        for cls, f1 in f1_by_class(classes, pred_classes, DE_REPORT_CLASSES).items():
            f1_rows.append({"lang": bundle.lang, "model": arch, "seed": seed,
                            "class": cls, "f1": f1})
    return acc_rows, f1_rows


def _production_class(lang: str, item: cp.WugItem, produced: str) -> str:
    """Class of a freely produced wug form.

    German forms classify by suffix; English forms only match known
    candidate forms (there is no surface rule for irregularity), so
    anything unlisted counts as 'other'.
    """
    if lang == "de":
        return cp.classify_german_suffix(item.lemma, produced)
    for cand in item.candidates:
        if cand.form == produced:
            return cand.cls
    return cp.OTHER_CLASS


def score_wugs(model, bundle: DataBundle, config: ExperimentConfig, arch: str,
               seed: int) -> tuple[list[dict], dict[str, list[str]]]:
    """Forced-score every candidate and record this model's productions.

    Returns (ratings rows, lemma -> produced classes).  The ratings 'seed'
    column is the model identity '<arch>-seed<k>'.
    """
    alphabet = bundle.alphabet
    identity = f"{arch}-seed{seed}"
    rating_rows: list[dict] = []
    outcomes: dict[str, list[str]] = {}
    sample_rng = seeded_rng(seed, SAMPLE_STREAM) if config.sample_productions else None
    for item in bundle.wugs.items:
        for cand in item.candidates:
            src = alphabet.encode_source(cand.tags, item.lemma)
            score = force_score(model, src, alphabet.encode_target(cand.form))
            rating_rows.append({
                "lemma": item.lemma, "form": cand.form, "class": cand.cls,
                "context": item.context or cand.cls, "seed": identity,
                "normalized_prob": score.normalized_prob,
                "raw_logprob": score.raw_logprob,
            })
        src = alphabet.encode_source(item.candidates[0].tags, item.lemma)
        if config.sample_productions:
            produced = [
                alphabet.decode(sample_decode(model, src, sample_rng).symbols)
                for _ in range(config.sample_productions)
            ]
        else:
            produced = [alphabet.decode(beam_search(model, src, config.beam_width)[0].symbols)]
        outcomes[item.lemma] = [_production_class(bundle.lang, item, p) for p in produced]
    return rating_rows, outcomes


# ---------------------------------------------------------------------------
# unit execution (serial or process pool)


@dataclass
class UnitResult:
    outcome: TrainOutcome
    accuracy_rows: list[dict]
    f1_rows: list[dict]
    rating_rows: list[dict]
    outcomes: dict[str, list[str]]


def _run_unit(payload: tuple[dict, str, int]) -> UnitResult:
    config_dict, arch, seed = payload
    config = ExperimentConfig.from_dict(config_dict)
    bundle = load_data(config)
    outcome, model = train_unit(config, bundle, arch, seed)
    if model is None:
        return UnitResult(outcome, [], [], [], {})
    if config.save_checkpoints:
        ckpt_dir = Path(config.out_dir) / "checkpoints"
        ckpt_dir.mkdir(parents=True, exist_ok=True)
        save_checkpoint(
            ckpt_dir / f"{arch}-seed{seed}.json", model.params,
            meta={
                "arch": arch, "seed": seed, "language": bundle.lang,
                "best_epoch": outcome.best_epoch,
                "best_dev_accuracy": float(outcome.best_dev_accuracy),
                "param_count": outcome.param_count,
                "config_hash": config.hash(),
                "model_config": model.config.to_dict(),
                "alphabet": list(bundle.alphabet.symbols),
            })
    acc_rows, f1_rows = eval_test(model, bundle, config.beam_width, arch, seed)
    rating_rows: list[dict] = []
    outcomes: dict[str, list[str]] = {}
    if bundle.wugs is not None:
        rating_rows, outcomes = score_wugs(model, bundle, config, arch, seed)
    return UnitResult(outcome, acc_rows, f1_rows, rating_rows, outcomes)


def _worker_count() -> int:
    raw = os.environ.get("WUGBENCH_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise RunnerError(f"WUGBENCH_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def execute_units(config: ExperimentConfig) -> list[UnitResult]:
    payloads = [
        (config.to_dict(), arch, seed)
        for arch in config.architectures
        for seed in config.seeds
    ]
    workers = _worker_count()
    if workers == 1 or len(payloads) == 1:
        return [_run_unit(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=min(workers, len(payloads))) as pool:
        return list(pool.map(_run_unit, payloads))


# ---------------------------------------------------------------------------
# deterministic emission


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    f = float(value)
    if math.isnan(f):
        return ""
    return repr(f)


def write_csv(path, header: Sequence[str], rows: Iterable[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in rows:
            writer.writerow([_fmt(r[col]) for col in header])


def read_csv_rows(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _class_rank(cls: str) -> tuple[int, str]:
    canon = ("all",) + EN_REPORT_CLASSES + DE_REPORT_CLASSES
    return (canon.index(cls), cls) if cls in canon else (len(canon), cls)


def _arch_rank(arch: str) -> tuple[int, str]:
    return (ARCHITECTURES.index(arch), arch) if arch in ARCHITECTURES else (len(ARCHITECTURES), arch)


def _seed_of(identity: str) -> int:
    # model identity strings look like '<arch>-seed<k>'
    return int(identity.rsplit("seed", 1)[1])


def _mean_sd(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return float("nan"), float("nan")
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), sd


def _corr_to_json(c: CorrelationResult) -> dict:
    def safe(v):
        return None if not math.isfinite(v) else float(v)

    return {"statistic": safe(c.statistic), "pvalue": safe(c.pvalue), "n": c.n}


def compute_correlations(lang: str, rating_rows: Sequence[dict],
                         wugs: cp.WugSet) -> list[dict]:
    """Human rating vs. per-architecture model rating, per class and overall.

    Model rating of a candidate is its normalized probability averaged over
    that architecture's seeds."""
    human: dict[tuple[str, str], float] = {}
    cls_of: dict[tuple[str, str], str] = {}
    for item in wugs.items:
        for cand in item.candidates:
            human[(item.lemma, cand.form)] = cand.rating
            cls_of[(item.lemma, cand.form)] = cand.cls

    by_arch: dict[str, dict[tuple[str, str], list[float]]] = {}
    for row in rating_rows:
        arch = str(row["seed"]).rsplit("-seed", 1)[0]
        key = (row["lemma"], row["form"])
        by_arch.setdefault(arch, {}).setdefault(key, []).append(float(row["normalized_prob"]))

    classes = grid_classes(lang)
    out: list[dict] = []
    for arch in sorted(by_arch, key=_arch_rank):
        per_cand = by_arch[arch]
        for group in ("all",) + tuple(classes):
            keys = sorted(
                k for k in per_cand
                if k in human and (group == "all" or cls_of[k] == group)
            )
            xs = [human[k] for k in keys]
            ys = [model_rating(per_cand[k]) for k in keys]
            if len(keys) < 2:
                rho = r = CorrelationResult(float("nan"), float("nan"), len(keys))
            else:
                rho = spearman(xs, ys)
                r = pearson(xs, ys)
            out.append({
                "lang": lang, "model": arch, "group": group, "n": len(keys),
                "spearman_rho": rho.statistic, "spearman_p": rho.pvalue,
                "pearson_r": r.statistic, "pearson_p": r.pvalue,
            })
    return out


def compute_production_rows(lang: str, config_classes: Sequence[str],
                            outcomes_by_arch: dict[str, dict[str, list[list[str]]]],
                            wugs: cp.WugSet) -> list[dict]:
    rows: list[dict] = []
    context = {item.lemma: item.context for item in wugs.items}
    for arch in sorted(outcomes_by_arch, key=_arch_rank):
        per_item = outcomes_by_arch[arch]
        for lemma in sorted(per_item):
            probs = production_probabilities(per_item[lemma], config_classes)
            for cls in config_classes:
                rows.append({
                    "lang": lang, "model": arch, "lemma": lemma,
                    "context": context.get(lemma, ""), "class": cls,
                    "probability": probs[cls],
                })
    return rows


def build_grid(accuracy_rows: Sequence[dict], f1_rows: Sequence[dict],
               correlation_rows: Sequence[dict]) -> dict:
    """Task-performance vs. human-fit grid over every (model, class) cell.

    English cells use per-class accuracy, German cells per-class F1; the
    human-fit coordinate is the Pearson r of that model's ratings within
    the class.  Languages contribute their own classes, so a merged
    English+German report has 7 classes per model."""
    perf: dict[tuple[str, str], list[float]] = {}
    langs: set[str] = set()
    for row in accuracy_rows:
        if row["lang"] == "en" and row["class"] in cp.ENGLISH_CLASSES and row["accuracy"] != "":
            perf.setdefault((row["model"], row["class"]), []).append(float(row["accuracy"]))
            langs.add("en")
    for row in f1_rows:
        if row["lang"] == "de" and row["class"] in cp.GERMAN_CLASSES and row["f1"] != "":
            perf.setdefault((row["model"], row["class"]), []).append(float(row["f1"]))
            langs.add("de")

    fit: dict[tuple[str, str], float] = {}
    for row in correlation_rows:
        if row["group"] != "all" and row["pearson_r"] not in ("", None):
            fit[(row["model"], row["group"])] = float(row["pearson_r"])

    classes: tuple[str, ...] = ()
    if "en" in langs:
        classes += cp.ENGLISH_CLASSES
    if "de" in langs:
        classes += cp.GERMAN_CLASSES
    models = sorted({m for m, _ in perf} | {m for m, _ in fit}, key=_arch_rank)

    cells = {}
    for key, values in perf.items():
        if key in fit:
            cells[key] = (float(np.mean(values)), fit[key])
    summary = accuracy_correlation_grid(cells, models, classes)
    return {
        "cells": {
            f"{m}/{c}": {"performance": cells[(m, c)][0], "human_fit": cells[(m, c)][1]}
            for (m, c) in sorted(cells)
        },
        "per_model": {m: _corr_to_json(r) for m, r in summary.per_model.items()},
        "per_class": {c: _corr_to_json(r) for c, r in summary.per_class.items()},
        "pooled": _corr_to_json(summary.pooled),
        "missing": [f"{m}/{c}" for m, c in summary.missing],
    }


# ---------------------------------------------------------------------------
# the full pipeline


def run_experiment(config: ExperimentConfig) -> dict:
    """Train, evaluate and report; returns the summary dict it wrote."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bundle = load_data(config)
    results = execute_units(config)

    curve_rows: list[dict] = []
    accuracy_rows: list[dict] = []
    f1_rows: list[dict] = []
    rating_rows: list[dict] = []
    outcomes_by_arch: dict[str, dict[str, list[list[str]]]] = {}
    models_summary: dict[str, dict] = {}

    for res in results:
        o = res.outcome
        curve_rows.extend(o.curve_rows)
        accuracy_rows.extend(res.accuracy_rows)
        f1_rows.extend(res.f1_rows)
        rating_rows.extend(res.rating_rows)
        arch_outcomes = outcomes_by_arch.setdefault(o.arch, {})
        for lemma, produced in res.outcomes.items():
            arch_outcomes.setdefault(lemma, []).append(produced)
        summary = models_summary.setdefault(o.arch, {
            "param_count": o.param_count, "seeds": [], "diverged": {},
            "best_epochs": {},
        })
        summary["seeds"].append(o.seed)
        if o.diverged:
            summary["diverged"][str(o.seed)] = o.diagnostic
        else:
            summary["best_epochs"][str(o.seed)] = o.best_epoch

    curve_rows.sort(key=lambda r: (_arch_rank(r["model"]), r["seed"], r["epoch"]))
    accuracy_rows.sort(key=lambda r: (_arch_rank(r["model"]), r["seed"], _class_rank(r["class"])))
    f1_rows.sort(key=lambda r: (_arch_rank(r["model"]), r["seed"], _class_rank(r["class"])))
    rating_rows.sort(key=lambda r: (_arch_rank(r["seed"].rsplit("-seed", 1)[0]),
                                    _seed_of(r["seed"]), r["lemma"], r["form"]))

    write_csv(out_dir / "training_curves.csv", CURVES_HEADER, curve_rows)
    write_csv(out_dir / "accuracy.csv", ACCURACY_HEADER, accuracy_rows)
    write_csv(out_dir / "f1.csv", F1_HEADER, f1_rows)
    write_csv(out_dir / "ratings.csv", RATINGS_HEADER, rating_rows)

    correlation_rows: list[dict] = []
    production_rows: list[dict] = []
    if bundle.wugs is not None and rating_rows:
        correlation_rows = compute_correlations(bundle.lang, rating_rows, bundle.wugs)
        production_rows = compute_production_rows(
            bundle.lang, report_classes(bundle.lang), outcomes_by_arch, bundle.wugs)
    write_csv(out_dir / "correlations.csv", CORRELATIONS_HEADER, correlation_rows)
    write_csv(out_dir / "productions.csv", PRODUCTIONS_HEADER, production_rows)

    for arch, summary in models_summary.items():
        acc = {}
        for row in accuracy_rows:
            if row["model"] == arch:
                acc.setdefault(row["class"], []).append(float(row["accuracy"]))
        summary["test_accuracy"] = {
            cls: dict(zip(("mean", "sd"), _mean_sd(vals)))
            for cls, vals in sorted(acc.items(), key=lambda kv: _class_rank(kv[0]))
        }
        f1s = {}
        for row in f1_rows:
            if row["model"] == arch and not (isinstance(row["f1"], float) and math.isnan(row["f1"])):
                f1s.setdefault(row["class"], []).append(float(row["f1"]))
        summary["test_f1"] = {
            cls: dict(zip(("mean", "sd"), _mean_sd(vals)))
            for cls, vals in sorted(f1s.items(), key=lambda kv: _class_rank(kv[0]))
        }
        summary["rating_correlations"] = {
            row["group"]: {
                "n": row["n"],
                "spearman_rho": None if math.isnan(row["spearman_rho"]) else row["spearman_rho"],
                "spearman_p": None if math.isnan(row["spearman_p"]) else row["spearman_p"],
                "pearson_r": None if math.isnan(row["pearson_r"]) else row["pearson_r"],
                "pearson_p": None if math.isnan(row["pearson_p"]) else row["pearson_p"],
            }
            for row in correlation_rows if row["model"] == arch
        }

    summary = {
        "config": config.to_dict(),
        "config_hash": config.hash(),
        "language": bundle.lang,
        "alphabet_size": len(bundle.alphabet),
        "data_sizes": {"train": len(bundle.train), "dev": len(bundle.dev),
                       "test": len(bundle.test),
                       "wug_items": len(bundle.wugs.items) if bundle.wugs else 0},
        "models": models_summary,
        "grid": build_grid(accuracy_rows, f1_rows, correlation_rows),
    }
    _write_summary(out_dir / "summary.json", summary)
    return summary


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return None if not math.isfinite(f) else f
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _write_summary(path, summary: dict) -> None:
    blob = json.dumps(_sanitize(summary), sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(blob + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# staged entry points used by the command line


def run_split(config: ExperimentConfig) -> None:
    """Write train/dev/test TSVs for a config that names one dataset."""
    if config.dataset is None:
        raise RunnerError("split needs a config with a 'dataset' entry")
    lang, examples = cp.parse_dataset(config.dataset)
    rng = seeded_rng(config.split_seed, SHUFFLE_STREAM)
    train, dev, test = cp.split_dataset(
        examples, config.split_ratios, rng, stratify=lambda ex: ex.cls)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", train), ("dev", dev), ("test", test)):
        cp.write_dataset(out_dir / f"{name}.tsv", lang, part)


def run_train(config: ExperimentConfig) -> None:
    """Train the configured units and write checkpoints plus curves."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = ExperimentConfig.from_dict({**config.to_dict(), "save_checkpoints": True})
    results = execute_units(config)
    curve_rows = [row for res in results for row in res.outcome.curve_rows]
    curve_rows.sort(key=lambda r: (_arch_rank(r["model"]), r["seed"], r["epoch"]))
    write_csv(out_dir / "training_curves.csv", CURVES_HEADER, curve_rows)
    diverged = [res.outcome for res in results if res.outcome.diverged]
    for o in diverged:
        print(f"diverged: {o.diagnostic}")


def _load_trained(config: ExperimentConfig, bundle: DataBundle):
    """Yield (arch, seed, model) from the checkpoints of this run dir."""
    ckpt_dir = Path(config.out_dir) / "checkpoints"
    if not ckpt_dir.is_dir():
        raise RunnerError(f"no checkpoints directory under {config.out_dir}")
    for arch in config.architectures:
        for seed in config.seeds:
            path = ckpt_dir / f"{arch}-seed{seed}.json"
            if not path.exists():
                continue
            arrays, meta = load_checkpoint(path)
            if tuple(meta.get("alphabet", ())) != bundle.alphabet.symbols:
                raise RunnerError(f"{path}: checkpoint alphabet does not match the data")
            mcfg = ModelConfig(**meta["model_config"])
            model = build_model(mcfg, seeded_rng(int(meta["seed"]), INIT_STREAM))
            restore_into(model.params, arrays)
            yield arch, seed, model


def run_eval(config: ExperimentConfig) -> None:
    """Test-set evaluation of stored checkpoints."""
    bundle = load_data(config)
    accuracy_rows: list[dict] = []
    f1_rows: list[dict] = []
    for arch, seed, model in _load_trained(config, bundle):
        acc, f1 = eval_test(model, bundle, config.beam_width, arch, seed)
        accuracy_rows.extend(acc)
        f1_rows.extend(f1)
    if not accuracy_rows:
        raise RunnerError("no checkpoints matched the configured architectures/seeds")
    accuracy_rows.sort(key=lambda r: (_arch_rank(r["model"]), r["seed"], _class_rank(r["class"])))
    f1_rows.sort(key=lambda r: (_arch_rank(r["model"]), r["seed"], _class_rank(r["class"])))
    out_dir = Path(config.out_dir)
    write_csv(out_dir / "accuracy.csv", ACCURACY_HEADER, accuracy_rows)
    write_csv(out_dir / "f1.csv", F1_HEADER, f1_rows)


def run_wug(config: ExperimentConfig) -> None:
    """Wug scoring of stored checkpoints: ratings, productions, correlations."""
    bundle = load_data(config)
    if bundle.wugs is None:
        raise RunnerError("wug scoring needs a 'wugs' entry in the config")
    rating_rows: list[dict] = []
    outcomes_by_arch: dict[str, dict[str, list[list[str]]]] = {}
    found = False
    for arch, seed, model in _load_trained(config, bundle):
        found = True
        rows, outcomes = score_wugs(model, bundle, config, arch, seed)
        rating_rows.extend(rows)
        arch_outcomes = outcomes_by_arch.setdefault(arch, {})
        for lemma, produced in outcomes.items():
            arch_outcomes.setdefault(lemma, []).append(produced)
    if not found:
        raise RunnerError("no checkpoints matched the configured architectures/seeds")
    rating_rows.sort(key=lambda r: (_arch_rank(r["seed"].rsplit("-seed", 1)[0]),
                                    _seed_of(r["seed"]), r["lemma"], r["form"]))
    out_dir = Path(config.out_dir)
    write_csv(out_dir / "ratings.csv", RATINGS_HEADER, rating_rows)
    correlation_rows = compute_correlations(bundle.lang, rating_rows, bundle.wugs)
    write_csv(out_dir / "correlations.csv", CORRELATIONS_HEADER, correlation_rows)
    production_rows = compute_production_rows(
        bundle.lang, report_classes(bundle.lang), outcomes_by_arch, bundle.wugs)
    write_csv(out_dir / "productions.csv", PRODUCTIONS_HEADER, production_rows)


def run_report(config: ExperimentConfig, merge_dirs: Sequence[str] = ()) -> dict:
    """Aggregate CSV outputs (possibly from several runs) into summary.json."""
    dirs = [Path(config.out_dir), *map(Path, merge_dirs)]
    accuracy_rows: list[dict] = []
    f1_rows: list[dict] = []
    correlation_rows: list[dict] = []
    for d in dirs:
        for name, sink in (("accuracy.csv", accuracy_rows), ("f1.csv", f1_rows),
                           ("correlations.csv", correlation_rows)):
            path = d / name
            if path.exists():
                sink.extend(read_csv_rows(path))
    if not accuracy_rows:
        raise RunnerError(f"no accuracy.csv found under {[str(d) for d in dirs]}")

    def stats(rows, value_col):
        out: dict[str, dict] = {}
        for row in rows:
            if row[value_col] == "":
                continue
            model = out.setdefault(f'{row["lang"]}/{row["model"]}', {})
            model.setdefault(row["class"], []).append(float(row[value_col]))
        return {
            model: {cls: dict(zip(("mean", "sd"), _mean_sd(vals)))
                    for cls, vals in sorted(classes.items(), key=lambda kv: _class_rank(kv[0]))}
            for model, classes in sorted(out.items())
        }

    summary = {
        "config": config.to_dict(),
        "config_hash": config.hash(),
        "merged_dirs": [str(d) for d in dirs],
        "test_accuracy": stats(accuracy_rows, "accuracy"),
        "test_f1": stats(f1_rows, "f1"),
        "grid": build_grid(accuracy_rows, f1_rows, correlation_rows),
    }
    _write_summary(Path(config.out_dir) / "summary.json", summary)
    return summary
