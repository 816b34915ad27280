"""Pipeline stages wiring the modules into one experiment.

Stages: extract features -> synthesize noise conditions -> train per-feature
models -> score per condition -> fuse subsets -> report.  Each stage is
idempotent: a content hash of its inputs is stored next to the outputs and
matching reruns are skipped.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from bsrkit import audio_io, bsr, classifier, fusion, noise, scores, spectral

log = logging.getLogger("bsrkit")

FEATURE_KINDS = ("bsr-int16", "bsr-float16", "fbank", "mfcc", "raw")
CLEAR = "clear"


class ConfigError(Exception):
    pass


class StageError(Exception):
    """Missing or stale upstream artifact."""


@dataclass
class PipelineConfig:
    dataset_root: str
    out_dir: str
    features: list[str] = field(default_factory=lambda: ["bsr-float16", "fbank", "mfcc", "raw"])
    noise: list[dict] = field(default_factory=list)  # {"kind", "snr_db", "source"?}
    train: dict = field(default_factory=dict)  # TrainConfig overrides
    fusion_subsets: str | list[list[str]] = "all"
    master_seed: int = 0
    jobs: int | None = None
    val_pct: float = 10.0
    test_pct: float = 10.0
    synthesize_split: str = "test"

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from None
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "dataset_root" not in raw or "out_dir" not in raw:
            raise ConfigError("config needs dataset_root and out_dir")
        return cls(**raw)

    def validate(self) -> None:
        if not Path(self.dataset_root).is_dir():
            raise ConfigError(f"dataset_root {self.dataset_root} is not a directory")
        for kind in self.features:
            if kind not in FEATURE_KINDS:
                raise ConfigError(f"unknown feature kind {kind!r} (valid: {FEATURE_KINDS})")
        for spec in self.noise_specs():
            if spec.kind == noise.KIND_BACKGROUND and not Path(spec.source).is_file():
                raise ConfigError(f"noise source {spec.source} does not exist")
        for subset in self.subsets():
            for kind in subset:
                if kind not in self.features:
                    raise ConfigError(f"fusion subset references {kind!r}, not an extracted feature")

    def noise_specs(self) -> list[noise.NoiseSpec]:
        return [noise.NoiseSpec(**d) for d in self.noise]

    def train_config(self) -> classifier.TrainConfig:
        return classifier.TrainConfig(**{"seed": self.master_seed, **self.train})

    def subsets(self) -> list[list[str]]:
        if self.fusion_subsets == "all":
            from itertools import combinations

            out = []
            for size in range(1, min(3, len(self.features)) + 1):
                out.extend([list(c) for c in combinations(self.features, size)])
            return out
        return [list(s) for s in self.fusion_subsets]

    def conditions(self) -> list[str]:
        return [CLEAR] + [spec.condition for spec in self.noise_specs()]


def load_config(path: str | Path) -> PipelineConfig:
    cfg = PipelineConfig.from_json(Path(path).read_text(encoding="utf-8"))
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# stage cache

def _digest(payload) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _stage_dir(cfg: PipelineConfig) -> Path:
    d = Path(cfg.out_dir) / ".stage"
    d.mkdir(parents=True, exist_ok=True)
    return d


def _cache_fresh(cfg: PipelineConfig, stage: str, digest: str) -> bool:
    record = _stage_dir(cfg) / f"{stage}.json"
    if not record.is_file():
        return False
    try:
        state = json.loads(record.read_text())
    except json.JSONDecodeError:
        return False
    if state.get("digest") != digest:
        return False
    if not all(Path(p).exists() for p in state.get("outputs", [])):
        return False
    log.info("[%s] cache hit, skipping", stage)
    return True


def _cache_store(cfg: PipelineConfig, stage: str, digest: str, outputs: list[Path]) -> None:
    record = _stage_dir(cfg) / f"{stage}.json"
    record.write_text(json.dumps({"digest": digest, "outputs": [str(p) for p in sorted(outputs)]},
                                 indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# dataset plumbing

def _splits(cfg: PipelineConfig) -> dict[str, list[audio_io.DatasetEntry]]:
    entries = audio_io.scan_dataset(cfg.dataset_root)
    return audio_io.split_dataset(entries, cfg.dataset_root, cfg.val_pct, cfg.test_pct)


def _entry_split(cfg: PipelineConfig) -> list[tuple[audio_io.DatasetEntry, str]]:
    out = []
    for split, entries in _splits(cfg).items():
        out.extend((e, split) for e in entries)
    out.sort(key=lambda pair: pair[0].source_id)
    return out


def _safe_name(utt_id: str) -> str:
    return utt_id.replace("/", "__")


def _pool_from_wav(path: Path, kind: str, utt_id: str) -> np.ndarray:
    """Pooled vector for one clip straight from audio (raw and noisy paths)."""
    clip = audio_io.pad_or_trim(audio_io.load_wav(path))
    if kind == "bsr-int16":
        return classifier.pool(bsr.waveform_to_bsr(clip, bsr.KIND_INT16))
    w = audio_io.normalize_peak(clip, source_id=utt_id)
    if kind == "bsr-float16":
        return classifier.pool(bsr.waveform_to_bsr(w, bsr.KIND_FLOAT16))
    if kind == "fbank":
        return classifier.pool(spectral.fbank(w))
    if kind == "mfcc":
        return classifier.pool(spectral.mfcc(w))
    return classifier.pool(w)  # raw


def _extract_one(task: tuple[str, str, str, str]) -> tuple[str, str | None]:
    """Worker: (wav_path, utt_id, kind, out_path) -> (utt_id, error or None)."""
    wav_path, utt_id, kind, out_path = task
    try:
        clip = audio_io.pad_or_trim(audio_io.load_wav(wav_path))
        if kind == "bsr-int16":
            bsr.save_bitmatrix(bsr.waveform_to_bsr(clip, bsr.KIND_INT16), out_path)
        elif kind != "raw":  # raw has no feature file; loading above validates the clip
            w = audio_io.normalize_peak(clip, source_id=utt_id)
            if kind == "bsr-float16":
                bsr.save_bitmatrix(bsr.waveform_to_bsr(w, bsr.KIND_FLOAT16), out_path)
            elif kind == "fbank":
                spectral.save_features(spectral.fbank(w), out_path)
            elif kind == "mfcc":
                spectral.save_features(spectral.mfcc(w), out_path)
        return utt_id, None
    except Exception as e:  # collected into the failure report
        return utt_id, f"{type(e).__name__}: {e}"


def _run_tasks(tasks, jobs: int | None):
    jobs = jobs or os.cpu_count() or 1
    if jobs <= 1 or len(tasks) <= 1:
        return [_extract_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool_:
        return list(pool_.map(_extract_one, tasks))


def feature_manifest_path(cfg: PipelineConfig, kind: str) -> Path:
    return Path(cfg.out_dir) / "features" / f"{kind}.tsv"


def read_manifest(path: Path) -> list[dict]:
    if not path.is_file():
        raise StageError(f"missing feature manifest {path}; run `extract` first")
    rows = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line:
            continue
        utt_id, label, split, fpath = line.split("\t")
        rows.append({"utt_id": utt_id, "label": label, "split": split, "path": fpath})
    return rows


def run_extract(cfg: PipelineConfig, kind: str) -> dict:
    """Extract one feature kind for every clip; returns counts and failures."""
    if kind not in FEATURE_KINDS:
        raise ConfigError(f"unknown feature kind {kind!r}")
    pairs = _entry_split(cfg)
    manifest = feature_manifest_path(cfg, kind)
    stage = f"extract:{kind}"

    digest = _digest({
        "kind": kind,
        "clips": [(e.source_id, _file_digest(e.path)) for e, _ in pairs],
    })
    if _cache_fresh(cfg, stage, digest):
        return {"kind": kind, "written": 0, "failures": [], "cached": True}

    ext = ".bsr1" if kind.startswith("bsr") else ".fea1"
    feat_dir = Path(cfg.out_dir) / "features" / kind
    if kind != "raw":
        feat_dir.mkdir(parents=True, exist_ok=True)

    tasks = []
    for entry, _ in pairs:
        out_path = str(feat_dir / (_safe_name(entry.source_id) + ext)) if kind != "raw" else ""
        tasks.append((str(entry.path), entry.source_id, kind, out_path))
    results = dict(_run_tasks(tasks, cfg.jobs)) if kind != "raw" else {e.source_id: None for e, _ in pairs}

    lines, failures, outputs = [], [], [manifest]
    for (entry, split), task in zip(pairs, tasks):
        err = results[entry.source_id]
        if err is not None:
            failures.append((entry.source_id, err))
            continue
        path = task[3] if kind != "raw" else str(entry.path)
        lines.append(f"{entry.source_id}\t{entry.label}\t{split}\t{path}")
        if kind != "raw":
            outputs.append(Path(task[3]))
    manifest.parent.mkdir(parents=True, exist_ok=True)
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")

    if failures:
        report = Path(cfg.out_dir) / f"failures_extract_{kind}.tsv"
        report.write_text("\n".join(f"{u}\t{msg}" for u, msg in failures) + "\n", encoding="utf-8")
        log.warning("[%s] %d clips failed, see %s", stage, len(failures), report)
    else:
        _cache_store(cfg, stage, digest, outputs)
    log.info("[%s] wrote %d feature files", stage, len(lines))
    return {"kind": kind, "written": len(lines), "failures": failures, "cached": False}


def run_synthesize(cfg: PipelineConfig) -> dict:
    """Mix every chosen-split clip under every noise condition."""
    specs = cfg.noise_specs()
    if not specs:
        return {"conditions": [], "cached": False}
    split_entries = _splits(cfg)[cfg.synthesize_split]
    stage = "synthesize"
    digest = _digest({
        "specs": [(s.kind, s.snr_db, str(s.source) if s.source else None) for s in specs],
        "seed": cfg.master_seed,
        "clips": [(e.source_id, _file_digest(e.path)) for e in split_entries],
    })
    cond_dir = Path(cfg.out_dir) / "conditions"
    if _cache_fresh(cfg, stage, digest):
        return {"conditions": [s.condition for s in specs], "cached": True}

    clips = [(e.source_id, e.label, audio_io.load_clip(e.path, source_id=e.source_id, label=e.label))
             for e in split_entries]
    manifests = noise.synthesize_conditions(clips, specs, cfg.master_seed, cond_dir)
    outputs = list(manifests.values())
    for spec in specs:
        outputs.extend(sorted((cond_dir / spec.condition).glob("*.wav")))
    _cache_store(cfg, stage, digest, outputs)
    log.info("[synthesize] %d conditions x %d clips", len(specs), len(clips))
    return {"conditions": [s.condition for s in specs], "cached": False}


def _pooled_for_rows(cfg: PipelineConfig, kind: str, rows: list[dict]) -> list[tuple[str, str, np.ndarray]]:
    out = []
    for r in rows:
        path = Path(r["path"])
        if not path.is_file():
            raise StageError(f"missing feature file {path} for {r['utt_id']}; rerun `extract`")
        if kind == "raw":
            vec = _pool_from_wav(path, "raw", r["utt_id"])
        elif kind.startswith("bsr"):
            vec = classifier.pool(bsr.load_bitmatrix(path))
        else:
            vec = classifier.pool(spectral.load_features(path))
        out.append((r["utt_id"], r["label"], vec))
    return out


def model_path(cfg: PipelineConfig, kind: str) -> Path:
    return Path(cfg.out_dir) / "models" / f"{kind}.smx1"


def run_train(cfg: PipelineConfig, kind: str) -> dict:
    manifest = feature_manifest_path(cfg, kind)
    rows = read_manifest(manifest)
    stage = f"train:{kind}"
    digest = _digest({"manifest": _file_digest(manifest), "train": asdict(cfg.train_config()),
                      "features": [_file_digest(Path(r["path"])) for r in rows]})
    out = model_path(cfg, kind)
    if _cache_fresh(cfg, stage, digest):
        return {"kind": kind, "model": str(out), "cached": True}

    train_rows = [r for r in rows if r["split"] == "train"]
    val_rows = [r for r in rows if r["split"] == "validation"]
    if not train_rows:
        raise StageError(f"no training rows in {manifest}")
    train_set = [(vec, label) for _, label, vec in _pooled_for_rows(cfg, kind, train_rows)]
    val_set = [(vec, label) for _, label, vec in _pooled_for_rows(cfg, kind, val_rows)] or None
    model = classifier.train(train_set, cfg.train_config(), validation=val_set)
    out.parent.mkdir(parents=True, exist_ok=True)
    classifier.save_model(model, out)
    _cache_store(cfg, stage, digest, [out])
    log.info("[%s] trained on %d clips -> %s", stage, len(train_set), out)
    return {"kind": kind, "model": str(out), "cached": False}


def score_path(cfg: PipelineConfig, name: str, condition: str) -> Path:
    return Path(cfg.out_dir) / "scores" / f"{name}__{condition}.tsv"


def _condition_rows(cfg: PipelineConfig, kind: str, condition: str) -> list[dict]:
    """Test-split rows pointing at clean features or condition audio."""
    rows = [r for r in read_manifest(feature_manifest_path(cfg, kind)) if r["split"] == "test"]
    if not rows:
        raise StageError(f"no test rows for {kind}; check split percentages")
    if condition == CLEAR:
        return rows
    cond_dir = Path(cfg.out_dir) / "conditions" / condition
    if not cond_dir.is_dir():
        raise StageError(f"missing condition directory {cond_dir}; run `synthesize` first")
    return [{**r, "path": str(cond_dir / (_safe_name(r["utt_id"]) + ".wav"))} for r in rows]


def run_score(cfg: PipelineConfig, kind: str, condition: str) -> dict:
    mpath = model_path(cfg, kind)
    if not mpath.is_file():
        raise StageError(f"missing model {mpath}; run `train` first")
    rows = _condition_rows(cfg, kind, condition)
    stage = f"score:{kind}:{condition}"
    digest = _digest({"model": _file_digest(mpath), "condition": condition,
                      "rows": [(r["utt_id"], _file_digest(Path(r["path"]))) for r in rows]})
    out = score_path(cfg, kind, condition)
    if _cache_fresh(cfg, stage, digest):
        return {"scores": str(out), "cached": True}

    model = classifier.load_model(mpath)
    if condition == CLEAR:
        items = [(u, v) for u, _, v in _pooled_for_rows(cfg, kind, rows)]
    else:
        items = [(r["utt_id"], _pool_from_wav(Path(r["path"]), kind, r["utt_id"])) for r in rows]
    matrix = classifier.score_dataset(model, items)
    out.parent.mkdir(parents=True, exist_ok=True)
    scores.save_scores(matrix, out)
    _cache_store(cfg, stage, digest, [out])
    log.info("[%s] scored %d utterances -> %s", stage, len(items), out)
    return {"scores": str(out), "cached": False}


def subset_name(subset: list[str]) -> str:
    return "&".join(subset)


def run_fuse(cfg: PipelineConfig, subset: list[str], condition: str) -> dict:
    sources = []
    for kind in subset:
        spath = score_path(cfg, kind, condition)
        if not spath.is_file():
            raise StageError(f"missing score file {spath}; run `score` first")
        sources.append(scores.load_scores(spath))
    fused = fusion.fuse(fusion.FusionSpec(sources=sources))
    out = score_path(cfg, subset_name(subset), condition)
    scores.save_scores(fused, out)
    log.info("[fuse] %s / %s -> %s", subset_name(subset), condition, out)
    return {"scores": str(out)}


def _truth(cfg: PipelineConfig) -> dict[str, str]:
    any_kind = cfg.features[0]
    return {r["utt_id"]: r["label"] for r in read_manifest(feature_manifest_path(cfg, any_kind))
            if r["split"] == "test"}


def run_report(cfg: PipelineConfig) -> dict:
    """Accuracy table over every subset x condition, plus confusion artifacts."""
    truth = _truth(cfg)
    conditions = cfg.conditions()
    subsets = cfg.subsets()
    analysis = Path(cfg.out_dir) / "analysis"
    analysis.mkdir(parents=True, exist_ok=True)

    table = []
    for subset in subsets:
        row = [subset_name(subset)]
        for cond in conditions:
            sources = []
            for kind in subset:
                spath = score_path(cfg, kind, cond)
                if not spath.is_file():
                    raise StageError(f"missing score file {spath}; run `score` first")
                sources.append(scores.load_scores(spath))
            fused = fusion.fuse(fusion.FusionSpec(sources=sources))
            row.append(f"{fusion.accuracy(fused, truth):.2f}")
        table.append(row)

    report = Path(cfg.out_dir) / "report.tsv"
    header = "features\t" + "\t".join(conditions)
    report.write_text(header + "\n" + "\n".join("\t".join(r) for r in table) + "\n", encoding="utf-8")

    cms: dict[tuple[str, str], fusion.ConfusionMatrix] = {}
    for kind in cfg.features:
        for cond in conditions:
            spath = score_path(cfg, kind, cond)
            if not spath.is_file():
                continue
            cm = fusion.confusion(scores.load_scores(spath), truth)
            cms[(kind, cond)] = cm
            fusion.confusion_to_csv(cm, analysis / f"{kind}__{cond}_confusion.csv")
            fusion.confusion_to_svg(cm, analysis / f"{kind}__{cond}_confusion.svg")
    for i, a in enumerate(cfg.features):
        for b in cfg.features[i + 1 :]:
            for cond in conditions:
                if (a, cond) in cms and (b, cond) in cms:
                    diff = fusion.confusion_diff(cms[(a, cond)], cms[(b, cond)])
                    fusion.diff_to_tsv(diff, analysis / f"{a}__vs__{b}__{cond}_diff.tsv")

    log.info("[report] %d subset rows x %d conditions -> %s", len(table), len(conditions), report)
    return {"report": str(report), "rows": len(table), "conditions": conditions}
