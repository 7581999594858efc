"""Pipeline stages over a work directory, with digest-gated resume.

Layout inside the work directory:

    descriptors/<class>.csv        pooled descriptor rows, 32 columns
    descriptors/<class>.index.csv  per-image row counts (image,rows)
    pattern.txt                    the binary-test pattern actually used
    codebook.json                  fitted k-means centroids
    features.csv                   per-image histograms + label column
    tree.json                      fitted decision tree
    reports/                       depth curve and confusion renderings
    run_manifest.json              config snapshot, digests, timings
    .lock                          held for the duration of any command

Each stage records sha256 digests of its inputs and outputs in the run
manifest; `pipeline` reruns a stage only when those digests (or the config)
no longer match, so an interrupted run resumes where it stopped.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .bovw import (
    encode_image,
    kmeans_fit,
    load_codebook,
    read_feature_csv,
    save_codebook,
    write_feature_csv,
)
from .cart import evaluate, fit, load_tree, predict, predict_proba, save_tree
from .cart import stratified_split, tune_depth
from .config import PipelineConfig
from .errors import (
    ConfigError,
    MissingCodebookError,
    MissingDescriptorsError,
    MissingInputError,
    MissingModelError,
    WorkdirLockedError,
)
from .imageio import load_dataset, load_image, resize, to_grayscale
from .orb import (
    BriefPattern,
    build_steer_lut,
    default_pattern,
    detect_and_compute,
    load_pattern,
    save_pattern,
)
from .reports import write_confusion, write_depth_curve

logger = logging.getLogger(__name__)

MANIFEST_NAME = "run_manifest.json"
PATTERN_NAME = "pattern.txt"
STAGE_ORDER = ("extract", "codebook", "encode", "train", "eval")


# ---------------------------------------------------------------------------
# work-directory plumbing
# ---------------------------------------------------------------------------

def _require_workdir(cfg: PipelineConfig) -> Path:
    if cfg.workdir is None:
        raise ConfigError("no work directory: set 'workdir' in the config "
                          "or pass --workdir")
    return cfg.workdir


def _require_dataset(cfg: PipelineConfig) -> Path:
    if cfg.dataset is None:
        raise ConfigError("no dataset root: set 'dataset' in the config "
                          "or pass --dataset")
    return cfg.dataset


@contextmanager
def workdir_lock(workdir: Path):
    workdir.mkdir(parents=True, exist_ok=True)
    lock = workdir / ".lock"
    try:
        fd = open(lock, "x", encoding="ascii")
    except FileExistsError:
        raise WorkdirLockedError(
            f"{lock} exists; another command may be running in this work "
            f"directory (delete the file if it is stale)"
        ) from None
    try:
        fd.write(f"{os.getpid()}\n")
        fd.close()
        yield
    finally:
        lock.unlink(missing_ok=True)


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _digest_or_none(path: Path) -> str | None:
    return sha256_file(path) if path.is_file() else None


def _dataset_digest(dataset_root: Path) -> str:
    """One digest over every (relative path, content hash) pair, sorted."""
    manifest = load_dataset(dataset_root)
    h = hashlib.sha256()
    for cls in manifest.classes:
        for p in cls.paths:
            rel = f"{cls.name}/{p.name}"
            h.update(rel.encode())
            h.update(bytes.fromhex(sha256_file(p)))
    return h.hexdigest()


def load_manifest(workdir: Path) -> dict:
    path = workdir / MANIFEST_NAME
    if path.is_file():
        return json.loads(path.read_text(encoding="utf-8"))
    return {"tool": f"signfeat {__version__}", "config": None,
            "class_names": [], "stages": {}}


def save_manifest(workdir: Path, manifest: dict) -> None:
    manifest["tool"] = f"signfeat {__version__}"
    path = workdir / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _snapshot(cfg: PipelineConfig) -> dict:
    """Config snapshot used for staleness checks. Paths are excluded
    because their *content* is covered by digests; the worker count is
    excluded because scheduling cannot change the outputs."""
    doc = cfg.to_doc()
    for key in ("dataset", "workdir", "pattern", "workers"):
        doc.pop(key, None)
    return doc


def _record_stage(manifest: dict, name: str, cfg: PipelineConfig,
                  inputs: dict, outputs: dict, seconds: float, info: dict) -> None:
    manifest.setdefault("stages", {})[name] = {
        "config": _snapshot(cfg),
        "inputs": inputs,
        "outputs": outputs,
        "seconds": round(seconds, 3),
        "info": info,
    }
    manifest["config"] = cfg.to_doc()


def _stage_current(manifest: dict, name: str, cfg: PipelineConfig,
                   inputs: dict, workdir: Path) -> bool:
    rec = manifest.get("stages", {}).get(name)
    if rec is None or rec.get("config") != _snapshot(cfg):
        return False
    if rec.get("inputs") != inputs:
        return False
    for rel, digest in rec.get("outputs", {}).items():
        if _digest_or_none(workdir / rel) != digest:
            return False
    return True


def _output_digests(workdir: Path, rel_paths: list[str]) -> dict:
    return {rel: sha256_file(workdir / rel) for rel in rel_paths}


# ---------------------------------------------------------------------------
# stage implementations
# ---------------------------------------------------------------------------

def _resolve_pattern(cfg: PipelineConfig) -> tuple[BriefPattern, str]:
    """The pattern named in the config, or the seeded Gaussian fallback."""
    if cfg.pattern is not None:
        if not cfg.pattern.is_file():
            raise FileNotFoundError(f"pattern file not found: {cfg.pattern}")
        return load_pattern(cfg.pattern), sha256_file(cfg.pattern)
    return default_pattern(cfg.pattern_seed, cfg.orb), f"seed:{cfg.pattern_seed}"


def _image_descriptors(path: Path, cfg: PipelineConfig, lut) -> np.ndarray:
    img = load_image(path)
    img = resize(img, cfg.resize[0], cfg.resize[1])
    gray = to_grayscale(img)
    found = detect_and_compute(gray, cfg.orb, lut=lut)
    if not found:
        return np.zeros((0, cfg.orb.n_tests // 8), dtype=np.uint8)
    return np.stack([desc for _, desc in found])


def _extract_inputs(cfg: PipelineConfig) -> dict:
    pattern_src = (sha256_file(cfg.pattern)
                   if cfg.pattern is not None and cfg.pattern.is_file()
                   else f"seed:{cfg.pattern_seed}")
    return {"dataset": _dataset_digest(_require_dataset(cfg)),
            "pattern": pattern_src}


def run_extract(cfg: PipelineConfig, manifest: dict, inputs: dict | None = None) -> dict:
    """Descriptors for every image, one CSV per class plus a row index."""
    t0 = time.perf_counter()
    workdir = _require_workdir(cfg)
    dataset = load_dataset(_require_dataset(cfg))
    if inputs is None:
        inputs = _extract_inputs(cfg)
    pattern, _ = _resolve_pattern(cfg)
    lut = build_steer_lut(pattern)

    ddir = workdir / "descriptors"
    ddir.mkdir(parents=True, exist_ok=True)
    (workdir / "reports").mkdir(exist_ok=True)
    save_pattern(pattern, workdir / PATTERN_NAME)

    outputs = [PATTERN_NAME]
    total_rows = 0
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        for cls in dataset.classes:
            mats = list(pool.map(lambda p: _image_descriptors(p, cfg, lut),
                                 cls.paths))
            rows = [row for mat in mats for row in mat]
            n_rows = len(rows)
            total_rows += n_rows
            if n_rows == 0:
                logger.warning("class %s produced no descriptors", cls.name)
            write_feature_csv(rows, ddir / f"{cls.name}.csv",
                              n_cols=cfg.orb.n_tests // 8)
            index_lines = ["image,rows"]
            index_lines.extend(f"{p.name},{mat.shape[0]}"
                               for p, mat in zip(cls.paths, mats))
            (ddir / f"{cls.name}.index.csv").write_text(
                "\n".join(index_lines) + "\n", encoding="utf-8")
            outputs.extend([f"descriptors/{cls.name}.csv",
                            f"descriptors/{cls.name}.index.csv"])
            logger.info("extract: class %s -> %d descriptors from %d images",
                        cls.name, n_rows, len(cls.paths))

    seconds = time.perf_counter() - t0
    manifest["class_names"] = dataset.class_names()
    _record_stage(manifest, "extract", cfg, inputs,
                  _output_digests(workdir, outputs), seconds,
                  {"n_images": dataset.n_images, "n_descriptors": total_rows})
    logger.info("extract: %d descriptors from %d images in %.1fs",
                total_rows, dataset.n_images, seconds)
    return {"n_descriptors": total_rows}


def _class_csvs(workdir: Path) -> list[Path]:
    ddir = workdir / "descriptors"
    if not ddir.is_dir():
        raise MissingDescriptorsError(
            f"{ddir} does not exist; run the extract stage first"
        )
    csvs = [p for p in sorted(ddir.glob("*.csv"))
            if not p.name.endswith(".index.csv")]
    if not csvs:
        raise MissingDescriptorsError(f"no descriptor CSVs under {ddir}")
    return csvs


def _codebook_inputs(cfg: PipelineConfig) -> dict:
    workdir = _require_workdir(cfg)
    try:
        csvs = _class_csvs(workdir)
    except MissingDescriptorsError:
        return {"descriptors": None}
    return {f"descriptors/{p.name}": sha256_file(p) for p in csvs}


def run_codebook(cfg: PipelineConfig, manifest: dict, inputs: dict | None = None) -> dict:
    """Pool all class descriptors and fit the k-means codebook."""
    t0 = time.perf_counter()
    workdir = _require_workdir(cfg)
    csvs = _class_csvs(workdir)
    if inputs is None:
        inputs = _codebook_inputs(cfg)
    pooled = np.concatenate([read_feature_csv(p) for p in csvs], axis=0)
    logger.info("codebook: fitting k=%d on %d descriptors", cfg.k, pooled.shape[0])
    cb = kmeans_fit(pooled.astype(np.float64), cfg.k, seed=cfg.kmeans_seed,
                    max_iter=cfg.kmeans_max_iter, tol=cfg.kmeans_tol)
    save_codebook(cb, workdir / "codebook.json")
    seconds = time.perf_counter() - t0
    _record_stage(manifest, "codebook", cfg, inputs,
                  _output_digests(workdir, ["codebook.json"]), seconds,
                  {"inertia": cb.inertia, "iterations_run": cb.iterations_run})
    logger.info("codebook: inertia %.2f after %d iterations in %.1fs",
                cb.inertia, cb.iterations_run, seconds)
    return {"inertia": cb.inertia}


def _read_class_index(path: Path) -> list[tuple[str, int]]:
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "image,rows":
        raise ValueError(f"{path}: expected an 'image,rows' header")
    entries = []
    for line in lines[1:]:
        name, _, count = line.rpartition(",")
        entries.append((name, int(count)))
    return entries


def _encode_inputs(cfg: PipelineConfig) -> dict:
    workdir = _require_workdir(cfg)
    inputs = {"codebook.json": _digest_or_none(workdir / "codebook.json")}
    try:
        csvs = _class_csvs(workdir)
    except MissingDescriptorsError:
        inputs["descriptors"] = None
        return inputs
    for p in csvs:
        inputs[f"descriptors/{p.name}"] = sha256_file(p)
        idx = p.with_name(p.stem + ".index.csv")
        inputs[f"descriptors/{idx.name}"] = _digest_or_none(idx)
    return inputs


def run_encode(cfg: PipelineConfig, manifest: dict, inputs: dict | None = None) -> dict:
    """Quantize each image's descriptors into a k-bin histogram row."""
    t0 = time.perf_counter()
    workdir = _require_workdir(cfg)
    cb_path = workdir / "codebook.json"
    if not cb_path.is_file():
        raise MissingCodebookError(f"{cb_path} does not exist; run codebook first")
    csvs = _class_csvs(workdir)
    if inputs is None:
        inputs = _encode_inputs(cfg)
    cb = load_codebook(cb_path)

    rows = []
    for label, csv_path in enumerate(csvs):
        descriptors = read_feature_csv(csv_path)
        index_path = csv_path.with_name(csv_path.stem + ".index.csv")
        if not index_path.is_file():
            raise MissingDescriptorsError(f"{index_path} does not exist; "
                                          f"rerun the extract stage")
        entries = _read_class_index(index_path)
        claimed = sum(n for _, n in entries)
        if claimed != descriptors.shape[0]:
            raise ValueError(
                f"{index_path} claims {claimed} rows but {csv_path} holds "
                f"{descriptors.shape[0]}"
            )
        offset = 0
        for name, count in entries:
            block = descriptors[offset:offset + count]
            offset += count
            if count == 0:
                logger.warning("encode: %s/%s has no descriptors; "
                               "all-zero histogram", csv_path.stem, name)
            counts = encode_image(cb, block)
            rows.append(np.concatenate([counts, [label]]))
    write_feature_csv(rows, workdir / "features.csv", n_cols=cb.k + 1)
    seconds = time.perf_counter() - t0
    _record_stage(manifest, "encode", cfg, inputs,
                  _output_digests(workdir, ["features.csv"]), seconds,
                  {"n_rows": len(rows)})
    logger.info("encode: %d image histograms in %.1fs", len(rows), seconds)
    return {"n_rows": len(rows)}


def _load_features(workdir: Path) -> tuple[np.ndarray, np.ndarray]:
    path = workdir / "features.csv"
    if not path.is_file():
        raise MissingInputError(f"{path} does not exist; run encode first")
    table = read_feature_csv(path)
    if table.shape[1] < 2:
        raise ValueError(f"{path}: need at least one feature column plus labels")
    return table[:, :-1].astype(np.float64), table[:, -1]


def _train_inputs(cfg: PipelineConfig) -> dict:
    workdir = _require_workdir(cfg)
    return {"features.csv": _digest_or_none(workdir / "features.csv")}


def run_train(cfg: PipelineConfig, manifest: dict, inputs: dict | None = None) -> dict:
    """Tune max depth on a held-out split, refit, and persist the tree."""
    t0 = time.perf_counter()
    workdir = _require_workdir(cfg)
    if inputs is None:
        inputs = _train_inputs(cfg)
    x, y = _load_features(workdir)
    best_depth, curve = tune_depth(x, y, depth_range=cfg.depth_range,
                                   split_seed=cfg.split_seed)
    train_idx, _ = stratified_split(y, cfg.split_seed)
    n_classes = int(y.max()) + 1
    tree = fit(x[train_idx], y[train_idx], max_depth=best_depth,
               n_classes=n_classes, split_seed=cfg.split_seed)
    save_tree(tree, workdir / "tree.json")
    (workdir / "reports").mkdir(exist_ok=True)
    write_depth_curve(curve, best_depth,
                      workdir / "reports" / "depth_curve.csv",
                      workdir / "reports" / "depth_curve.png")
    seconds = time.perf_counter() - t0
    outputs = ["tree.json", "reports/depth_curve.csv", "reports/depth_curve.png"]
    _record_stage(manifest, "train", cfg, inputs,
                  _output_digests(workdir, outputs), seconds,
                  {"best_depth": best_depth,
                   "curve": [[d, a] for d, a in curve]})
    logger.info("train: best depth %d (held-out acc %.3f) in %.1fs",
                best_depth, dict(curve)[best_depth], seconds)
    return {"best_depth": best_depth, "curve": curve}


def _eval_inputs(cfg: PipelineConfig) -> dict:
    workdir = _require_workdir(cfg)
    return {"features.csv": _digest_or_none(workdir / "features.csv"),
            "tree.json": _digest_or_none(workdir / "tree.json")}


def run_eval(cfg: PipelineConfig, manifest: dict, inputs: dict | None = None) -> dict:
    """Score the saved tree on the held-out split; write confusion reports."""
    t0 = time.perf_counter()
    workdir = _require_workdir(cfg)
    tree_path = workdir / "tree.json"
    if not tree_path.is_file():
        raise MissingModelError(f"{tree_path} does not exist; run train first")
    if inputs is None:
        inputs = _eval_inputs(cfg)
    tree = load_tree(tree_path)
    x, y = _load_features(workdir)
    seed = tree.split_seed if tree.split_seed is not None else cfg.split_seed
    _, test_idx = stratified_split(y, seed)
    accuracy, confusion = evaluate(tree, x[test_idx], y[test_idx])
    names = manifest.get("class_names") or [str(i) for i in range(tree.n_classes)]
    if len(names) != tree.n_classes:
        names = [str(i) for i in range(tree.n_classes)]
    (workdir / "reports").mkdir(exist_ok=True)
    write_confusion(confusion, names, accuracy,
                    workdir / "reports" / "confusion.csv",
                    workdir / "reports" / "confusion.txt",
                    workdir / "reports" / "confusion.png")
    seconds = time.perf_counter() - t0
    outputs = ["reports/confusion.csv", "reports/confusion.txt",
               "reports/confusion.png"]
    _record_stage(manifest, "eval", cfg, inputs,
                  _output_digests(workdir, outputs), seconds,
                  {"accuracy": accuracy, "n_eval": int(len(test_idx))})
    logger.info("eval: held-out accuracy %.4f on %d samples in %.1fs",
                accuracy, len(test_idx), seconds)
    return {"accuracy": accuracy, "confusion": confusion}


def run_predict(cfg: PipelineConfig, image_path: Path) -> tuple[str, np.ndarray]:
    """Classify one image with the artifacts already in the work directory."""
    workdir = _require_workdir(cfg)
    missing = [p for p in (workdir / "codebook.json", workdir / "tree.json",
                           workdir / MANIFEST_NAME, workdir / PATTERN_NAME)
               if not p.is_file()]
    if missing:
        raise MissingModelError(
            f"{missing[0]} does not exist; run the pipeline first"
        )
    manifest = load_manifest(workdir)
    cb = load_codebook(workdir / "codebook.json")
    tree = load_tree(workdir / "tree.json")
    pattern = load_pattern(workdir / PATTERN_NAME)

    img = load_image(image_path)
    img = resize(img, cfg.resize[0], cfg.resize[1])
    gray = to_grayscale(img)
    found = detect_and_compute(gray, cfg.orb, pattern=pattern)
    if not found:
        logger.warning("predict: no keypoints in %s; using the all-zero "
                       "histogram", image_path)
        descriptors = np.zeros((0, cfg.orb.n_tests // 8), dtype=np.uint8)
    else:
        descriptors = np.stack([d for _, d in found])
    counts = encode_image(cb, descriptors)
    label = predict(tree, counts)
    proba = predict_proba(tree, counts)
    names = manifest.get("class_names") or [str(i) for i in range(tree.n_classes)]
    if len(names) != tree.n_classes:
        names = [str(i) for i in range(tree.n_classes)]
    return names[label], proba


_STAGES = {
    "extract": (run_extract, _extract_inputs),
    "codebook": (run_codebook, _codebook_inputs),
    "encode": (run_encode, _encode_inputs),
    "train": (run_train, _train_inputs),
    "eval": (run_eval, _eval_inputs),
}


def run_stage(cfg: PipelineConfig, name: str) -> dict:
    """Run one stage under the workdir lock, updating the manifest."""
    runner, _ = _STAGES[name]
    workdir = _require_workdir(cfg)
    with workdir_lock(workdir):
        manifest = load_manifest(workdir)
        result = runner(cfg, manifest)
        save_manifest(workdir, manifest)
    return result


def run_pipeline(cfg: PipelineConfig) -> dict:
    """extract -> codebook -> encode -> train -> eval with digest resume."""
    workdir = _require_workdir(cfg)
    results: dict = {}
    with workdir_lock(workdir):
        manifest = load_manifest(workdir)
        for name in STAGE_ORDER:
            runner, inputs_of = _STAGES[name]
            inputs = inputs_of(cfg)
            if _stage_current(manifest, name, cfg, inputs, workdir):
                logger.info("%s: outputs up to date, skipping", name)
                results[name] = {"skipped": True}
                continue
            results[name] = runner(cfg, manifest, inputs=inputs)
            save_manifest(workdir, manifest)
        save_manifest(workdir, manifest)
    return results
