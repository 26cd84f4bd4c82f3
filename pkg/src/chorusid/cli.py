"""Command-line pipeline orchestration.

Verbs: ingest | build-store | classify | eval | sweep. Options may come
from a TOML config file (--config); explicit flags win. Every run logs
the fully resolved configuration so it can be reproduced. Exit codes:
0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import tomllib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

from .audio import decode_wav
from .classifier import ClassifierConfig, Decision, Metric, classify, rejection_decision
from .errors import ChorusError
from .features import FEATURE_SPECS
from .ingest import ArchiveClient, ArchiveConfig, Manifest, load_manifest, save_manifest
from .metrics import (
    LabeledResult,
    accuracy_at_n,
    evaluate,
    mrr_at_n,
    rejection_sweep,
    report_to_json,
    write_per_class_csv,
    write_sweep_csv,
)
from .pipeline import build_store, query_vector_from_wav
from .store import load_store, save_store

log = logging.getLogger("chorusid")

_DEFAULTS = {
    "features": "mode1d",
    "k": 5,
    "metric": "l1",
    "tie_bias_m": 2.0,
    "instance_frames": 100,
    "balance_target": None,
    "seed": 0,
    "entropy_max": None,
    "n_list": "1,5,10",
    "quality": "A",
    "background": "none",
    "rate_limit": 1.0,
    "top": 10,
    "workers": 1,
}


@dataclass
class PipelineConfig:
    """Resolved run configuration; logged on every invocation."""

    command: str
    features: str = "mode1d"
    k: int = 5
    metric: str = "l1"
    tie_bias_m: float = 2.0
    instance_frames: int = 100
    balance_target: int | None = None
    seed: int = 0
    classes_file: str | None = None
    entropy_max: float | None = None
    n_list: tuple[int, ...] = (1, 5, 10)


def _existing_file(value: str) -> Path:
    path = Path(value)
    if not path.is_file():
        raise argparse.ArgumentTypeError(f"file not found: {value}")
    return path


def _resolve(args: argparse.Namespace, keys: list[str]) -> dict:
    """Layer defaults < config file < explicit flags."""
    config = {}
    if getattr(args, "config", None):
        with open(args.config, "rb") as fh:
            config = tomllib.load(fh)
    resolved = {}
    for key in keys:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            resolved[key] = flag_value
        elif key in config:
            resolved[key] = config[key]
        else:
            resolved[key] = _DEFAULTS.get(key)
    return resolved


def _parse_n_list(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in str(text).split(",") if tok.strip())


def _log_config(cfg: PipelineConfig) -> None:
    log.info("resolved config: %s", json.dumps(asdict(cfg), default=str, sort_keys=True))


def _classifier_config(cfg: PipelineConfig, store) -> ClassifierConfig:
    candidates = None
    if cfg.classes_file:
        wanted = [
            line.strip() for line in Path(cfg.classes_file).read_text().splitlines()
            if line.strip()
        ]
        ids = []
        for label in wanted:
            if label in store.classes.labels:
                ids.append(store.classes.id_of(label))
            else:
                log.warning("candidate species not in store: %s", label)
        candidates = tuple(ids)
    return ClassifierConfig(
        k=cfg.k,
        metric=Metric(cfg.metric),
        tie_bias_m=cfg.tie_bias_m,
        candidate_classes=candidates,
    )


def _wav_path(entry, audio_dir: Path | None) -> Path:
    candidates = []
    if entry.local_path and entry.local_path.endswith(".wav"):
        candidates.append(Path(entry.local_path))
    if audio_dir is not None:
        if entry.expected_wav:
            candidates.append(audio_dir / entry.expected_wav)
        candidates.append(audio_dir / f"XC{entry.recording_id}.wav")
    for cand in candidates:
        if cand.exists():
            return cand
    raise FileNotFoundError(
        f"no WAV for recording {entry.recording_id}; tried {[str(c) for c in candidates]}"
    )


# --- subcommands ---

def cmd_ingest(args) -> int:
    species = []
    if args.species_file:
        species.extend(
            ln.strip() for ln in args.species_file.read_text().splitlines() if ln.strip()
        )
    species.extend(args.species or [])
    if not species:
        raise UsageError("no species given (use --species or --species-file)")
    resolved = _resolve(args, ["quality", "background", "rate_limit"])

    if args.dry_run:
        for binomial in species:
            print(f"query: {binomial} q:{resolved['quality']} "
                  f"[background={resolved['background']}]")
        return 0

    client = ArchiveClient(ArchiveConfig(
        base_url=args.api_base or "",
        min_request_interval_s=float(resolved["rate_limit"]),
    ))
    manifest = client.query_archive(
        species,
        quality=resolved["quality"],
        background_none=resolved["background"] == "none",
        role=args.role,
    )
    if args.fetch:
        dest = args.dest_dir or Path(args.out).with_suffix("")
        manifest = client.fetch_audio(manifest, dest)
    save_manifest(manifest, args.out)
    print(f"{len(manifest.entries)} recordings -> {args.out}")
    return 0


def cmd_build_store(args) -> int:
    resolved = _resolve(args, ["features", "instance_frames", "balance_target", "seed"])
    cfg = PipelineConfig(
        command="build-store",
        features=resolved["features"],
        instance_frames=int(resolved["instance_frames"]),
        balance_target=None if resolved["balance_target"] in (None, "min")
        else int(resolved["balance_target"]),
        seed=int(resolved["seed"]),
    )
    _log_config(cfg)

    manifest = load_manifest(args.manifest)
    audio_dir = Path(args.audio_dir) if args.audio_dir else None
    clips_by_species: dict[str, list] = {}
    for entry in manifest.entries:
        path = _wav_path(entry, audio_dir)
        clip = decode_wav(path.read_bytes(), source_id=entry.recording_id)
        clips_by_species.setdefault(entry.species, []).append(clip)

    spec = FEATURE_SPECS[cfg.features]
    store, frame_counts = build_store(
        clips_by_species,
        feature_spec=spec,
        instance_frames=cfg.instance_frames,
        balance_target=cfg.balance_target,
        seed=cfg.seed,
    )
    for species in sorted(frame_counts):
        marker = "" if species in store.classes.labels else "  (excluded)"
        print(f"{species}\t{frame_counts[species]} selected frames{marker}")
    print(f"balance target: {store.n_instances_per_class} instances/class, "
          f"{store.n_classes} classes")
    with open(args.out, "wb") as fh:
        save_store(store, fh)
    print(f"store -> {args.out}")
    return 0


def _classify_paths(paths, store, ccfg, workers: int):
    spec = store.feature_spec

    def one(path):
        return classify(query_vector_from_wav(path, spec), store, ccfg)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, paths))
    return [one(p) for p in paths]


def cmd_classify(args) -> int:
    resolved = _resolve(args, ["k", "metric", "tie_bias_m", "entropy_max", "top", "workers"])
    with open(args.store, "rb") as fh:
        store = load_store(fh)
    cfg = PipelineConfig(
        command="classify",
        k=int(resolved["k"]),
        metric=str(resolved["metric"]),
        tie_bias_m=float(resolved["tie_bias_m"]),
        classes_file=str(args.classes) if args.classes else None,
        entropy_max=None if resolved["entropy_max"] is None else float(resolved["entropy_max"]),
    )
    _log_config(cfg)
    ccfg = _classifier_config(cfg, store)

    posteriors = _classify_paths(args.files, store, ccfg, int(resolved["workers"]))
    top = int(resolved["top"])
    docs = []
    for path, post in zip(args.files, posteriors):
        rejected = (
            cfg.entropy_max is not None
            and rejection_decision(post, cfg.entropy_max) is Decision.REJECT
        )
        ranked = [
            {"species": store.classes.labels[cid], "prob": post.prob_of(cid)}
            for cid in post.ranking[:top]
        ]
        docs.append({
            "file": str(path),
            "rejected": rejected,
            "entropy": post.entropy,
            "normalized_entropy": post.normalized_entropy,
            "results": ranked,
        })

    if args.json:
        print(json.dumps(docs, indent=2))
        return 0
    for doc in docs:
        print(doc["file"])
        if doc["rejected"]:
            print(f"  REJECTED (normalized entropy {doc['normalized_entropy']:.3f} "
                  f"> {cfg.entropy_max})")
            continue
        for i, row in enumerate(doc["results"], start=1):
            print(f"  {i:2d}. {row['species']:<30s} p={row['prob']:.3f}")
        print(f"  normalized entropy: {doc['normalized_entropy']:.3f}")
    return 0


def _labeled_results(args, store, cfg: PipelineConfig, workers: int) -> list[LabeledResult]:
    manifest = load_manifest(args.manifest)
    audio_dir = Path(args.audio_dir) if args.audio_dir else None
    ccfg = _classifier_config(cfg, store)
    paths, true_ids = [], []
    for entry in manifest.entries:
        paths.append(_wav_path(entry, audio_dir))
        true_ids.append(
            store.classes.id_of(entry.species)
            if entry.species in store.classes.labels else -1
        )
    posteriors = _classify_paths(paths, store, ccfg, workers)
    return [LabeledResult(t, p) for t, p in zip(true_ids, posteriors)]


def cmd_eval(args) -> int:
    resolved = _resolve(args, ["k", "metric", "tie_bias_m", "n_list", "workers"])
    with open(args.store, "rb") as fh:
        store = load_store(fh)
    cfg = PipelineConfig(
        command="eval",
        k=int(resolved["k"]),
        metric=str(resolved["metric"]),
        tie_bias_m=float(resolved["tie_bias_m"]),
        classes_file=str(args.classes) if args.classes else None,
        n_list=_parse_n_list(resolved["n_list"]),
    )
    _log_config(cfg)

    results = _labeled_results(args, store, cfg, int(resolved["workers"]))
    report = evaluate(results, store.classes.labels, n_list=cfg.n_list)

    per_class_path = Path(f"{args.out_prefix}_per_class.csv")
    with per_class_path.open("w", newline="") as fh:
        write_per_class_csv(report, fh)
    json_path = Path(f"{args.out_prefix}_report.json")
    json_path.write_text(report_to_json(report) + "\n")

    s = report.roc_summary
    print(f"AUC-ROC weighted mean {s.weighted_mean:.3f} median {s.median:.3f} "
          f"range [{s.min:.3f}, {s.max:.3f}]")
    print(f"accuracy {report.accuracy:.3f}")
    print(f"reports -> {per_class_path}, {json_path}")
    return 0


def cmd_sweep(args) -> int:
    resolved = _resolve(args, ["k", "metric", "tie_bias_m", "n_list", "workers"])
    with open(args.store, "rb") as fh:
        store = load_store(fh)
    cfg = PipelineConfig(
        command="sweep",
        k=int(resolved["k"]),
        metric=str(resolved["metric"]),
        tie_bias_m=float(resolved["tie_bias_m"]),
        classes_file=str(args.classes) if args.classes else None,
        n_list=_parse_n_list(resolved["n_list"]),
    )
    _log_config(cfg)

    results = _labeled_results(args, store, cfg, int(resolved["workers"]))
    candidate_count = len(results[0].posterior.candidate_ids)
    curve = rejection_sweep(results, candidate_count)

    sweep_path = Path(f"{args.out_prefix}_sweep.csv")
    with sweep_path.open("w", newline="") as fh:
        write_sweep_csv(curve, fh)
    topn_path = Path(f"{args.out_prefix}_topn.csv")
    with topn_path.open("w", newline="") as fh:
        fh.write("n,accuracy_at_n,mrr_at_n\n")
        for n in cfg.n_list:
            fh.write(f"{n},{accuracy_at_n(results, n):.6f},{mrr_at_n(results, n):.6f}\n")

    full = curve[-1]
    print(f"MRR@10 at full acceptance: {full.mrr_at_10:.3f}")
    print(f"curves -> {sweep_path}, {topn_path}")
    return 0


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chorusid",
        description="Bird sound identification: training, classification, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=_existing_file, help="TOML config file")

    p = sub.add_parser("ingest", parents=[common],
                       help="query the recording archive and write a manifest")
    p.add_argument("--species", action="append", help="binomial name (repeatable)")
    p.add_argument("--species-file", type=_existing_file,
                   help="file with one binomial name per line")
    p.add_argument("--quality", help="archive quality rating filter (default A)")
    p.add_argument("--background", choices=["none", "any"],
                   help="background-species filter (default none)")
    p.add_argument("--role", choices=["TRAIN", "TEST"], default="TRAIN")
    p.add_argument("--out", required=True, help="output manifest (.jsonl)")
    p.add_argument("--api-base", help="archive API base URL override")
    p.add_argument("--rate-limit", type=float, help="min seconds between requests")
    p.add_argument("--fetch", action="store_true", help="also download audio")
    p.add_argument("--dest-dir", type=Path, help="audio download directory")
    p.add_argument("--dry-run", action="store_true",
                   help="print planned queries, no network")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-store", parents=[common],
                       help="build a training store from a TRAIN manifest")
    p.add_argument("--manifest", type=_existing_file, required=True)
    p.add_argument("--audio-dir", help="directory of converted WAV files")
    p.add_argument("--features", choices=sorted(FEATURE_SPECS))
    p.add_argument("--instance-frames", type=int, dest="instance_frames")
    p.add_argument("--balance-target", dest="balance_target",
                   help="instances per class, or 'min' (default)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output store file")
    p.set_defaults(func=cmd_build_store)

    p = sub.add_parser("classify", parents=[common],
                       help="rank species for one or more WAV files")
    p.add_argument("--store", type=_existing_file, required=True)
    p.add_argument("files", nargs="+", type=_existing_file, metavar="WAV")
    p.add_argument("--k", type=int)
    p.add_argument("--metric", choices=[m.value for m in Metric])
    p.add_argument("--tie-bias-m", type=float, dest="tie_bias_m")
    p.add_argument("--classes", type=_existing_file,
                   help="candidate species file (one label per line)")
    p.add_argument("--entropy-max", type=float, dest="entropy_max",
                   help="reject when normalized entropy exceeds this")
    p.add_argument("--top", type=int, help="list length (default 10)")
    p.add_argument("--workers", type=int)
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_classify)

    for verb, func in (("eval", cmd_eval), ("sweep", cmd_sweep)):
        p = sub.add_parser(verb, parents=[common],
                           help=f"{verb} a store against a labelled TEST manifest")
        p.add_argument("--store", type=_existing_file, required=True)
        p.add_argument("--manifest", type=_existing_file, required=True)
        p.add_argument("--audio-dir", help="directory of converted WAV files")
        p.add_argument("--out-prefix", required=True)
        p.add_argument("--k", type=int)
        p.add_argument("--metric", choices=[m.value for m in Metric])
        p.add_argument("--tie-bias-m", type=float, dest="tie_bias_m")
        p.add_argument("--classes", type=_existing_file)
        p.add_argument("--n-list", dest="n_list", help="comma-separated N values")
        p.add_argument("--workers", type=int)
        p.set_defaults(func=func)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits 2
    except (ChorusError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
