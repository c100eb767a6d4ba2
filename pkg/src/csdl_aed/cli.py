"""Command-line entry point.

Subcommands::

    learn-dict        learn an event dictionary from isolated recordings
    train             train per-event classifiers on development mixtures
    detect            detect events in test recordings
    evaluate          score detections (or hypothesis files) against references
    piano-experiment  reconstruction study of a rare note hidden in a piano event
    synth-corpus      write the synthetic desk-scale corpus as WAV + manifests

Exit status: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import __version__
from .classifier import ClassifierBank
from .config import RunConfig
from .dataio import Manifest, parse_annotations, write_annotations, write_wav
from .detection import Detection
from .dictionary import OverallDictionary, learn_baseline
from .errors import ConfigError, CsdlError
from .experiments import (
    DeskConfig, desk_corpus, histogram_table, run_piano_experiment, write_piano_outputs,
)
from .metrics import evaluate_all, report_json, report_table
from .pipeline import detect_recordings, event_spectra, train_classifiers

log = logging.getLogger("csdl_aed")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

DICT_FILE = "dictionary.mat"
MODEL_FILE = "classifiers.json"
REPORT_FILE = "report.json"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- helpers

def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "strategy", None):
        cfg = cfg.with_strategy(args.strategy)
    return cfg


def _manifest(path) -> Manifest:
    if path is None:
        raise UsageError("--manifest is required")
    if not Path(path).is_file():
        raise UsageError(f"manifest not found: {path}")
    return Manifest.load(path)


def _existing(path, what):
    if path is None:
        raise UsageError(f"--{what} is required")
    if not Path(path).exists():
        raise UsageError(f"{what} not found: {path}")
    return Path(path)


def _out_dir(args, targets) -> Path:
    out = Path(args.out)
    clash = [t for t in targets if (out / t).exists()]
    if clash and not args.force:
        raise UsageError(f"{out / clash[0]} exists; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- commands

def cmd_learn_dict(args) -> int:
    cfg = _load_config(args)
    man = _manifest(args.manifest)
    out = _out_dir(args, [DICT_FILE])
    dc = cfg.dictionary
    recs = list(man.recordings())
    specs = event_spectra(recs, man.labels, cfg.stft)
    rank = {"dl": dc.dl_rank, "enmf": dc.enmf_rank}.get(dc.strategy)
    d = learn_baseline(specs, dc.strategy, dc.seed, man.labels, rank=rank, K=dc.K, r_sub=dc.r_sub,
                       mfcc_cfg=cfg.mfcc, nmf_cfg=cfg.nmf.config(1))
    d.save(out / DICT_FILE)
    print(f"strategy {dc.strategy}: {d.n_atoms} atoms -> {out / DICT_FILE}")
    for event, n in d.atoms_per_event().items():
        print(f"  {event}: {n}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    man = _manifest(args.manifest)
    d = OverallDictionary.load(_existing(args.dict, "dict"))
    out = _out_dir(args, [MODEL_FILE])
    log.info("positive class weight %g, C %g", cfg.train.positive_class_weight, cfg.train.C)
    print(f"positive class weight: {cfg.train.positive_class_weight:g}")
    bank = train_classifiers(list(man.recordings()), d, man.labels, cfg.stft, cfg.train,
                             cfg.nmf.config())
    bank.save(out / MODEL_FILE)
    print(f"{len(bank.classifiers)} classifiers -> {out / MODEL_FILE}")
    for label in bank.labels:
        note = " (skipped)" if label in bank.skipped else ""
        print(f"  {label}: {bank.positive_counts.get(label, 0)} positive frames{note}")
    return EXIT_OK


def _run_detection(cfg, man, args):
    d = OverallDictionary.load(_existing(args.dict, "dict"))
    bank = ClassifierBank.load(_existing(args.model, "model"))
    bank.check_fingerprint(d.fingerprint())
    recs = list(man.recordings())
    dets: list[Detection] = detect_recordings(recs, d, bank, cfg.stft, cfg.detect.noise_rank,
                                              cfg.nmf.config(), cfg.postprocess)
    return recs, dets


def _write_report(out, refs, hyps, durations) -> dict:
    reports = evaluate_all(refs, hyps, durations)
    (out / REPORT_FILE).write_text(report_json(reports))
    print(report_table(reports))
    return reports


def _has_references(man) -> bool:
    return all(e.get("annotations") for e in man.entries) and bool(man.entries)


def cmd_detect(args) -> int:
    cfg = _load_config(args)
    man = _manifest(args.manifest)
    ids = [e.get("id", f"rec{i:03d}") for i, e in enumerate(man.entries)]
    targets = [f"{i}.txt" for i in ids] + ([REPORT_FILE] if _has_references(man) else [])
    out = _out_dir(args, targets)
    recs, dets = _run_detection(cfg, man, args)
    for rec, det in zip(recs, dets):
        write_annotations(out / f"{rec.recording_id}.txt", det.events)
        print(f"{rec.recording_id}: {len(det.events)} events")
    if _has_references(man):
        _write_report(out, [r.events for r in recs], [d.events for d in dets],
                      [r.clip.duration for r in recs])
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    man = _manifest(args.manifest)
    if not _has_references(man):
        raise UsageError("every manifest entry needs reference annotations to evaluate")
    out = _out_dir(args, [REPORT_FILE])
    if args.hyp:
        hyp_dir = _existing(args.hyp, "hyp")
        recs = list(man.recordings())
        hyps = []
        for rec in recs:
            f = hyp_dir / f"{rec.recording_id}.txt"
            hyps.append(parse_annotations(f) if f.exists() else [])
            if not f.exists():
                log.warning("no hypothesis file for %s; scored as empty", rec.recording_id)
    else:
        recs, dets = _run_detection(cfg, man, args)
        hyps = [d.events for d in dets]
    _write_report(out, [r.events for r in recs], hyps, [r.clip.duration for r in recs])
    return EXIT_OK


def cmd_piano_experiment(args) -> int:
    cfg = _load_config(args)
    pc = cfg.piano
    changes = {}
    if args.seeds is not None:
        changes["seeds"] = args.seeds
    if args.timbre:
        changes["timbre"] = args.timbre
    if args.workers is not None:
        changes["workers"] = args.workers
    if changes:
        pc = dataclasses.replace(pc, **changes)
    out = _out_dir(args, ["scores.csv", "histogram.txt", "summary.json"])

    def progress(t):
        log.info("seed %d: %s", t.seed, " ".join(f"{k}={v:.4f}" for k, v in t.scores.items()))

    res = run_piano_experiment(pc, progress)
    write_piano_outputs(res, out, svg=not args.no_svg)
    print(histogram_table(res))
    return EXIT_OK


def cmd_synth_corpus(args) -> int:
    seed = 0 if args.seed is None else args.seed
    out = _out_dir(args, ["train.json", "dev.json", "test.json"])
    isolated, dev, test, labels = desk_corpus(DeskConfig(seed=seed))
    for name, recs in (("train", isolated), ("dev", dev), ("test", test)):
        sub = out / name
        sub.mkdir(exist_ok=True)
        entries = []
        for rec in recs:
            write_wav(sub / f"{rec.recording_id}.wav", rec.clip)
            write_annotations(sub / f"{rec.recording_id}.txt", rec.events)
            entry = {"id": rec.recording_id, "audio": f"{name}/{rec.recording_id}.wav",
                     "annotations": f"{name}/{rec.recording_id}.txt"}
            if rec.label:
                entry["label"] = rec.label
            entries.append(entry)
        Manifest(labels, entries, out).save(out / f"{name}.json")
        print(f"{name}: {len(recs)} recordings -> {out / (name + '.json')}")
    return EXIT_OK


COMMANDS = {
    "learn-dict": cmd_learn_dict,
    "train": cmd_train,
    "detect": cmd_detect,
    "evaluate": cmd_evaluate,
    "piano-experiment": cmd_piano_experiment,
    "synth-corpus": cmd_synth_corpus,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="overrides every seed in the config")
    common.add_argument("--out", default=".", help="output directory (default: .)")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="csdl-aed", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("learn-dict", parents=[common], help="learn an event dictionary")
    s.add_argument("--manifest", help="isolated event recordings")
    s.add_argument("--strategy", choices=["dl", "enmf", "cndl", "csdl"])

    s = sub.add_parser("train", parents=[common], help="train event classifiers")
    s.add_argument("--manifest", help="annotated development recordings")
    s.add_argument("--dict", help=f"dictionary file ({DICT_FILE})")

    for name, helptext in (("detect", "detect events"), ("evaluate", "compute F-measures")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--manifest", help="test recordings")
        s.add_argument("--dict", help="dictionary file")
        s.add_argument("--model", help=f"classifier file ({MODEL_FILE})")
        if name == "evaluate":
            s.add_argument("--hyp", help="directory of <id>.txt hypothesis files; skips detection")

    s = sub.add_parser("piano-experiment", parents=[common], help="rare-note reconstruction study")
    s.add_argument("--seeds", type=int, help="number of seeds (default 100)")
    s.add_argument("--timbre", choices=["layered", "plain"])
    s.add_argument("--workers", type=int, help="parallel processes (default 1)")
    s.add_argument("--no-svg", action="store_true")

    sub.add_parser("synth-corpus", parents=[common], help="write the synthetic 4-event corpus")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CsdlError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
