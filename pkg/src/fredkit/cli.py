"""Single command-line entry point for every pipeline stage.

Stages compose through files: score CSV directories, events TSVs and JSON
configs.  Exit codes: 0 success, 1 validation error, 2 I/O error.  Results
go to stdout or output files; diagnostics go to stderr.  Every stage is
deterministic: reruns with the same inputs, config and seed are
byte-identical, independent of ``--jobs``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, fields as dataclass_fields
from pathlib import Path

import numpy as np

from . import augment as aug
from . import ensemble as ens
from . import metrics as met
from . import pooling as pool_mod
from . import postproc as post
from . import pseudolabel as pseudo
from .core import (
    ClassVocabulary,
    format_events_tsv,
    parse_events_tsv,
    read_score_dir,
    write_score_dir,
)
from .freqconv import (
    BasisKernelBank,
    PartialConvConfig,
    fdy_forward,
    freq_attention,
    load_conv_weights,
    naive_oracle_forward,
    pfd_forward,
    random_attention,
    random_bank,
)

_MASK64 = (1 << 64) - 1
_PARTNER_STREAM = 0x9E3779B9

_STAGE_SECTIONS = ("augment", "pooling", "median", "csebb", "pseudo_filter", "psds", "mpauc")
_IO_KEYS = {
    "features_dir",
    "out_dir",
    "scores_dir",
    "out",
    "runs",
    "table",
    "pruned_labels",
    "detections",
    "groundtruth",
    "gt_dir",
    "report",
    "weights",
    "vocabulary",
    "frame_period",
    "duration_hours",
}
_TUPLE_KEYS = {"warp_ratio_range", "filter_db_range", "filter_bands_range"}


class _UsageError(Exception):
    def __init__(self, message: str, parser: argparse.ArgumentParser):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        raise _UsageError(message, self)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    allowed = set(_STAGE_SECTIONS) | {"seed", "io"}
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ValueError(f"{path}: unknown config keys {unknown}")
    io = doc.get("io", {})
    if not isinstance(io, dict):
        raise ValueError(f"{path}: 'io' must be a JSON object")
    unknown_io = sorted(set(io) - _IO_KEYS)
    if unknown_io:
        raise ValueError(f"{path}: unknown io keys {unknown_io}")
    return doc


def _coerce(key: str, value):
    if key in _TUPLE_KEYS and isinstance(value, list):
        return tuple(value)
    if key == "speech_like" and isinstance(value, list):
        return frozenset(value)
    return value


def _build_spec(spec_cls, section: dict, flag_values: dict):
    """Dataclass defaults, overlaid by the config section, then by flags."""
    allowed = {f.name for f in dataclass_fields(spec_cls)}
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ValueError(f"unknown config keys {unknown} for {spec_cls.__name__}")
    kwargs = {k: _coerce(k, v) for k, v in section.items()}
    for key, value in flag_values.items():
        if value is not None:
            kwargs[key] = _coerce(key, value)
    return spec_cls(**kwargs)


def _spec_to_json(spec) -> dict:
    doc = asdict(spec)
    for key, value in doc.items():
        if isinstance(value, tuple):
            doc[key] = list(value)
        elif isinstance(value, frozenset):
            doc[key] = sorted(value)
    return doc


def _io_value(args, config: dict, key: str, required: bool = True):
    value = getattr(args, key, None)
    if value is None:
        value = config.get("io", {}).get(key)
    if value is None and required:
        raise ValueError(f"missing required path: --{key.replace('_', '-')}")
    return value


def _resolve_frame_period(args, config: dict, fallback: float) -> float:
    value = _io_value(args, config, "frame_period", required=False)
    value = fallback if value is None else float(value)
    if not value > 0:
        raise ValueError("--frame-period must be positive")
    return value


def _resolve_jobs(args) -> int:
    jobs = getattr(args, "jobs", None)
    if jobs is None:
        jobs = int(os.environ.get("FREDKIT_JOBS", "1"))
    if jobs < 1:
        raise ValueError("--jobs must be >= 1")
    return jobs


def _parallel_map(fn, items, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(fn, items))


def _load_vocabulary(args, config: dict) -> ClassVocabulary:
    path = _io_value(args, config, "vocabulary", required=False)
    if path is None:
        return ClassVocabulary.default()
    return ClassVocabulary.from_tsv(path)


def _dump_config(section_name: str | None, spec, io: dict, seed: int | None = None) -> int:
    doc: dict = {}
    if seed is not None:
        doc["seed"] = seed
    if section_name is not None and spec is not None:
        doc[section_name] = _spec_to_json(spec)
    doc["io"] = {k: v for k, v in io.items() if v is not None}
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def _print_result(value: float) -> None:
    print(format(value, ".12g"))


# ---------------------------------------------------------------------------
# augment


def _cmd_augment(args) -> int:
    config = _load_config(args.config)
    section = dict(config.get("augment", {}))
    flag_values = {
        "mixup_alpha": args.mixup_alpha,
        "mixup_lambda": args.mixup_lambda,
        "warp_ratio_range": args.warp_range,
        "filter_db_range": args.db_range,
        "filter_bands_range": args.bands,
        "seed": args.seed,
    }
    if args.seed is None and "seed" not in section and "seed" in config:
        flag_values["seed"] = int(config["seed"])
    cfg = _build_spec(aug.AugmentConfig, section, flag_values)
    io = {
        "features_dir": _io_value(args, config, "features_dir", required=not args.dump_config),
        "out_dir": _io_value(args, config, "out_dir", required=not args.dump_config),
    }
    if args.dump_config:
        return _dump_config("augment", cfg, io, seed=cfg.seed)

    features = aug.read_feature_dir(io["features_dir"])
    clip_ids = sorted(features)
    shapes = {features[c].values.shape for c in clip_ids}
    if len(shapes) > 1:
        raise ValueError(f"feature shapes differ across clips: {sorted(shapes)}")
    partner_rng = np.random.default_rng(
        np.random.SeedSequence([cfg.seed & _MASK64, _PARTNER_STREAM])
    )
    perm = partner_rng.permutation(len(clip_ids))

    def run(index: int) -> aug.SpectroFeature:
        clip_id = clip_ids[index]
        partner = features[clip_ids[perm[index]]]
        stream = aug.RngStream(cfg.seed, clip_id)
        out, _ = aug.augment_chain(features[clip_id], partner, None, None, stream, cfg)
        return out

    results = _parallel_map(run, range(len(clip_ids)), _resolve_jobs(args))
    aug.write_feature_dir(list(results), io["out_dir"])
    print(f"augmented {len(results)} clips -> {io['out_dir']}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# conv-check


def _relative_error(actual: np.ndarray, expected: np.ndarray) -> float:
    scale = max(float(np.abs(expected).max()), 1e-12)
    return float(np.abs(actual - expected).max()) / scale


def _conv_check_case(seed: int, index: int, weights_path: str | None) -> float:
    rng = np.random.default_rng(np.random.SeedSequence([seed & _MASK64, index]))
    if weights_path is not None:
        bank, att_params, partial = load_conv_weights(weights_path)
        n_frames = int(rng.integers(3, 13))
        min_bins = max(bank.freq_dilations)
        n_bins = int(rng.integers(min_bins, max(13, min_bins + 4)))
        x = rng.normal(size=(bank.in_channels, n_frames, n_bins))
        att = freq_attention(x, att_params)
        err = _relative_error(fdy_forward(x, bank, att), naive_oracle_forward(x, bank, att))
        if partial is not None:
            expected = np.concatenate(
                [
                    naive_oracle_forward(
                        x,
                        _static_as_bank(partial),
                        np.ones((1, n_bins)),
                    ),
                    naive_oracle_forward(x, bank, att),
                ]
            )
            err = max(err, _relative_error(pfd_forward(x, partial, bank, att_params), expected))
        return err

    num_basis = int(rng.choice([1, 2, 4]))
    if num_basis == 4 and rng.random() < 0.5:
        dilations = (1, 1, 2, 3)
    else:
        dilations = tuple(int(d) for d in rng.integers(1, 4, size=num_basis))
    c_in = int(rng.integers(1, 5))
    c_dyn = int(rng.integers(1, 5))
    n_frames = int(rng.integers(1, 13))
    n_bins = int(rng.integers(4, 13))
    bank = random_bank(rng, num_basis, c_dyn, c_in, dilations)
    att_params = random_attention(rng, c_in, num_basis)
    x = rng.normal(size=(c_in, n_frames, n_bins))
    att = freq_attention(x, att_params)
    err = _relative_error(fdy_forward(x, bank, att), naive_oracle_forward(x, bank, att))
    if index % 2 == 0:
        c_static = int(rng.integers(1, 7))
        static = random_bank(rng, 1, c_static, c_in, (1,))
        partial = PartialConvConfig(
            c_dyn / (c_dyn + c_static), static.kernels[0], static.biases[0]
        )
        expected = np.concatenate(
            [
                naive_oracle_forward(x, _static_as_bank(partial), np.ones((1, n_bins))),
                naive_oracle_forward(x, bank, att),
            ]
        )
        err = max(err, _relative_error(pfd_forward(x, partial, bank, att_params), expected))
    return err


def _static_as_bank(partial) -> BasisKernelBank:
    return BasisKernelBank(
        partial.static_kernel[None], partial.static_bias[None], (1,)
    )


def _cmd_conv_check(args) -> int:
    config = _load_config(args.config)
    weights = _io_value(args, config, "weights", required=False)
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    if args.dump_config:
        return _dump_config(None, None, {"weights": weights}, seed=seed)
    jobs = _resolve_jobs(args)
    errors = _parallel_map(
        lambda i: _conv_check_case(seed, i, weights), range(args.cases), jobs
    )
    worst = max(errors)
    print(f"{worst:.3e}")
    if worst > args.tol:
        print(f"equivalence FAILED: {worst:.3e} > {args.tol:.3e}", file=sys.stderr)
        return 1
    print(f"{args.cases} cases within {args.tol:.1e}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# score-matrix stages


def _cmd_pool(args) -> int:
    config = _load_config(args.config)
    spec = _build_spec(
        pool_mod.PoolingSpec,
        dict(config.get("pooling", {})),
        {"pad_frames": args.pad, "window": args.window, "stride": args.stride},
    )
    frame_period = _resolve_frame_period(args, config, args.frame_period_default)
    io = {
        "scores_dir": _io_value(args, config, "scores_dir", required=not args.dump_config),
        "out_dir": _io_value(args, config, "out_dir", required=not args.dump_config),
        "vocabulary": _io_value(args, config, "vocabulary", required=False),
        "frame_period": frame_period,
    }
    if args.dump_config:
        return _dump_config("pooling", spec, io)
    vocabulary = _load_vocabulary(args, config)
    matrices = read_score_dir(io["scores_dir"], frame_period, vocabulary)
    jobs = _resolve_jobs(args)
    pooled = _parallel_map(
        lambda clip_id: pool_mod.coarse_pool(matrices[clip_id], spec), sorted(matrices), jobs
    )
    write_score_dir(pooled, io["out_dir"], vocabulary)
    print(f"pooled {len(pooled)} clips -> {io['out_dir']}", file=sys.stderr)
    return 0


def _cmd_median(args) -> int:
    config = _load_config(args.config)
    spec = _build_spec(post.MedianSpec, dict(config.get("median", {})), {"window": args.window})
    frame_period = _resolve_frame_period(args, config, args.frame_period_default)
    io = {
        "scores_dir": _io_value(args, config, "scores_dir", required=not args.dump_config),
        "out_dir": _io_value(args, config, "out_dir", required=not args.dump_config),
        "vocabulary": _io_value(args, config, "vocabulary", required=False),
        "frame_period": frame_period,
    }
    if args.dump_config:
        return _dump_config("median", spec, io)
    vocabulary = _load_vocabulary(args, config)
    matrices = read_score_dir(io["scores_dir"], frame_period, vocabulary)
    jobs = _resolve_jobs(args)
    filtered = _parallel_map(
        lambda clip_id: post.median_filter(matrices[clip_id], spec), sorted(matrices), jobs
    )
    write_score_dir(filtered, io["out_dir"], vocabulary)
    print(f"filtered {len(filtered)} clips -> {io['out_dir']}", file=sys.stderr)
    return 0


def _cmd_csebb(args) -> int:
    config = _load_config(args.config)
    spec = _build_spec(
        post.CSebbSpec,
        dict(config.get("csebb", {})),
        {
            "avg_window": args.avg_window,
            "step_window": args.step_window,
            "onset_threshold": args.onset_threshold,
            "offset_threshold": args.offset_threshold,
            "merge_ratio": args.merge_ratio,
            "score_floor": args.score_floor,
            "score_mode": args.score_mode,
        },
    )
    frame_period = _resolve_frame_period(args, config, args.frame_period_default)
    io = {
        "scores_dir": _io_value(args, config, "scores_dir", required=not args.dump_config),
        "out": _io_value(args, config, "out", required=not args.dump_config),
        "vocabulary": _io_value(args, config, "vocabulary", required=False),
        "frame_period": frame_period,
    }
    if args.dump_config:
        return _dump_config("csebb", spec, io)
    vocabulary = _load_vocabulary(args, config)
    matrices = read_score_dir(io["scores_dir"], frame_period, vocabulary)
    jobs = _resolve_jobs(args)
    per_clip = _parallel_map(
        lambda clip_id: post.csebb_extract(matrices[clip_id], spec, vocabulary),
        sorted(matrices),
        jobs,
    )
    boxes = [box for clip_boxes in per_clip for box in clip_boxes]
    out_path = Path(io["out"])
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(format_events_tsv(boxes, with_scores=True), encoding="utf-8")
    print(f"wrote {len(boxes)} boxes -> {out_path}", file=sys.stderr)
    return 0


def _cmd_ensemble(args) -> int:
    config = _load_config(args.config)
    frame_period = _resolve_frame_period(args, config, args.frame_period_default)
    io = {
        "runs": args.runs if args.runs else config.get("io", {}).get("runs"),
        "out_dir": _io_value(args, config, "out_dir", required=not args.dump_config),
        "vocabulary": _io_value(args, config, "vocabulary", required=False),
        "frame_period": frame_period,
    }
    if args.dump_config:
        return _dump_config(None, None, io)
    if not io["runs"]:
        raise ValueError("missing required path: --runs")
    vocabulary = _load_vocabulary(args, config)
    run_dirs = [read_score_dir(d, frame_period, vocabulary) for d in io["runs"]]
    clip_ids = sorted(run_dirs[0])
    for directory, run in zip(io["runs"][1:], run_dirs[1:]):
        if sorted(run) != clip_ids:
            raise ValueError(f"run {directory} covers a different clip set")
    jobs = _resolve_jobs(args)
    averaged = _parallel_map(
        lambda clip_id: ens.average_scores([run[clip_id] for run in run_dirs]),
        clip_ids,
        jobs,
    )
    write_score_dir(averaged, io["out_dir"], vocabulary)
    print(f"averaged {len(io['runs'])} runs over {len(clip_ids)} clips", file=sys.stderr)
    return 0


def _cmd_select_best(args) -> int:
    config = _load_config(args.config)
    table = _io_value(args, config, "table", required=not args.dump_config)
    if args.dump_config:
        return _dump_config(None, None, {"table": table})
    runs = ens.parse_runs_tsv(table)
    best = ens.select_best(runs)
    print(best.model_id)
    print(f"sum score {best.sum_score:.6f}", file=sys.stderr)
    return 0


def _cmd_filter_pseudo(args) -> int:
    config = _load_config(args.config)
    section = dict(config.get("pseudo_filter", {}))
    if args.spec is not None:
        spec_doc = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        if not isinstance(spec_doc, dict):
            raise ValueError(f"{args.spec}: spec must be a JSON object")
        section.update(spec_doc)
    spec = _build_spec(
        pseudo.PseudoFilterSpec,
        section,
        {
            "keep_threshold": args.keep_threshold,
            "floor_threshold": args.floor_threshold,
            "hard_threshold": args.hard_threshold,
        },
    )
    frame_period = _resolve_frame_period(args, config, args.frame_period_default)
    io = {
        "scores_dir": _io_value(args, config, "scores_dir", required=not args.dump_config),
        "out": _io_value(args, config, "out", required=not args.dump_config),
        "pruned_labels": _io_value(args, config, "pruned_labels", required=not args.dump_config),
        "vocabulary": _io_value(args, config, "vocabulary", required=False),
        "frame_period": frame_period,
    }
    if args.dump_config:
        return _dump_config("pseudo_filter", spec, io)
    vocabulary = _load_vocabulary(args, config)
    matrices = read_score_dir(io["scores_dir"], frame_period, vocabulary)
    jobs = _resolve_jobs(args)
    clip_ids = sorted(matrices)
    confs = _parallel_map(
        lambda clip_id: pseudo.clip_confidence(matrices[clip_id]), clip_ids, jobs
    )
    kept, pruned = pseudo.filter_audioset(dict(zip(clip_ids, confs)), spec, vocabulary)
    out_path = Path(io["out"])
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("clip_id\n" + "".join(f"{c}\n" for c in kept), encoding="utf-8")
    labels_dir = Path(io["pruned_labels"])
    labels_dir.mkdir(parents=True, exist_ok=True)
    lines = ["clip_id\tevent_label\tconfidence"]
    for clip_id in kept:
        for name in sorted(pruned[clip_id]):
            lines.append(f"{clip_id}\t{name}\t{pruned[clip_id][name]:.6f}")
    (labels_dir / "pruned_labels.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"kept {len(kept)} of {len(clip_ids)} clips", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# eval


def _cmd_eval_psds1(args) -> int:
    config = _load_config(args.config)
    spec = _build_spec(
        met.PsdsSpec,
        dict(config.get("psds", {})),
        {
            "rho_dtc": args.rho_dtc,
            "rho_gtc": args.rho_gtc,
            "alpha_st": args.alpha_st,
            "e_max": args.e_max,
        },
    )
    duration_hours = _io_value(args, config, "duration_hours", required=False)
    io = {
        "detections": _io_value(args, config, "detections", required=not args.dump_config),
        "groundtruth": _io_value(args, config, "groundtruth", required=not args.dump_config),
        "report": _io_value(args, config, "report", required=False),
        "duration_hours": duration_hours,
    }
    if args.dump_config:
        return _dump_config("psds", spec, io)
    if duration_hours is None:
        raise ValueError("missing required value: --duration-hours")
    duration_hours = float(duration_hours)
    detections = parse_events_tsv(io["detections"])
    ground_truth = parse_events_tsv(io["groundtruth"])
    value = met.psds1(detections, ground_truth, duration_hours, spec)
    _print_result(value)
    if io["report"]:
        curves = met.psd_roc(detections, ground_truth, duration_hours, spec)
        report = {
            "psds1": value,
            "spec": _spec_to_json(spec),
            "dataset_duration_hours": duration_hours,
            "classes": {
                cls: {
                    "operating_points": [asdict(op) for op in ops],
                    "staircase": [
                        [float(x), float(y)] for x, y in zip(*met.staircase_points(ops))
                    ],
                }
                for cls, ops in curves.items()
            },
        }
        Path(io["report"]).write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return 0


def _cmd_eval_mpauc(args) -> int:
    config = _load_config(args.config)
    spec = _build_spec(
        met.MpaucSpec,
        dict(config.get("mpauc", {})),
        {
            "max_fpr": args.max_fpr,
            "segment_length": args.segment_length,
            "gt_binarize": args.gt_binarize,
            "standardized": args.standardized,
        },
    )
    frame_period = _resolve_frame_period(args, config, args.frame_period_default)
    io = {
        "scores_dir": _io_value(args, config, "scores_dir", required=not args.dump_config),
        "gt_dir": _io_value(args, config, "gt_dir", required=not args.dump_config),
        "report": _io_value(args, config, "report", required=False),
        "vocabulary": _io_value(args, config, "vocabulary", required=False),
        "frame_period": frame_period,
    }
    if args.dump_config:
        return _dump_config("mpauc", spec, io)
    vocabulary = _load_vocabulary(args, config)
    class_names = args.classes.split(",") if args.classes else None
    scores = read_score_dir(io["scores_dir"], frame_period, vocabulary)
    gts = read_score_dir(io["gt_dir"], frame_period, vocabulary)
    value = met.mpauc(scores, gts, spec, vocabulary, class_names)
    _print_result(value)
    if io["report"]:
        subset = class_names or list(vocabulary.dataset_classes("maestro"))
        per_class: dict[str, float | None] = {}
        for name in subset:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                try:
                    per_class[name] = met.mpauc(scores, gts, spec, vocabulary, [name])
                except ValueError:
                    per_class[name] = None
        report = {"mpauc": value, "spec": _spec_to_json(spec), "per_class": per_class}
        Path(io["report"]).write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return 0


def _cmd_eval_sum(args) -> int:
    if args.dump_config:
        return _dump_config(None, None, {})
    _print_result(met.sum_score(args.psds1, args.mpauc))
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def _add_common(parser: argparse.ArgumentParser, frame_period: float | None = None) -> None:
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--dump-config", action="store_true", help="print the effective config and exit")
    parser.add_argument("--jobs", type=int, default=None, help="worker threads (default: FREDKIT_JOBS or 1)")
    parser.add_argument("--vocabulary", help="vocabulary TSV (default: bundled 27 classes)")
    if frame_period is not None:
        parser.add_argument(
            "--frame-period",
            type=float,
            default=None,
            help=f"seconds per input frame (default {frame_period})",
        )
        parser.set_defaults(frame_period_default=frame_period)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fredkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("augment", help="mixup + frequency warp + dB filter curve")
    _add_common(p)
    p.add_argument("--features-dir")
    p.add_argument("--out-dir")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--mixup-alpha", type=float, default=None)
    p.add_argument("--mixup-lambda", type=float, default=None)
    p.add_argument("--warp-range", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    p.add_argument("--db-range", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    p.add_argument("--bands", type=int, nargs=2, default=None, metavar=("LO", "HI"))
    p.set_defaults(handler=_cmd_augment)

    p = sub.add_parser("conv-check", help="oracle equivalence suite for dynamic conv")
    _add_common(p)
    p.add_argument("--weights", help="JSON weight sidecar; omit for random cases")
    p.add_argument("--cases", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(handler=_cmd_conv_check)

    p = sub.add_parser("pool", help="coarse prediction pooling")
    _add_common(p, frame_period=0.064)
    p.add_argument("--scores-dir")
    p.add_argument("--out-dir")
    p.add_argument("--pad", type=int, default=None, dest="pad")
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.set_defaults(handler=_cmd_pool)

    p = sub.add_parser("median", help="class-independent running median")
    _add_common(p, frame_period=0.064)
    p.add_argument("--scores-dir")
    p.add_argument("--out-dir")
    p.add_argument("--window", type=int, default=None)
    p.set_defaults(handler=_cmd_median)

    p = sub.add_parser("csebb", help="change-detection bounding boxes")
    _add_common(p, frame_period=0.064)
    p.add_argument("--scores-dir")
    p.add_argument("--out")
    p.add_argument("--avg-window", type=int, default=None)
    p.add_argument("--step-window", type=int, default=None)
    p.add_argument("--onset-threshold", type=float, default=None)
    p.add_argument("--offset-threshold", type=float, default=None)
    p.add_argument("--merge-ratio", type=float, default=None)
    p.add_argument("--score-floor", type=float, default=None)
    p.add_argument("--score-mode", choices=("mean", "max"), default=None)
    p.set_defaults(handler=_cmd_csebb)

    p = sub.add_parser("ensemble", help="average score matrices across runs")
    _add_common(p, frame_period=0.064)
    p.add_argument("--runs", nargs="+", default=None)
    p.add_argument("--out-dir")
    p.set_defaults(handler=_cmd_ensemble)

    p = sub.add_parser("select-best", help="pick the run with the best sum score")
    _add_common(p)
    p.add_argument("--table", help="TSV: model_id, psds1, mpauc")
    p.set_defaults(handler=_cmd_select_best)

    p = sub.add_parser("filter-pseudo", help="filter pseudo-labelled clips")
    _add_common(p, frame_period=0.064)
    p.add_argument("--scores-dir")
    p.add_argument("--spec", help="JSON file with filter thresholds")
    p.add_argument("--out", help="kept clip list TSV")
    p.add_argument("--pruned-labels", help="directory for the pruned label table")
    p.add_argument("--keep-threshold", type=float, default=None)
    p.add_argument("--floor-threshold", type=float, default=None)
    p.add_argument("--hard-threshold", type=float, default=None)
    p.set_defaults(handler=_cmd_filter_pseudo)

    p = sub.add_parser("eval", help="metrics")
    eval_sub = p.add_subparsers(dest="metric", required=True, parser_class=_Parser)

    q = eval_sub.add_parser("psds1")
    _add_common(q)
    q.add_argument("--detections")
    q.add_argument("--groundtruth")
    q.add_argument("--duration-hours", type=float, default=None)
    q.add_argument("--rho-dtc", type=float, default=None)
    q.add_argument("--rho-gtc", type=float, default=None)
    q.add_argument("--alpha-st", type=float, default=None)
    q.add_argument("--e-max", type=float, default=None)
    q.add_argument("--report", help="write a JSON report with per-class curves")
    q.set_defaults(handler=_cmd_eval_psds1)

    q = eval_sub.add_parser("mpauc")
    _add_common(q, frame_period=1.0)
    q.add_argument("--scores-dir")
    q.add_argument("--gt-dir")
    q.add_argument("--max-fpr", type=float, default=None)
    q.add_argument("--segment-length", type=float, default=None)
    q.add_argument("--gt-binarize", type=float, default=None)
    q.add_argument("--standardized", action=argparse.BooleanOptionalAction, default=None)
    q.add_argument("--classes", help="comma-separated class subset (default: MAESTRO classes)")
    q.add_argument("--report", help="write a JSON report with per-class values")
    q.set_defaults(handler=_cmd_eval_mpauc)

    q = eval_sub.add_parser("sum")
    q.add_argument("--config", help=argparse.SUPPRESS)
    q.add_argument("--dump-config", action="store_true", help=argparse.SUPPRESS)
    q.add_argument("--jobs", type=int, default=None, help=argparse.SUPPRESS)
    q.add_argument("--psds1", type=float, required=True)
    q.add_argument("--mpauc", type=float, required=True)
    q.set_defaults(handler=_cmd_eval_sum)

    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        exc.parser.print_usage(sys.stderr)
        print(f"fredkit: error: {exc}", file=sys.stderr)
        return 1
    try:
        return int(args.handler(args) or 0)
    except (ValueError, KeyError) as exc:
        print(f"fredkit: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"fredkit: i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
