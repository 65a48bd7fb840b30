import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

import pandas as pd
from pydantic import ValidationError

from . import __version__
from .config import PipelineConfig
from .constants import CliConstants, EvaluationConstants, PoolingConstants, SynthConstants
from .core.custom_exceptions import EqmException, UsageError
from .schemas.model import EqmLevel
from .services import dataset_io_service, extraction_service, fusion_service, rq_service, synth_service
from .services.eqm_model_service import EqmModelService
from .services.evaluation_service import EvaluationService
from .services.forest_service import feature_importance
from .services.hevc_meta_service import probe_metadata

logger = logging.getLogger(__name__)


class CliArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting"""

    def error(self, message: str):
        raise UsageError(message)


class RunManifest:
    """Checksums of a run's inputs and outputs plus the effective config"""

    def __init__(self, command: str, config: PipelineConfig):
        self.command = command
        self.config = config
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}

    @staticmethod
    def _sha256(path: Path) -> str:
        digest = hashlib.sha256()
        with Path(path).open("rb") as handle:
            for chunk in iter(lambda: handle.read(1 << 20), b""):
                digest.update(chunk)
        return digest.hexdigest()

    def add_input(self, path: Optional[Path]) -> None:
        if path is not None:
            self.inputs[str(path)] = self._sha256(path)

    def add_output(self, path: Path) -> None:
        self.outputs[str(path)] = self._sha256(path)

    def write(self, primary_output: Path) -> Path:
        path = Path(f"{primary_output}{CliConstants.MANIFEST_SUFFIX}")
        document = {
            "command": self.command,
            "version": __version__,
            "config": self.config.echo(),
            "inputs": self.inputs,
            "outputs": self.outputs,
        }
        path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def setup_logging(level: str) -> None:
    """Logs go to standard error; data goes to files or standard output"""
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        raise UsageError(f"Unknown log level '{level}'")
    logging.basicConfig(level=numeric, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger().setLevel(numeric)


def _emit_json(document: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(document + "\n")
    else:
        Path(out).write_text(document + "\n", encoding="utf-8")


def _load_dataset(args, manifest: RunManifest):
    features = dataset_io_service.video_level_features(dataset_io_service.read_table(args.features))
    mos = dataset_io_service.read_mos(args.mos)
    externals = dataset_io_service.read_externals(args.externals) if args.externals else None
    for path in (args.features, args.mos, args.externals):
        manifest.add_input(path)
    return dataset_io_service.build_dataset(features, mos, externals)


# ── Subcommands ────────────────────────────────────────────────────────────────

def cmd_probe(args, config: PipelineConfig, manifest: RunManifest) -> Optional[Path]:
    if args.duration is None and args.frames is None:
        raise UsageError("probe needs --duration or --frames")
    stream = Path(args.stream).read_bytes()
    manifest.add_input(args.stream)
    meta = probe_metadata(
        stream,
        duration=args.duration,
        frame_rate_override=args.frame_rate or config.frame_rate_override,
        frame_count=args.frames,
    )
    _emit_json(json.dumps(meta.as_record(), sort_keys=True), args.out)
    return args.out


def cmd_extract(args, config: PipelineConfig, manifest: RunManifest) -> Path:
    if args.stream and len(args.traces) != 1:
        raise UsageError("--stream applies to a single trace; use --stream-dir for several")
    rows = []
    for trace in args.traces:
        trace = Path(trace)
        stream = Path(args.stream) if args.stream else None
        if args.stream_dir:
            stream = Path(args.stream_dir) / f"{trace.stem}.hevc"
        manifest.add_input(trace)
        manifest.add_input(stream)
        segments = extraction_service.extract_trace_file(
            trace,
            config.norm,
            stream_path=stream,
            pixel_format=config.pixel_format,
            frame_rate_override=config.frame_rate_override,
            segment_frames=config.segment_frames,
            average=args.average,
            threads=config.threads,
        )
        rows.extend((trace.stem, index, segment) for index, segment in segments)
    return dataset_io_service.write_table(dataset_io_service.features_frame(rows), args.out)


def cmd_fuse(args, config: PipelineConfig, manifest: RunManifest) -> Path:
    target = dataset_io_service.mos_only_dataset(dataset_io_service.read_mos(args.target))
    manifest.add_input(args.target)
    sources = []
    for mos_path, anchors_path in args.source or []:
        sources.append((
            dataset_io_service.mos_only_dataset(dataset_io_service.read_mos(mos_path)),
            dataset_io_service.read_anchors(anchors_path),
        ))
        manifest.add_input(mos_path)
        manifest.add_input(anchors_path)

    fused, maps = fusion_service.fuse_datasets(target, sources)
    out = dataset_io_service.write_mos({row.video_id: row.mos for row in fused.rows}, args.out)
    if args.maps_out:
        _emit_json(json.dumps([m.model_dump() for m in maps], indent=2), args.maps_out)
        manifest.add_output(args.maps_out)
    return out


def cmd_train(args, config: PipelineConfig, manifest: RunManifest) -> Path:
    data = _load_dataset(args, manifest)
    params_base, params_residual = config.forest_params()
    model = EqmModelService.train_eqm(
        data,
        config.level,
        params_base,
        params_residual,
        two_stage=config.two_stage,
        base_qp=config.base_qp,
        external_columns=args.external_column or (),
        norm_config=config.norm,
        threads=config.threads,
    )
    return EqmModelService.save_model(model, args.out)


def cmd_predict(args, config: PipelineConfig, manifest: RunManifest) -> Path:
    model = EqmModelService.load_model(args.model)
    features = dataset_io_service.video_level_features(dataset_io_service.read_table(args.features))
    if args.externals:
        externals = dataset_io_service.read_externals(args.externals)
        for video_id, record in features.items():
            record.update(externals.get(video_id, {}))
    for path in (args.model, args.features, args.externals):
        manifest.add_input(path)
    scores = EqmModelService.predict_many(model, list(features.values()))
    return dataset_io_service.write_scores(list(features), scores, args.out)


def cmd_crossval(args, config: PipelineConfig, manifest: RunManifest) -> Path:
    if args.folds < EvaluationConstants.MIN_FOLDS:
        raise UsageError(f"--folds must be at least {EvaluationConstants.MIN_FOLDS}")
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    data = _load_dataset(args, manifest)
    params_base, params_residual = config.forest_params()
    report = EvaluationService.cross_validate(
        data,
        config.level,
        folds=args.folds,
        reps=args.reps,
        seed=config.seed,
        params_base=params_base,
        params_residual=params_residual,
        two_stage=config.two_stage,
        base_qp=config.base_qp,
        external_columns=args.external_column or (),
        threads=config.threads,
    )
    _emit_json(report.model_dump_json(indent=2), args.out)
    if args.reps_out:
        frame = pd.DataFrame([r.model_dump() for r in report.repetitions])
        frame.insert(0, "repetition", range(len(report.repetitions)))
        dataset_io_service.write_table(frame, args.reps_out)
        manifest.add_output(args.reps_out)
    return args.out


def cmd_eval(args, config: PipelineConfig, manifest: RunManifest) -> Optional[Path]:
    if args.model:
        if not args.features or not args.mos:
            raise UsageError("eval --model needs --features and --mos")
        data = _load_dataset(args, manifest)
        manifest.add_input(args.model)
        report = EvaluationService.evaluate_model(EqmModelService.load_model(args.model), data)
    else:
        if not args.pred or not args.mos:
            raise UsageError("eval needs --pred and --mos (or --model, --features and --mos)")
        scores = dataset_io_service.read_scores(args.pred)
        truth = dataset_io_service.read_mos(args.mos)
        manifest.add_input(args.pred)
        manifest.add_input(args.mos)
        shared = [video_id for video_id in scores if video_id in truth]
        if len(shared) != len(scores) or len(shared) != len(truth):
            logger.warning("Evaluating %d shared video(s) of %d scored and %d rated", len(shared), len(scores), len(truth))
        metrics = EvaluationService.correlations([scores[v] for v in shared], [truth[v] for v in shared])
        report = metrics
    _emit_json(report.model_dump_json(indent=2), args.out)
    return args.out


def _parse_resolution(text: str) -> tuple[int, int]:
    try:
        width, height = (int(part) for part in text.lower().split("x"))
    except ValueError as exc:
        raise UsageError(f"Resolution '{text}' is not WIDTHxHEIGHT") from exc
    return width, height


def cmd_synth(args, config: PipelineConfig, manifest: RunManifest) -> Path:
    resolutions = tuple(_parse_resolution(text) for text in args.resolution) if args.resolution else None
    try:
        videos = synth_service.generate_videos(args.videos, args.frames, config.seed, resolutions)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    written = synth_service.write_videos(videos, args.out)
    for path in written:
        manifest.add_output(path)
    return Path(args.out) / "mos.csv"


def cmd_rq(args, config: PipelineConfig, manifest: RunManifest) -> Path:
    features = dataset_io_service.video_level_features(dataset_io_service.read_table(args.features))
    scores = dataset_io_service.read_scores(args.scores)
    manifest.add_input(args.features)
    manifest.add_input(args.scores)
    video_ids = [video_id for video_id in scores if video_id in features]
    points = rq_service.rq_points(
        video_ids,
        [features[v][PoolingConstants.META_BITRATE] for v in video_ids],
        [features[v][PoolingConstants.META_RESOLUTION] for v in video_ids],
        [scores[v] for v in video_ids],
    )
    out = dataset_io_service.write_table(points, args.out)
    crossovers_path = args.crossovers_out or Path(args.out).with_suffix(".crossovers.csv")
    dataset_io_service.write_table(rq_service.find_crossovers(points), crossovers_path)
    manifest.add_output(crossovers_path)
    return out


def cmd_importance(args, config: PipelineConfig, manifest: RunManifest) -> Path:
    model = EqmModelService.load_model(args.model)
    manifest.add_input(args.model)
    records = []
    for name, forest in (("base", model.base), ("residual", model.residual)):
        if forest is None:
            continue
        for feature, importance in feature_importance(forest).items():
            records.append({"forest": name, "feature": feature, "importance": importance})
    frame = pd.DataFrame(records, columns=["forest", "feature", "importance"])
    frame = frame.sort_values(["forest", "importance"], ascending=[True, False], kind="mergesort")
    return dataset_io_service.write_table(frame, args.out)


# ── Parser ─────────────────────────────────────────────────────────────────────

def _add_dataset_args(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument("--features", type=Path, required=required, help="Feature CSV from extract")
    parser.add_argument("--mos", type=Path, required=required, help="MOS CSV (video_id, mos)")
    parser.add_argument("--externals", type=Path, help="External (full-reference) columns CSV keyed by video_id")
    parser.add_argument("--external-column", action="append", help="External column to use at level fr (repeatable)")


def create_parser() -> CliArgumentParser:
    parser = CliArgumentParser(prog="eqm", description="EQM bitstream video quality toolkit")
    parser.add_argument("--config", type=Path, help="JSON config file")
    parser.add_argument("--seed", type=int, help="Run seed (forests, folds, synthetic data)")
    parser.add_argument("--threads", type=int, help="Worker threads")
    parser.add_argument("--log-level", help="Logging level (DEBUG, INFO, WARNING, ...)")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=CliArgumentParser)

    probe = subparsers.add_parser("probe", help="Metadata features of an HEVC Annex-B stream")
    probe.add_argument("--stream", type=Path, required=True)
    probe.add_argument("--duration", type=float, help="Stream duration in seconds")
    probe.add_argument("--frames", type=int, help="Frame count (duration = frames / frame rate)")
    probe.add_argument("--frame-rate", type=float, help="Frame rate override")
    probe.add_argument("--out", type=Path)
    probe.set_defaults(handler=cmd_probe)

    extract = subparsers.add_parser("extract", help="Traces to segment feature CSV")
    extract.add_argument("traces", nargs="+", type=Path)
    extract.add_argument("--out", type=Path, required=True)
    extract.add_argument("--stream", type=Path, help="Annex-B stream of a single trace")
    extract.add_argument("--stream-dir", type=Path, help="Directory holding <trace stem>.hevc streams")
    extract.add_argument("--segment-frames", type=int, help="Fixed segment length in frames")
    extract.add_argument("--average", action="store_true", help="Emit one averaged row per video")
    extract.add_argument("--pixel-format", help="Pixel format when metadata comes from the trace")
    extract.add_argument("--frame-rate", type=float, help="Frame rate override")
    extract.set_defaults(handler=cmd_extract)

    fuse = subparsers.add_parser("fuse", help="Map source studies onto the target MOS scale")
    fuse.add_argument("--target", type=Path, required=True, help="Target-scale MOS CSV")
    fuse.add_argument("--source", nargs=2, action="append", type=Path, metavar=("MOS_CSV", "ANCHORS_CSV"))
    fuse.add_argument("--out", type=Path, required=True)
    fuse.add_argument("--maps-out", type=Path, help="JSON file for the fitted per-source maps")
    fuse.set_defaults(handler=cmd_fuse)

    train = subparsers.add_parser("train", help="Train an EQM model")
    _add_dataset_args(train)
    train.add_argument("--level", choices=[level.value for level in EqmLevel])
    train.add_argument("--single-stage", action="store_true", help="One forest on the full feature set")
    train.add_argument("--no-base-qp", action="store_true", help="Base forest without mean_avgQP")
    train.add_argument("--out", type=Path, required=True)
    train.set_defaults(handler=cmd_train)

    predict = subparsers.add_parser("predict", help="Score feature rows with a trained model")
    predict.add_argument("--model", type=Path, required=True)
    predict.add_argument("--features", type=Path, required=True)
    predict.add_argument("--externals", type=Path)
    predict.add_argument("--out", type=Path, required=True)
    predict.set_defaults(handler=cmd_predict)

    crossval = subparsers.add_parser("crossval", help="Repeated k-fold cross-validation")
    _add_dataset_args(crossval)
    crossval.add_argument("--level", choices=[level.value for level in EqmLevel])
    crossval.add_argument("--single-stage", action="store_true")
    crossval.add_argument("--no-base-qp", action="store_true")
    crossval.add_argument("--folds", type=int, default=EvaluationConstants.DEFAULT_FOLDS)
    crossval.add_argument("--reps", type=int, default=EvaluationConstants.DEFAULT_REPETITIONS)
    crossval.add_argument("--out", type=Path, required=True)
    crossval.add_argument("--reps-out", type=Path, help="CSV of per-repetition metrics")
    crossval.set_defaults(handler=cmd_crossval)

    evaluate = subparsers.add_parser("eval", help="Correlation metrics of scores against MOS")
    evaluate.add_argument("--pred", type=Path, help="Scores CSV (video_id, score)")
    evaluate.add_argument("--model", type=Path, help="Score --features with this model instead of --pred")
    _add_dataset_args(evaluate, required=False)
    evaluate.add_argument("--out", type=Path)
    evaluate.set_defaults(handler=cmd_eval)

    synth = subparsers.add_parser("synth", help="Seeded synthetic traces, streams and MOS")
    synth.add_argument("--out", type=Path, required=True, help="Output directory")
    synth.add_argument("--videos", type=int, default=SynthConstants.DEFAULT_VIDEOS)
    synth.add_argument("--frames", type=int, default=SynthConstants.DEFAULT_FRAMES)
    synth.add_argument("--resolution", action="append", help="WIDTHxHEIGHT, multiples of 8 (repeatable)")
    synth.set_defaults(handler=cmd_synth)

    rq = subparsers.add_parser("rq", help="Rate-quality curve points and crossovers")
    rq.add_argument("--scores", type=Path, required=True)
    rq.add_argument("--features", type=Path, required=True)
    rq.add_argument("--out", type=Path, required=True)
    rq.add_argument("--crossovers-out", type=Path)
    rq.set_defaults(handler=cmd_rq)

    importance = subparsers.add_parser("importance", help="Feature importance of a trained model")
    importance.add_argument("--model", type=Path, required=True)
    importance.add_argument("--out", type=Path, required=True)
    importance.set_defaults(handler=cmd_importance)

    return parser


def build_config(args) -> PipelineConfig:
    """Config file values overridden by explicit command line flags."""
    overrides = {
        "seed": args.seed,
        "threads": args.threads,
        "log_level": args.log_level,
        "level": getattr(args, "level", None),
        "segment_frames": getattr(args, "segment_frames", None),
        "pixel_format": getattr(args, "pixel_format", None),
        "frame_rate_override": getattr(args, "frame_rate", None),
    }
    if getattr(args, "single_stage", False):
        overrides["two_stage"] = False
    if getattr(args, "no_base_qp", False):
        overrides["base_qp"] = False
    return PipelineConfig.load(args.config, **overrides)


def run_command(argv: Optional[Sequence[str]] = None) -> int:
    """Parse, run one subcommand and return its exit status."""
    try:
        args = create_parser().parse_args(argv)
        config = build_config(args)
        setup_logging(config.log_level)
        logger.debug("Effective config: %s", json.dumps(config.echo(), sort_keys=True))

        handler: Callable = args.handler
        manifest = RunManifest(args.command, config)
        primary = handler(args, config, manifest)
        if primary is not None:
            manifest.add_output(primary)
            manifest.write(primary)
        return CliConstants.EXIT_OK
    except UsageError as exc:
        _report_error(exc.error_code, exc.message)
        return CliConstants.EXIT_USAGE
    except EqmException as exc:
        _report_error(exc.error_code, exc.message)
        return CliConstants.EXIT_ERROR
    except OSError as exc:
        _report_error("cli.Io", str(exc))
        return CliConstants.EXIT_ERROR
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first.get("loc", ())) or exc.title
        _report_error("cli.InvalidInput", f"{where}: {first.get('msg')}")
        return CliConstants.EXIT_ERROR


def _report_error(code: str, message: str) -> None:
    sys.stderr.write(f"error code={code} message={json.dumps(message)}\n")


def main() -> int:
    return run_command(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
