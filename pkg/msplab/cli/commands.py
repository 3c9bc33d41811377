"""
Pipeline commands and the exit-code contract.

Every command resolves one RunConfig (JSON file < explicit flags < MSP_SEED),
loads its inputs, runs a single stage and writes its artifact atomically.
Input files are never modified.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from msplab.cli.corpus import CorpusSplits, parse_target, split_corpus
from msplab.cli.parser import build_parser
from msplab.core.config import settings
from msplab.core.errors import ConfigurationError, InputError, MSPError, MalformedFileError, UsageError, describe
from msplab.core.storage import read_bytes, read_json, read_jsonl, write_json, write_jsonl
from msplab.models import ModelParams
from msplab.schemas.evo import EvoConfig, SearchTrace, SparsityIndividual
from msplab.schemas.model import ModelConfig, TrainHyper
from msplab.schemas.run import RunConfig
from msplab.schemas.sensitivity import LayerSensitivityReport
from msplab.services.analysis import summarize_search, write_summary
from msplab.services.checkpoint import load_checkpoint, save_checkpoint
from msplab.services.evolution import (
    FitnessEvaluator,
    exhaustive_oracle,
    run_search,
    validate_individual,
)
from msplab.services.language_model import apply_masks, init_model, perplexity, train_model
from msplab.services.masks import (
    ScoreSet,
    baseline_uniform_perplexity,
    build_maskset,
    compute_scores,
    export_masks,
    sparsity_report,
    verify_maskset,
)
from msplab.services.sensitivity import fim_layer_traces, hessian_diag_fd, loss_landscape

logger = logging.getLogger(__name__)

DEFAULT_EPSILONS = [0.0, 1e-3, 1e-2, 1e-1]

Handler = Callable[[argparse.Namespace, RunConfig], None]


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """--config JSON, overridden by explicit flags, with MSP_SEED taking precedence over both."""
    merged: Dict[str, Any] = {}
    if getattr(args, "config", None):
        document = read_json(args.config)
        if not isinstance(document, dict):
            raise MalformedFileError(f"{args.config}: run config must be a JSON object")
        merged.update(document)
    for field in RunConfig.model_fields:
        value = getattr(args, field, None)
        if value is not None:
            merged[field] = value
    if settings.MSP_SEED is not None:
        merged["seed"] = settings.MSP_SEED
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as e:
        raise UsageError("; ".join(f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors())) from e


def _require(value: Optional[str], flag: str) -> str:
    if not value:
        raise UsageError(f"{flag} is required")
    return value


def _model(cfg: RunConfig) -> ModelParams:
    params, _ = load_checkpoint(_require(cfg.model_path, "--model"))
    return params


def _splits(cfg: RunConfig, window: int) -> CorpusSplits:
    data = read_bytes(_require(cfg.corpus, "--corpus"))
    return split_corpus(data, cfg.splits, cfg.seed, window, cfg.calib_size)


def _target(cfg: RunConfig, params: ModelParams) -> Tuple[int, int]:
    n, m = parse_target(_require(cfg.target, "--target"))
    if m != params.config.group_size:
        raise InputError(f"target M={m} does not match the model's group size {params.config.group_size}")
    return n, m


def _fitness_tokens(splits: CorpusSplits, limit: Optional[int]) -> bytes:
    return splits.calib[: limit or settings.MSP_FITNESS_BYTES]


def _scores(cfg: RunConfig, params: ModelParams, splits: CorpusSplits) -> ScoreSet:
    return compute_scores(params, cfg.metric, splits.calibration)


def _chosen_individual(args: argparse.Namespace, params: ModelParams, n: int, m: int) -> Optional[SparsityIndividual]:
    """--individual genes, else the final individual of --run, else None."""
    if getattr(args, "individual", None):
        try:
            genes = tuple(int(g) for g in args.individual.split(","))
        except ValueError as e:
            raise UsageError(f"--individual must be comma-separated integers, got '{args.individual}'") from e
    elif getattr(args, "run", None):
        genes = tuple(_load_trace(args.run).individual)
    else:
        return None
    ind = SparsityIndividual(genes=genes, group_size=m, target_n=n)
    if ind.num_layers != params.config.num_prunable_layers:
        raise InputError(f"individual has {ind.num_layers} genes, model has {params.config.num_prunable_layers} layers")
    report = validate_individual(ind)
    if not report:
        raise InputError(f"invalid individual: {report.message}")
    return ind


def _load_trace(path: str) -> SearchTrace:
    try:
        return SearchTrace.from_records(read_jsonl(path))
    except (ValidationError, ValueError, KeyError, AttributeError) as e:
        raise MalformedFileError(f"{path} is not a search trace: {e}") from e


def _emit(cfg: RunConfig, payload: Any) -> None:
    if cfg.out:
        write_json(cfg.out, payload)
        logger.info(f"Wrote {cfg.out}")
    else:
        print(json.dumps(payload, sort_keys=True, indent=2))


def cmd_train(args: argparse.Namespace, cfg: RunConfig) -> None:
    out = _require(cfg.out, "--out")
    document: Dict[str, Any] = read_json(cfg.model_config_path) if cfg.model_config_path else {}
    if not isinstance(document, dict):
        raise MalformedFileError(f"{cfg.model_config_path}: model config must be a JSON object")
    for flag, field in (
        ("embed_dim", "embed_dim"),
        ("hidden_dim", "hidden_dim"),
        ("blocks", "num_hidden_blocks"),
        ("window", "window"),
        ("group_size", "group_size"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            document[field] = value
    try:
        config = ModelConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigurationError("; ".join(err["msg"] for err in e.errors())) from e
    try:
        hyper = TrainHyper(lr=args.lr, epochs=args.epochs, batch_size=args.batch_size, seed=cfg.seed)
    except ValidationError as e:
        raise UsageError("; ".join(err["msg"] for err in e.errors())) from e

    splits = _splits(cfg, config.window)
    params = init_model(config, cfg.seed)
    logger.info(f"Training {params.num_parameters} parameters on {len(splits.train)} bytes")
    trained, curve = train_model(params, splits.train, hyper)
    save_checkpoint(trained, config, out)
    logger.info(f"Held-out perplexity: {perplexity(trained, splits.eval):.4f}")
    if args.curve_out:
        write_json(args.curve_out, {"epoch_loss": curve})


def cmd_sensitivity(args: argparse.Namespace, cfg: RunConfig) -> None:
    params = _model(cfg)
    splits = _splits(cfg, params.config.window)
    report = fim_layer_traces(params, splits.calibration)
    _emit(cfg, report.to_file())

    if args.landscape_out:
        epsilons = args.epsilons or DEFAULT_EPSILONS
        curves = [
            loss_landscape(params, splits.calibration, layer, epsilons, args.directions, cfg.seed).model_dump()
            for layer in range(params.config.num_prunable_layers)
        ]
        write_json(args.landscape_out, {"curves": curves})
        logger.info(f"Wrote {args.landscape_out}")

    if args.fd_out:
        fd_report = hessian_diag_fd(params, splits.calibration, args.fd_step)
        write_json(args.fd_out, {**fd_report.to_file(), "estimator": fd_report.estimator.value})
        logger.info(f"Wrote {args.fd_out}")


def cmd_search(args: argparse.Namespace, cfg: RunConfig) -> None:
    out = _require(cfg.out, "--out")
    params = _model(cfg)
    n, m = _target(cfg, params)
    splits = _splits(cfg, params.config.window)
    try:
        evo = EvoConfig(
            population_size=cfg.population_size,
            generations=cfg.generations,
            mutation_rate=cfg.mutation_rate,
            seed=cfg.seed,
            init_mode=cfg.init_mode,
            metric=cfg.metric,
            max_retries=cfg.max_retries,
            target_n=n,
            group_size=m,
        )
    except ValidationError as e:
        raise UsageError("; ".join(err["msg"] for err in e.errors())) from e

    scores = _scores(cfg, params, splits)
    tokens = _fitness_tokens(splits, args.fitness_bytes)
    evaluator = FitnessEvaluator(params, scores, tokens, threads=cfg.threads)
    uniform = evaluator.evaluate(SparsityIndividual.uniform(len(scores), n, m))
    logger.info(f"Uniform {cfg.target} ({cfg.metric.value}) fitness ppl: {uniform.ppl:.4f}")

    trace = run_search(params, scores, tokens, evo, evaluator=evaluator)
    write_jsonl(out, trace.to_records())
    logger.info(f"Best ppl {trace.ppl:.4f} at {trace.individual}; trace written to {out}")


def cmd_prune(args: argparse.Namespace, cfg: RunConfig) -> None:
    out = _require(cfg.out, "--out")
    params = _model(cfg)
    n, m = _target(cfg, params)
    splits = _splits(cfg, params.config.window)
    ind = _chosen_individual(args, params, n, m) or SparsityIndividual.uniform(params.config.num_prunable_layers, n, m)

    masks = build_maskset(_scores(cfg, params, splits), ind, params.config.layer_names)
    check = verify_maskset(masks, ind)
    if not check:
        raise InputError(f"mask verification failed: {check.message}")
    save_checkpoint(apply_masks(params, masks), params.config, out)
    report = sparsity_report(params, masks)
    logger.info(f"Pruned with {list(ind.genes)}; overall zero fraction {report.overall_zero_fraction:.4f}")
    if args.masks_out:
        export_masks(masks, args.masks_out)


def cmd_eval(args: argparse.Namespace, cfg: RunConfig) -> None:
    params = _model(cfg)
    splits = _splits(cfg, params.config.window)
    result: Dict[str, Any] = {"eval_bytes": len(splits.eval), "dense_ppl": perplexity(params, splits.eval)}
    if cfg.target is None:
        if getattr(args, "individual", None) or getattr(args, "run", None):
            raise UsageError("--individual and --run need --target")
    else:
        n, m = _target(cfg, params)
        scores = _scores(cfg, params, splits)
        result.update(
            target=cfg.target,
            metric=cfg.metric.value,
            uniform_ppl=baseline_uniform_perplexity(params, scores, splits.eval, n, m),
        )
        ind = _chosen_individual(args, params, n, m)
        if ind is not None:
            masks = build_maskset(scores, ind, params.config.layer_names)
            result.update(individual=list(ind.genes), searched_ppl=perplexity(params, splits.eval, masks))
    _emit(cfg, result)


def cmd_oracle(args: argparse.Namespace, cfg: RunConfig) -> None:
    params = _model(cfg)
    n, m = _target(cfg, params)
    splits = _splits(cfg, params.config.window)
    scores = _scores(cfg, params, splits)
    result = exhaustive_oracle(
        params,
        scores,
        _fitness_tokens(splits, args.fitness_bytes),
        len(scores),
        n,
        m,
        cap=args.cap,
        threads=cfg.threads,
    )
    _emit(cfg, result.model_dump())


def cmd_analyze(args: argparse.Namespace, cfg: RunConfig) -> None:
    out_dir = _require(cfg.out_dir, "--out-dir")
    runs: List[str] = args.runs or []
    if not runs:
        raise UsageError("--runs needs at least one search trace")
    if args.groups and len(args.groups) != len(runs):
        raise UsageError(f"--groups has {len(args.groups)} labels for {len(runs)} runs")

    traces = [(Path(path).stem, _load_trace(path)) for path in runs]
    groups = dict(zip((run_id for run_id, _ in traces), args.groups)) if args.groups else None
    sensitivity = None
    if args.sensitivity:
        try:
            sensitivity = LayerSensitivityReport.model_validate(read_json(args.sensitivity))
        except ValidationError as e:
            raise MalformedFileError(f"{args.sensitivity} is not a sensitivity report: {e}") from e
    if sensitivity is not None and cfg.target is None:
        raise UsageError("--sensitivity needs --target to read sparsity levels")
    m = parse_target(cfg.target)[1] if cfg.target else None
    summary, points = summarize_search(traces, sensitivity, m, groups)
    write_summary(out_dir, summary, points, traces)


COMMAND_HANDLERS: Dict[str, Handler] = {
    "train": cmd_train,
    "sensitivity": cmd_sensitivity,
    "search": cmd_search,
    "prune": cmd_prune,
    "eval": cmd_eval,
    "oracle": cmd_oracle,
    "analyze": cmd_analyze,
}


def dispatch(argv: Sequence[str]) -> int:
    """Run one command; 0 on success, 2 usage, 3 input/format, 4 numerical/search."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as e:
        return int(e.code or 0)

    handler = COMMAND_HANDLERS.get(args.command or "")
    if handler is None:
        parser.print_usage(sys.stderr)
        return UsageError.exit_code
    if args.log_level:
        logging.getLogger().setLevel(args.log_level.upper())

    try:
        handler(args, resolve_config(args))
    except MSPError as e:
        code, message = describe(e)
        logger.error(f"{args.command} failed: {message}")
        print(f"error: {message}", file=sys.stderr)
        return code
    return 0
