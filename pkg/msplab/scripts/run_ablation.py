"""
Toy-scale ablations over one trained checkpoint.

Studies: initialisation mode, mutation rate, population size and calibration
size, each over several seeds, plus searched-vs-uniform perplexity for both
metrics. Every run's trace goes to <out>/traces/ and the grouped summary to
<out>/ via the analysis service.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Tuple

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from msplab.cli.corpus import parse_target, split_corpus
from msplab.core.config import settings
from msplab.core.storage import read_bytes, write_json, write_jsonl
from msplab.schemas.evo import EvoConfig, InitMode, Metric, SearchTrace, SparsityIndividual
from msplab.services.analysis import summarize_search, write_summary
from msplab.services.checkpoint import load_checkpoint
from msplab.services.evolution import FitnessEvaluator, run_search
from msplab.services.masks import compute_scores
from msplab.services.sensitivity import fim_layer_traces

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

STUDIES: Dict[str, List[Tuple[str, dict]]] = {
    "init": [("init=sensitivity", {"init_mode": InitMode.SENSITIVITY}), ("init=random", {"init_mode": InitMode.RANDOM})],
    "mutation": [(f"mutation={rate}", {"mutation_rate": rate}) for rate in (0.1, 0.3, 0.5, 0.7, 1.0)],
    "population": [(f"pop={p}", {"population_size": p}) for p in (8, 12, 16, 20)],
    "calibration": [(f"calib={c}", {"calib_size": c}) for c in (16, 32, 64, 128)],
}


def main() -> None:
    parser = argparse.ArgumentParser(description="Run the search ablations on a trained checkpoint")
    parser.add_argument("--model", required=True)
    parser.add_argument("--corpus", required=True)
    parser.add_argument("--target", default="3:4")
    parser.add_argument("--gens", type=int, default=20)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--studies", nargs="+", default=list(STUDIES), choices=list(STUDIES))
    parser.add_argument("--out", required=True)
    args = parser.parse_args()

    params, _ = load_checkpoint(args.model)
    data = read_bytes(args.corpus)
    n, m = parse_target(args.target)
    out = Path(args.out)
    L = params.config.num_prunable_layers

    traces: List[Tuple[str, SearchTrace]] = []
    groups: Dict[str, str] = {}
    comparison = []
    reference = split_corpus(data, (0.8, 0.1, 0.1), 0, params.config.window, settings.MSP_CALIB_SIZE)
    sensitivity = fim_layer_traces(params, reference.calibration)

    for seed in range(args.seeds):
        for study in args.studies:
            for label, overrides in STUDIES[study]:
                calib_size = overrides.get("calib_size", settings.MSP_CALIB_SIZE)
                splits = split_corpus(data, (0.8, 0.1, 0.1), seed, params.config.window, calib_size)
                evo_fields = {k: v for k, v in overrides.items() if k != "calib_size"}
                cfg = EvoConfig(seed=seed, generations=args.gens, target_n=n, group_size=m, **evo_fields)
                scores = compute_scores(params, cfg.metric, splits.calibration)
                tokens = splits.calib[: settings.MSP_FITNESS_BYTES]
                trace = run_search(params, scores, tokens, cfg)
                run_id = f"{study}-{label}-s{seed}"
                write_jsonl(out / "traces" / f"{run_id}.jsonl", trace.to_records())
                traces.append((run_id, trace))
                groups[run_id] = label

        splits = split_corpus(data, (0.8, 0.1, 0.1), seed, params.config.window, settings.MSP_CALIB_SIZE)
        tokens = splits.calib[: settings.MSP_FITNESS_BYTES]
        for metric in Metric:
            scores = compute_scores(params, metric, splits.calibration)
            evaluator = FitnessEvaluator(params, scores, tokens)
            uniform = evaluator.evaluate(SparsityIndividual.uniform(L, n, m))
            cfg = EvoConfig(seed=seed, generations=args.gens, metric=metric, target_n=n, group_size=m)
            trace = run_search(params, scores, tokens, cfg, evaluator=evaluator)
            comparison.append(
                {"seed": seed, "metric": metric.value, "uniform_ppl": uniform.ppl, "searched_ppl": trace.ppl}
            )
            logger.info(f"seed {seed} {metric.value}: uniform {uniform.ppl:.4f} -> searched {trace.ppl:.4f}")

    summary, points = summarize_search(traces, sensitivity, m, groups)
    write_summary(out, summary, points, traces)
    write_json(out / "msp_vs_uniform.json", {"target": args.target, "runs": comparison})
    wins = sum(1 for row in comparison if row["searched_ppl"] < row["uniform_ppl"])
    print(f"✓ {len(traces)} ablation runs; searched beat uniform in {wins}/{len(comparison)} comparisons")


if __name__ == "__main__":
    main()
