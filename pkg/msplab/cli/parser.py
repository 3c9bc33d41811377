import argparse

COMMANDS = ("train", "sensitivity", "search", "prune", "eval", "oracle", "analyze")


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON RunConfig; explicit flags override it")
    parser.add_argument("--model", dest="model_path", help="model checkpoint (JSON)")
    parser.add_argument("--corpus", help="raw text corpus")
    parser.add_argument("--splits", type=float, nargs=3, metavar=("TRAIN", "CALIB", "EVAL"))
    parser.add_argument("--calib-size", dest="calib_size", type=int)
    parser.add_argument("--seed", type=int, help="overridden by MSP_SEED when set")
    parser.add_argument("--threads", type=int, help="worker cap (default: machine parallelism)")
    parser.add_argument("--out", help="output artifact path")


def _target(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--target", help="N:M, N pruned of every M (e.g. 3:4)")
    parser.add_argument("--metric", choices=["magnitude", "wanda"])


def _individual_source(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--individual", help="comma-separated genes n_1,...,n_L")
    parser.add_argument("--run", help="SearchTrace JSONL; its final individual is used")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msplab",
        description="Mixed sparsity pruning lab: sensitivity, N:M masks and evolutionary layer-wise search",
    )
    parser.add_argument("--log-level", dest="log_level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", metavar="command")

    train = sub.add_parser("train", help="train a byte-level model on the train split")
    _common(train)
    train.add_argument("--model-config", dest="model_config_path", help="JSON ModelConfig")
    train.add_argument("--embed-dim", type=int)
    train.add_argument("--hidden-dim", type=int)
    train.add_argument("--blocks", type=int, help="number of hidden blocks")
    train.add_argument("--window", type=int)
    train.add_argument("--group-size", type=int)
    train.add_argument("--lr", type=float, default=0.1)
    train.add_argument("--epochs", type=int, default=3)
    train.add_argument("--batch-size", dest="batch_size", type=int, default=64)
    train.add_argument("--curve-out", help="write per-epoch loss curve JSON here")

    sens = sub.add_parser("sensitivity", help="FIM-trace layer sensitivity report")
    _common(sens)
    sens.add_argument("--epsilons", type=float, nargs="+", help="landscape perturbation magnitudes")
    sens.add_argument("--directions", type=int, default=16, help="Rademacher directions per epsilon")
    sens.add_argument("--landscape-out", help="write loss-landscape curves JSON here")
    sens.add_argument("--fd-out", help="also write the finite-difference Hessian report here (small models)")
    sens.add_argument("--fd-step", type=float, default=1e-3)

    search = sub.add_parser("search", help="evolutionary search for layer-wise sparsity")
    _common(search)
    _target(search)
    search.add_argument("--pop", dest="population_size", type=int)
    search.add_argument("--gens", dest="generations", type=int)
    search.add_argument("--mutation-rate", dest="mutation_rate", type=float)
    search.add_argument("--init", dest="init_mode", choices=["sensitivity", "random", "repair"])
    search.add_argument("--max-retries", dest="max_retries", type=int)
    search.add_argument("--fitness-bytes", type=int, help="calibration bytes used for fitness perplexity")

    prune = sub.add_parser("prune", help="apply a layer-wise N:M assignment and save the pruned model")
    _common(prune)
    _target(prune)
    _individual_source(prune)
    prune.add_argument("--masks-out", help="also export the masks as JSON")

    evaluate = sub.add_parser("eval", help="held-out perplexity: dense, uniform and searched")
    _common(evaluate)
    _target(evaluate)
    _individual_source(evaluate)

    oracle = sub.add_parser("oracle", help="exhaustive optimum for small layer counts")
    _common(oracle)
    _target(oracle)
    oracle.add_argument("--cap", type=int, help="refuse above this many feasible individuals")
    oracle.add_argument("--fitness-bytes", type=int)

    analyze = sub.add_parser("analyze", help="summaries, plateau generations and correlations of runs")
    _common(analyze)
    _target(analyze)
    analyze.add_argument("--runs", nargs="+", help="SearchTrace JSONL files")
    analyze.add_argument("--groups", nargs="+", help="group label per run (same order as --runs)")
    analyze.add_argument("--sensitivity", help="sensitivity report JSON")
    analyze.add_argument("--out-dir", dest="out_dir")
    return parser
