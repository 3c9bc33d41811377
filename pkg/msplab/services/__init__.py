from msplab.services.language_model import (
    validate_config,
    init_model,
    zero_model,
    forward_loss,
    gradient,
    train_model,
    perplexity,
    apply_masks,
    calibration_loss,
)
from msplab.services.checkpoint import save_checkpoint, load_checkpoint
from msplab.services.sensitivity import (
    fisher_diagonal,
    fim_diagonal,
    fim_layer_traces,
    whole_model_fim_trace,
    hessian_diagonal_fd,
    hessian_diag_fd,
    directional_loss_change,
    loss_landscape,
    landscape_curvatures,
)
from msplab.services.masks import (
    feature_norms,
    collect_activation_norms,
    magnitude_scores,
    wanda_scores,
    compute_scores,
    build_nm_mask,
    build_maskset,
    verify_maskset,
    sparsity_report,
    baseline_uniform_perplexity,
    export_masks,
)
from msplab.services.evolution import (
    validate_individual,
    random_init_population,
    repair_init_population,
    sensitivity_init_population,
    crossover,
    mutate,
    evaluate_fitness,
    FitnessEvaluator,
    select_parents,
    run_search,
    count_feasible,
    iter_feasible,
    exhaustive_oracle,
)
from msplab.services.analysis import (
    pearson,
    spearman,
    trace_sparsity_correlation,
    plateau_generation,
    summarize_search,
    write_summary,
)

__all__ = [
    "validate_config",
    "init_model",
    "zero_model",
    "forward_loss",
    "gradient",
    "train_model",
    "perplexity",
    "apply_masks",
    "calibration_loss",
    "save_checkpoint",
    "load_checkpoint",
    "fisher_diagonal",
    "fim_diagonal",
    "fim_layer_traces",
    "whole_model_fim_trace",
    "hessian_diagonal_fd",
    "hessian_diag_fd",
    "directional_loss_change",
    "loss_landscape",
    "landscape_curvatures",
    "feature_norms",
    "collect_activation_norms",
    "magnitude_scores",
    "wanda_scores",
    "compute_scores",
    "build_nm_mask",
    "build_maskset",
    "verify_maskset",
    "sparsity_report",
    "baseline_uniform_perplexity",
    "export_masks",
    "validate_individual",
    "random_init_population",
    "repair_init_population",
    "sensitivity_init_population",
    "crossover",
    "mutate",
    "evaluate_fitness",
    "FitnessEvaluator",
    "select_parents",
    "run_search",
    "count_feasible",
    "iter_feasible",
    "exhaustive_oracle",
    "pearson",
    "spearman",
    "trace_sparsity_correlation",
    "plateau_generation",
    "summarize_search",
    "write_summary",
]
