from .exhaustive import exhaustive_worst_case
from .fitness import EstimatedOpsFitness, SimulatedEnergyFitness, SimulatedLatencyFitness
from .ga import (
    FitnessValue,
    GaConfig,
    GaResult,
    GenerationStats,
    Individual,
    crossover_cv,
    crossover_nlp,
    ga_run,
    history_rows,
    mutate_cv,
    mutate_nlp,
    select_top,
)
from .lbfgs import lbfgs_attack, lbfgs_minimize

__all__ = [
    "EstimatedOpsFitness",
    "FitnessValue",
    "GaConfig",
    "GaResult",
    "GenerationStats",
    "Individual",
    "SimulatedEnergyFitness",
    "SimulatedLatencyFitness",
    "crossover_cv",
    "crossover_nlp",
    "exhaustive_worst_case",
    "ga_run",
    "history_rows",
    "lbfgs_attack",
    "lbfgs_minimize",
    "mutate_cv",
    "mutate_nlp",
    "select_top",
]
