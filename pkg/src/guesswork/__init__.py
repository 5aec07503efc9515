"""Guesswork analysis for brute-force attacks against one or many users."""

from .errors import (
    ConfigurationError,
    DomainError,
    GuessworkError,
    NumericError,
    ResourceCapError,
    UnsupportedModelError,
)
from .sources import (
    IidSource,
    MarkovSource,
    MultiUserProblem,
    StringDistribution,
    enumerate_distribution,
    load_source,
    sample_strings,
    string_probability,
)
from .strategy import (
    ExplicitStrategy,
    RoundRobinStrategy,
    SingleUserStrategy,
    g_opt,
    optimal_single_strategy,
    random_strategy,
    round_robin_strategy,
    total_guesswork,
)
from .exact import (
    GuessworkPmf,
    g_opt_pmf,
    order_stat_pmf,
    single_guesswork_pmf,
    stochastic_dominance,
    strategy_pmf_exhaustive,
)
from .asymptotics import (
    RateCurve,
    Scgf,
    avg_growth_exponent,
    convexity_report,
    pmf_approx,
    rate_homogeneous,
    rate_multi,
    rate_single,
    renyi_curve,
    renyi_iid,
    renyi_markov,
)
from .montecarlo import SimulationConfig, estimate_distribution, rank_by_type_counting

__version__ = "0.1.0"
