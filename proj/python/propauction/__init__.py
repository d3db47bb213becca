"""Proportional auction equilibria, liquid welfare optima and dual certificates."""

from ._core import (
    RNG_NAME,
    Agent,
    DomainError,
    Instance,
    NumericError,
    PreconditionError,
    UsageError,
    Valuation,
    allocate,
    best_response,
    equilibrium,
    expectation_check,
    generate_instance,
    optimal_liquid_welfare,
    payments,
    poa_report,
    power_payments_quadrature,
    price_identity_residual,
    results_csv_header,
    run_experiment_csv,
)

__all__ = [
    "RNG_NAME",
    "Agent",
    "DomainError",
    "Instance",
    "NumericError",
    "PreconditionError",
    "UsageError",
    "Valuation",
    "allocate",
    "best_response",
    "equilibrium",
    "expectation_check",
    "generate_instance",
    "optimal_liquid_welfare",
    "payments",
    "poa_report",
    "power_payments_quadrature",
    "price_identity_residual",
    "results_csv_header",
    "run_experiment_csv",
]
