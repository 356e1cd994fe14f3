"""Hypergraph convolution toolkit: propagation operators, spectral checks,
Deep-HGCN / HGNN training and the synthetic planted-partition generator."""

from ._hgx import (  # noqa: F401
    ConfigError,
    DataError,
    Dataset,
    DimensionError,
    DisconnectedError,
    Hypergraph,
    cli,
    dirichlet_energy,
    dirichlet_energy_sum,
    energy_probe,
    gamma_from_theta,
    generate_synthetic,
    load_dataset,
    min_nonzero_eigenvalue,
    power_smooth,
    smoothing_limit,
    stationary_distribution_P,
    stationary_distribution_T,
    theta_from_gamma,
    train,
    verify,
)

__version__ = "0.1.0"
