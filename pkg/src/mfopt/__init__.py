"""Multi-fidelity surrogate modelling and Bayesian optimization."""
