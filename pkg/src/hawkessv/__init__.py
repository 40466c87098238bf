"""Self-exciting price and volatility jump model: measures, simulation,
Bayesian estimation, model comparison and density forecasting."""

__version__ = "0.1.0"
