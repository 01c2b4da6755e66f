"""commutesim: land-use-constrained Monte Carlo commute simulation.

Disaggregates zone-level journey-to-work flows into individual trips,
measures them by shortest network distance, and runs the wage-group
commute analyses (quintiles, quadratic fits, flag tests, modal splits).
"""

__version__ = "0.1.0"
