"""Cell-free massive MIMO proactive surveillance toolkit.

Closed-form monitoring success probability (MSP) analysis, max-min design of
modes, jamming powers and weights, and a Monte Carlo oracle that checks the
closed forms against simulated channels.
"""

from .analytic import MR, PZF, SinrReport, SurveillanceDesign, evaluate
from .config import ConfigError, SystemConfig
from .scenario import ScenarioStatistics, make_scenario

__all__ = [
    "MR",
    "PZF",
    "ConfigError",
    "ScenarioStatistics",
    "SinrReport",
    "SurveillanceDesign",
    "SystemConfig",
    "evaluate",
    "make_scenario",
]

__version__ = "0.1.0"
