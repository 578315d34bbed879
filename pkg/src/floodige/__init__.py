"""Interference-graph estimation during power-controlled concurrent flooding.

Modules
-------
radio
    Power conversions, the linear-region radio model and RSSI reports.
plan
    Transmit power schedules, conditioning and compact plan encoding.
estimate
    Least-squares gain recovery and hop-wise interference subtraction.
flood
    Slotted concurrent-flooding simulator with per-hop power control.
harness
    Named experiment scenarios emitting CSV tables.
"""

from .estimate import *  # noqa: F401,F403
from .flood import *  # noqa: F401,F403
from .harness import ScenarioError, ScenarioResult, ScenarioSpec, load_scenario, run_scenario  # noqa: F401
from .plan import *  # noqa: F401,F403
from .radio import *  # noqa: F401,F403

__version__ = "0.1.0"
