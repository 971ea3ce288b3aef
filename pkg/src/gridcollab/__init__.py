"""Quasi-static simulation of PV smart-inverter reactive power control on a
radial feeder, including consensus optimization with dynamic weights."""

from .coordination import ControlMethod
from .feeder import FeederModel, load_feeder, parse_feeder, self_susceptance, to_per_unit
from .inverter import InverterAgent, VoltVarParams
from .scenario import load_scenario
from .simulation import SimConfig, curtailment_report, load_profiles, run_scenario

__all__ = [
    "ControlMethod", "FeederModel", "InverterAgent", "SimConfig", "VoltVarParams",
    "curtailment_report", "load_feeder", "load_profiles", "load_scenario", "parse_feeder",
    "run_scenario", "self_susceptance", "to_per_unit",
]
