"""Slot-accurate shared-LLC simulator with worst-case latency bounds."""
from .analysis import (BoundInputs, check_bound, interference_factor, wcl_1stdm, wcl_private,
                       wcl_sequencer)
from .config import Mode, PartitionSpec, SystemConfig, TdmSchedule, distance, load_config, validate_one_slot
from .engine import Engine, EventLog, SimReport, run
from .errors import ConfigError, LlcSimError, ProtocolError

__version__ = "0.1.0"

__all__ = [
    "BoundInputs", "ConfigError", "Engine", "EventLog", "LlcSimError", "Mode", "PartitionSpec",
    "ProtocolError", "SimReport", "SystemConfig", "TdmSchedule", "check_bound", "distance",
    "interference_factor", "load_config", "run", "validate_one_slot", "wcl_1stdm", "wcl_private",
    "wcl_sequencer",
]
