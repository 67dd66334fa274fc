"""Driver-node identification for pinning control of multi-agent systems
with periodically switching directed topology."""

__version__ = "0.1.0"

from .analysis import (
    NodeSpeedReport,
    PinConfig,
    SystemSpec,
    ThresholdReport,
    average_speed,
    error_matrix,
    monodromy,
    rank_nodes,
    sync_speed,
    threshold_T0,
)
from .network import Edge, Phase, SwitchingSchedule, Topology, has_spanning_tree, laplacian, laplacian_set
from .scenario import Scenario, bundled_scenario, load_scenario, parse_scenario
from .simulate import InitialCondition, empirical_rate, propagate_error, propagate_full
