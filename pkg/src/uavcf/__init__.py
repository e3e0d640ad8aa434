"""Desk-scale simulator and optimiser for UAV-based cell-free massive MIMO
downlinks with capacity-limited wireless fronthaul."""

from .fronthaul import SplitOption
from .topology import NetworkTopology, TopologyConfig, generate_topology

__version__ = "0.1.0"

__all__ = ["SplitOption", "NetworkTopology", "TopologyConfig", "generate_topology"]
