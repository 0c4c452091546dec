"""Flow-guided nanodevice localization: simulation and benchmarking."""

__version__ = "0.1.0"

from .benchmark import (MetricsReport, RegionEstimate, SimPlan, TargetEvent,
                        baseline_localize, convergence_curve, dense_locations,
                        point_error, region_accuracy, reliability,
                        run_benchmark, run_events, sample_locations)
from .channel import ChannelConfig, Layer, Reception, link_sample, path_loss_db
from .config import RunConfig, load_config
from .energy import (EnergyConfig, EnergyState, capacitance, cycle_index,
                     energy_at_cycle, turn_on_latency_cycles)
from .errors import NanoflowError
from .simcore import (Anchor, EventScenario, ProtocolParams, RawRecord,
                      SimResult, run_simulation)
from .vasculature import (MobilityTrace, UpsampleParams, Vessel, VesselGraph,
                          build_reference_vasculature, load_graph,
                          locate_vessel, save_graph, simulate_mobility,
                          upsample_trace)

__all__ = [
    "__version__",
    "Anchor", "ChannelConfig", "EnergyConfig", "EnergyState", "EventScenario",
    "Layer", "MetricsReport", "MobilityTrace", "NanoflowError",
    "ProtocolParams", "RawRecord", "Reception", "RegionEstimate", "RunConfig",
    "SimPlan", "SimResult", "TargetEvent", "UpsampleParams", "Vessel",
    "VesselGraph", "baseline_localize", "build_reference_vasculature",
    "capacitance", "convergence_curve", "cycle_index", "dense_locations",
    "energy_at_cycle", "link_sample", "load_config", "load_graph",
    "locate_vessel", "path_loss_db", "point_error", "region_accuracy",
    "reliability", "run_benchmark", "run_events", "run_simulation",
    "sample_locations", "save_graph", "simulate_mobility",
    "turn_on_latency_cycles", "upsample_trace",
]
