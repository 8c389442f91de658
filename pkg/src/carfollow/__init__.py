"""Car-following toolkit: IDM and Sigmoid-IDM laws, equilibria, stability,
platoon/ring simulation and calibration."""
from .model import (CALIBRATION_BOUNDS, MODELS, CollisionError, KinematicContext, ModelParams,
                    RandomGapPolicy, acceleration, desired_spacing, free_acceleration,
                    idm_acceleration, sigmoid_idm_acceleration, update_cautious_distance)
from .equilibrium import (EquilibriumPoint, FundamentalDiagram, equilibrium_spacing,
                          equilibrium_velocity, fit_steady_state, fundamental_diagram,
                          idm_equilibrium_spacing, sigmoid_idm_equilibrium)
from .stability import (StabilityMap, StabilityReport, analyze, local_stability,
                        partial_derivatives, stability_map, string_criterion, transfer_magnitude)
from .simulation import (ConstantLeader, PiecewiseLeader, PlatoonConfig, RecordedLeader, RingConfig,
                         SimulationError, SinusoidLeader, StationaryLeader, Trajectory,
                         measure_flow_density, simulate_platoon, simulate_ring)

__version__ = "0.1.0"
