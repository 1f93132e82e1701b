"""D2D emergency relaying over a loaded cellular network: simulator + analytics."""

from .env import (
    Building,
    ManhattanSpec,
    MapError,
    Point,
    SamplingError,
    UrbanMap,
    generate_manhattan_map,
    is_outdoor,
    load_map,
    sample_outdoor_points,
    serialize_map,
    wall_crossings,
)
from .channel import (
    ChannelModel,
    LinkSample,
    PathlossCoeffs,
    PathlossResult,
    SinrQuery,
    draw_fading,
    draw_shadowing,
    noise_power_w,
    pathloss_db,
    received_power_w,
    sinr,
)
from .analytics import (
    HopOutageProfile,
    NumericalError,
    SgParams,
    ValidationResult,
    a_function,
    a_function_quadrature,
    cc_end_to_end_outage,
    cc_link_success,
    cc_outage_closed_form,
    d2d_route_outage,
    validate_cc_closed_form,
)
from .routing import (
    BroadcastResult,
    CellGeometry,
    ReachabilityGraph,
    RelayNode,
    Route,
    boundary_nodes,
    build_reachability,
    route_br,
    route_iar,
    route_spr,
)
from .sim import (
    Deployment,
    DeploymentError,
    OperatingPoint,
    Scenario,
    StrategyChoice,
    SweepRow,
    SweepSpec,
    TrialResult,
    aggregate,
    cc_baseline,
    deploy,
    hex_grid,
    run_trial,
    select_strategy,
    simulate,
    simulate_strategies,
    sweep,
    wilson_interval,
)

__version__ = "0.1.0"
