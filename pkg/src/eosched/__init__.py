"""Slotted-time simulator and online multi-resource scheduler for
Earth-observation satellite networks.

Targets are imaged by low-orbit satellites during visibility windows,
image data is compressed at a selectable ratio, buffered on board, and
downlinked to destinations. The DMRC policy makes all three choices
online from queue and channel observations, trading queue backlog
against network utility through a single control factor.
"""

from .assignment import AssignmentProblem, brute_force_assignment, max_weight_assignment
from .dmrc import (
    JosapResult,
    JosapSolution,
    SlotDecision,
    SolverParams,
    dmrc_step,
    fixed_cr_schedule,
    josap_exact,
    josap_solve,
    observation_matching,
    optimal_arrival,
    project_ratio,
    random_schedule,
    ts_solve,
    validate_decision,
)
from .errors import (
    ConfigError,
    ConsistencyError,
    DimensionError,
    EoschedError,
    OracleSizeError,
    ParameterError,
    PlanFormatError,
    ScheduleValidationError,
)
from .eteg import (
    ConservationReport,
    Eteg,
    build_eteg,
    check_flow_conservation,
    record_decision,
    write_edge_dump,
)
from .queueing import (
    DriftBound,
    QueueState,
    drift_bound_gamma,
    lyapunov_value,
    stability_report,
    update_data_queues,
    update_virtual_queues,
)
from .scenario import (
    ChannelModel,
    ChannelState,
    ContactPlan,
    NetworkConfig,
    generate_synthetic_plan,
    load_contact_plan,
    sample_channels,
)
from .simulator import (
    POLICIES,
    MetricsSeries,
    RunResult,
    RunSummary,
    SweepRow,
    average_metrics,
    compare_policies,
    run,
    sweep_v,
)

__version__ = "0.1.0"
