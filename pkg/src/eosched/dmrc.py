"""Per-slot scheduling policies.

The DMRC policy greedily minimizes a drift-plus-penalty expression each
slot, which splits into two independent subproblems:

* observation scheduling with adaptive compression (JOSAP), solved by
  Lagrangian dual decomposition: a closed form gives each pair's ideal
  arrival volume, a max-weight matching picks the observation schedule,
  and a subgradient step updates the link-capacity multipliers;
* transmission scheduling (TS), a max-weight matching of satellites to
  destination transceivers weighted by backlog times link capacity.

Random and Fixed-CR baselines share the same decision format. An exact
JOSAP solver (separable gains plus one matching) serves as the quality
oracle for the dual loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assignment import AssignmentProblem, max_weight_assignment
from .errors import ParameterError, ScheduleValidationError
from .scenario import ChannelState, NetworkConfig


@dataclass(frozen=True)
class SolverParams:
    """Dual-loop controls for the JOSAP solver.

    The step size at iteration l is ``step_scale / l``: square summable
    but not absolutely summable, as the subgradient method requires.
    ``epsilon`` stops the loop once no multiplier moves by more than it.
    """

    epsilon: float = 1e-3
    max_iters: int = 40
    step_scale: float = 1.0
    dual_init: float = 0.0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ParameterError("epsilon must be positive")
        if int(self.max_iters) < 1:
            raise ParameterError("max_iters must be at least 1")
        if self.step_scale <= 0:
            raise ParameterError("step_scale must be positive")
        if self.dual_init < 0:
            raise ParameterError("dual_init must be nonnegative")
        object.__setattr__(self, "max_iters", int(self.max_iters))


@dataclass(frozen=True)
class SlotDecision:
    """One slot's complete resource allocation.

    observe : (I, K) binary, target i imaged by satellite k.
    transmit : (K, N) binary, satellite k downlinks to destination n.
    rho : (I, K) compression ratio for matched pairs, 0 elsewhere.
    arrivals : (K, I) compressed volume entering each data queue,
        arrivals[k, i] = rho[i, k] * observe[i, k] * B[i, k].
    service : (K, N, I) volume scheduled for delivery per flow.
    """

    observe: np.ndarray
    transmit: np.ndarray
    rho: np.ndarray
    arrivals: np.ndarray
    service: np.ndarray


@dataclass(frozen=True)
class JosapResult:
    """Observation schedule with compression choices from the dual loop."""

    observe: np.ndarray   # (I, K) binary
    rho: np.ndarray       # (I, K)
    arrivals: np.ndarray  # (K, I)
    objective: float
    iterations: int
    converged: bool
    duals: np.ndarray     # (I, K) final multipliers


@dataclass(frozen=True)
class JosapSolution:
    """Exact optimum of the per-slot observation/compression problem."""

    observe: np.ndarray
    rho: np.ndarray
    arrivals: np.ndarray
    objective: float


def _arrival_matrix(chi: np.ndarray, v: float, cap: np.ndarray) -> np.ndarray:
    """Vectorized closed-form maximizer of v*ln(1+A) - chi*A on [0, cap]."""
    interior = np.clip(v / np.where(chi > 0, chi, 1.0) - 1.0, 0.0, cap)
    out = np.where(chi <= v / (1.0 + cap), cap, interior)
    return np.where(chi >= v, 0.0, out)


def optimal_arrival(chi: float, v: float, cap: float) -> float:
    """Closed-form arrival volume maximizing ``v*ln(1+A) - chi*A`` over
    [0, cap].

    Zero when the marginal cost ``chi`` already exceeds the utility slope
    at A=0; the full cap when the slope at the cap still beats ``chi``;
    otherwise the interior stationary point ``v/chi - 1``.
    """
    if v <= 0:
        raise ParameterError("control factor must be positive")
    if cap < 0:
        raise ParameterError("cap must be nonnegative")
    return float(_arrival_matrix(np.asarray(chi, dtype=float), v, np.asarray(cap, dtype=float)))


def project_ratio(
    a_star: float, b: float, ratios, v: float, chi: float
) -> float:
    """Best discrete compression ratio for one matched pair.

    ``a_star`` is the continuous optimum that motivates the projection;
    the choice itself re-evaluates ``v*ln(1+rho*b) - chi*rho*b`` exactly
    over the allowed set plus 0, so it is never worse than rounding
    ``a_star/b`` to the nearest ratio. Ties go to the larger ratio.
    """
    if b <= 0:
        raise ParameterError("observation capacity must be positive")
    best_rho, best_val = 0.0, 0.0
    for rho in sorted(ratios):
        val = v * math.log1p(rho * b) - chi * rho * b
        if val >= best_val:
            best_rho, best_val = rho, val
    return best_rho


def observation_matching(alpha: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Binary observation schedule maximizing the multiplier-weighted
    capacity, with at most one satellite per target and one target per
    satellite."""
    weights = np.asarray(alpha, dtype=float) * np.asarray(B, dtype=float)
    problem = AssignmentProblem(weights, (1,) * weights.shape[1])
    matching, _ = max_weight_assignment(problem)
    x = np.zeros(weights.shape, dtype=int)
    for i, k in matching:
        x[i, k] = 1
    return x


def _pair_pressure(Q: np.ndarray, P: np.ndarray) -> np.ndarray:
    """(I, K) marginal cost of admitting volume on each pair: backlog on
    the receiving queue minus that flow's rate-floor deficit credit."""
    return Q.T - P[:, None]


def _candidate(
    x: np.ndarray,
    chi: np.ndarray,
    arrivals_free: np.ndarray,
    pressure: np.ndarray,
    B: np.ndarray,
    ratios,
    v: float,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Complete a matching into a feasible (rho, arrivals) choice and
    score it with the true subproblem objective."""
    rho = np.zeros_like(B)
    arrivals = np.zeros_like(B)
    objective = 0.0
    for i, k in zip(*np.nonzero(x)):
        b = B[i, k]
        if b <= 0:
            continue
        r = project_ratio(arrivals_free[i, k] / b, b, ratios, v, chi[i, k])
        a = r * b
        rho[i, k] = r
        arrivals[i, k] = a
        objective += v * math.log1p(a) - pressure[i, k] * a
    return rho, arrivals, objective


def josap_solve(
    Q: np.ndarray,
    P: np.ndarray,
    B: np.ndarray,
    config: NetworkConfig,
    params: SolverParams | None = None,
) -> JosapResult:
    """Dual-decomposition solver for joint observation scheduling and
    compression selection.

    Each iteration computes the closed-form arrivals for the current
    multipliers, re-solves the observation matching, and takes a
    subgradient step on the link-capacity multipliers (clipped at zero).
    Every iteration's matching is completed into a feasible schedule and
    scored; the best-scoring one is returned, so an oscillating dual
    still yields a good primal answer. ``converged`` reports whether the
    multiplier change dropped below ``epsilon`` before ``max_iters``.
    """
    params = params or SolverParams()
    v = config.control_factor
    ratios = config.compression_set
    B = np.asarray(B, dtype=float)
    Q = np.asarray(Q, dtype=float)
    P = np.asarray(P, dtype=float)

    cap = ratios[0] * B
    pressure = _pair_pressure(Q, P)
    alpha = np.full_like(B, params.dual_init)

    best_obj = -math.inf
    best = None
    converged = False
    iterations = 0
    for l in range(1, params.max_iters + 1):
        iterations = l
        chi = alpha + pressure
        arrivals_free = _arrival_matrix(chi, v, cap)
        x = observation_matching(alpha, B)

        rho, arrivals, obj = _candidate(x, chi, arrivals_free, pressure, B, ratios, v)
        if obj > best_obj:
            best_obj = obj
            best = (x, rho, arrivals)

        step = params.step_scale / l
        alpha_next = np.maximum(alpha - step * (x * B - arrivals_free), 0.0)
        delta = float(np.max(np.abs(alpha_next - alpha))) if alpha.size else 0.0
        alpha = alpha_next
        if delta < params.epsilon:
            converged = True
            break

    x, rho, arrivals = best
    return JosapResult(
        observe=x,
        rho=rho,
        arrivals=arrivals.T.copy(),
        objective=best_obj,
        iterations=iterations,
        converged=converged,
        duals=alpha,
    )


def josap_exact(
    Q: np.ndarray, P: np.ndarray, B: np.ndarray, config: NetworkConfig
) -> JosapSolution:
    """Exact optimum of the observation/compression subproblem.

    Given the matching, the objective separates per pair, so each pair's
    gain is the best achievable over the discrete ratio set; one
    max-weight matching over those gains is then globally optimal.
    Polynomial in I*K*len(ratios), no enumeration needed.
    """
    v = config.control_factor
    B = np.asarray(B, dtype=float)
    pressure = _pair_pressure(np.asarray(Q, dtype=float), np.asarray(P, dtype=float))

    # Candidate ratios in descending order; ties prefer the larger ratio
    # and any positive ratio beats the idle 0 on equal value.
    cands = list(config.compression_set) + [0.0]
    vals = np.stack(
        [v * np.log1p(r * B) - pressure * (r * B) for r in cands], axis=0
    )
    pick = np.argmax(vals, axis=0)
    gains = np.take_along_axis(vals, pick[None], axis=0)[0]
    gains = np.where(B > 0, gains, 0.0)

    problem = AssignmentProblem(gains, (1,) * B.shape[1])
    matching, objective = max_weight_assignment(problem)

    x = np.zeros(B.shape, dtype=int)
    rho = np.zeros_like(B)
    for i, k in matching:
        x[i, k] = 1
        rho[i, k] = cands[pick[i, k]]
    arrivals = (rho * x * B).T.copy()
    return JosapSolution(observe=x, rho=rho, arrivals=arrivals, objective=objective)


def ts_solve(
    Q: np.ndarray, C: np.ndarray, config: NetworkConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Transmission schedule and per-flow service volumes.

    Each satellite offers its most backlogged flow; link weights are that
    backlog times the link capacity. A max-weight matching under the
    one-destination-per-satellite and per-destination transceiver limits
    is then optimal, and each matched link serves its offered flow at
    full capacity.
    """
    Q = np.asarray(Q, dtype=float)
    C = np.asarray(C, dtype=float)
    K, N = C.shape
    top_flow = np.argmax(Q, axis=1)  # ties -> lowest flow index
    weights = Q[np.arange(K), top_flow][:, None] * C

    problem = AssignmentProblem(weights, config.transceivers)
    matching, _ = max_weight_assignment(problem)

    y = np.zeros((K, N), dtype=int)
    service = np.zeros((K, N, Q.shape[1]))
    for k, n in matching:
        y[k, n] = 1
        service[k, n, top_flow[k]] = C[k, n]
    return y, service


def dmrc_step(
    queues,
    channels: ChannelState,
    config: NetworkConfig,
    params: SolverParams | None = None,
) -> SlotDecision:
    """One full DMRC decision: observation/compression via the dual
    solver, transmission via backlog-weighted matching."""
    j = josap_solve(queues.data, queues.deficit, channels.B, config, params)
    y, service = ts_solve(queues.data, channels.C, config)
    return SlotDecision(
        observe=j.observe,
        transmit=y,
        rho=j.rho,
        arrivals=j.arrivals,
        service=service,
    )


def random_schedule(
    queues,
    channels: ChannelState,
    config: NetworkConfig,
    rng: np.random.Generator,
    obs_visible: np.ndarray | None = None,
    trans_visible: np.ndarray | None = None,
) -> SlotDecision:
    """Baseline: uniformly random feasible schedules.

    Rows are visited in random order; each picks uniformly among its
    still-feasible visible partners plus the "stay idle" option, blind to
    the realized capacities. Compression ratios are uniform over the
    allowed set, and each matched link serves one uniformly chosen flow
    with positive backlog. Without explicit visibility masks, positive
    capacity stands in for visibility.
    """
    B, C = channels.B, channels.C
    I, K = B.shape
    N = C.shape[1]
    if obs_visible is None:
        obs_visible = B > 0
    if trans_visible is None:
        trans_visible = C > 0

    x = np.zeros((I, K), dtype=int)
    rho = np.zeros((I, K))
    used_eos = np.zeros(K, dtype=bool)
    for i in rng.permutation(I):
        options = [k for k in range(K) if obs_visible[i, k] and not used_eos[k]]
        pick = rng.integers(0, len(options) + 1)
        if pick < len(options):
            k = options[pick]
            x[i, k] = 1
            used_eos[k] = True
            rho[i, k] = config.compression_set[
                rng.integers(0, len(config.compression_set))
            ]

    y = np.zeros((K, N), dtype=int)
    service = np.zeros((K, N, I))
    slots_left = list(config.transceivers)
    for k in rng.permutation(K):
        options = [n for n in range(N) if trans_visible[k, n] and slots_left[n] > 0]
        pick = rng.integers(0, len(options) + 1)
        if pick < len(options):
            n = options[pick]
            y[k, n] = 1
            slots_left[n] -= 1
            backlogged = np.nonzero(queues.data[k] > 0)[0]
            if backlogged.size:
                i = backlogged[rng.integers(0, backlogged.size)]
                service[k, n, i] = C[k, n]

    return SlotDecision(
        observe=x, transmit=y, rho=rho, arrivals=(rho * x * B).T.copy(), service=service
    )


def fixed_cr_schedule(
    queues, channels: ChannelState, config: NetworkConfig
) -> SlotDecision:
    """Baseline: max-weight matchings on raw capacities with the smallest
    allowed compression ratio on every matched pair (1/4 under the
    default ratio set). Service goes to each satellite's most backlogged
    flow, like DMRC's transmission stage."""
    B, C = channels.B, channels.C
    I, K = B.shape

    obs_problem = AssignmentProblem(B, (1,) * K)
    obs_matching, _ = max_weight_assignment(obs_problem)
    x = np.zeros((I, K), dtype=int)
    rho = np.zeros((I, K))
    fixed = config.compression_set[-1]
    for i, k in obs_matching:
        x[i, k] = 1
        rho[i, k] = fixed

    trans_problem = AssignmentProblem(C, config.transceivers)
    trans_matching, _ = max_weight_assignment(trans_problem)
    y = np.zeros(C.shape, dtype=int)
    service = np.zeros((K, C.shape[1], I))
    top_flow = np.argmax(queues.data, axis=1)
    for k, n in trans_matching:
        y[k, n] = 1
        service[k, n, top_flow[k]] = C[k, n]

    return SlotDecision(
        observe=x, transmit=y, rho=rho, arrivals=(rho * x * B).T.copy(), service=service
    )


def validate_decision(
    decision: SlotDecision,
    config: NetworkConfig,
    channels: ChannelState,
    obs_visible: np.ndarray,
    trans_visible: np.ndarray,
) -> None:
    """Check every scheduling constraint; raise on the first violation.

    Covers: binary schedules restricted to visible contacts, one target
    per satellite and vice versa, one destination per satellite, the
    per-destination transceiver limits, service within scheduled link
    capacity, ratios drawn from the allowed set, and arrivals consistent
    with schedule, ratio and capacity.
    """
    x, y = decision.observe, decision.transmit
    if not np.isin(x, (0, 1)).all() or not np.isin(y, (0, 1)).all():
        raise ScheduleValidationError("schedules must be binary")
    if np.any(x.astype(bool) & ~obs_visible):
        raise ScheduleValidationError("observation scheduled outside a contact")
    if np.any(y.astype(bool) & ~trans_visible):
        raise ScheduleValidationError("transmission scheduled outside a contact")
    if np.any(x.sum(axis=0) > 1):
        raise ScheduleValidationError("satellite observes more than one target")
    if np.any(x.sum(axis=1) > 1):
        raise ScheduleValidationError("target observed by more than one satellite")
    if np.any(y.sum(axis=1) > 1):
        raise ScheduleValidationError("satellite transmits to more than one destination")
    over = y.sum(axis=0) > np.asarray(config.transceivers)
    if np.any(over):
        raise ScheduleValidationError("destination transceiver limit exceeded")

    if np.any(decision.service < 0):
        raise ScheduleValidationError("negative service volume")
    link_cap = y * channels.C
    slack = 1e-9 * max(1.0, float(channels.C.max(initial=0.0)))
    if np.any(decision.service.sum(axis=2) > link_cap + slack):
        raise ScheduleValidationError("service exceeds scheduled link capacity")

    allowed = np.array(config.compression_set + (0.0,))
    rho = decision.rho
    if not np.all(np.isclose(rho[:, :, None], allowed[None, None, :], atol=1e-12).any(axis=2)):
        raise ScheduleValidationError("compression ratio outside the allowed set")
    if np.any((rho > 0) & (x == 0)):
        raise ScheduleValidationError("compression ratio set on an unscheduled pair")

    expected = (rho * x * channels.B).T
    if not np.allclose(decision.arrivals, expected, rtol=1e-9, atol=1e-9):
        raise ScheduleValidationError(
            "arrivals inconsistent with schedule, ratio and capacity"
        )
