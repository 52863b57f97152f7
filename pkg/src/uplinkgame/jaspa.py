"""Joint AP selection and power allocation dynamics.

jaspa alternates inner power equilibria with randomized AP re-selection driven
by a FIFO memory of best replies; se_jaspa and si_jaspa skip the intermediate
equilibria (sequential single-MU turns, respectively simultaneous rounds with
per-MU averaging clocks).
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ValidationError
from .game import (
    EquilibriumReport,
    all_rates,
    copy_powers,
    random_feasible_powers,
    uniform_powers,
    validate_association,
    validate_powers,
    verify_jep,
    verify_power_ne,
)
from .inner import InnerLoopResult, StepsizeSchedule, a_iwf, evaluate_profile, s_iwf
from .trace import TraceRow, association_label, inner_rows
from .waterfill import water_fill_batch


def per_mu_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """Independent per-MU random streams split from one seed, so every MU's
    draws are reproducible regardless of how other MUs consume randomness."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


@dataclass
class JaspaConfig:
    """Knobs shared by the joint-selection algorithms.

    connection_cost None means "use the scenario's per-MU costs"; a scalar is
    broadcast. selection="best" replaces the uniform draw from the qualifying
    AP set with a deterministic pick of the highest-rate AP (the greedy
    variant used in oscillation regressions).
    """

    memory_len: int = 10
    connection_cost: Optional[object] = None
    inner_solver: str = "a_iwf"
    eps_wf: float = 1e-8
    max_inner: int = 100_000
    max_outer: int = 10_000
    seed: int = 0
    schedule: StepsizeSchedule = field(default_factory=StepsizeSchedule)
    selection: str = "uniform"
    eps_eq: float = 1e-6
    initial_association: Optional[np.ndarray] = None
    initial_powers: Optional[list] = None
    record_detail: bool = True
    coalition_cap: int = 100_000

    def __post_init__(self):
        if self.memory_len < 1:
            raise ValidationError("memory_len must be >= 1")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValidationError("iteration caps must be >= 1")
        if self.inner_solver not in ("a_iwf", "s_iwf"):
            raise ValidationError(f"unknown inner solver {self.inner_solver!r}")
        if self.selection not in ("uniform", "best"):
            raise ValidationError(f"unknown selection mode {self.selection!r}")
        if self.coalition_cap < 1:
            raise ValidationError("coalition_cap must be >= 1")


@dataclass
class JaspaState:
    """Mutable per-run state: FIFO best-reply memories, the probability
    vectors maintained incrementally from them (never renormalized), the
    current profile and per-MU stay counters."""

    memory: list  # per-MU deque of AP indices, length <= memory_len
    beta: np.ndarray  # (N, W)
    association: np.ndarray
    powers: list
    stay_counts: np.ndarray
    memory_len: int


def new_state(scenario, association, powers, memory_len: int) -> JaspaState:
    return JaspaState(
        memory=[deque() for _ in range(scenario.num_mus)],
        beta=np.zeros((scenario.num_mus, scenario.num_aps)),
        association=np.asarray(association, dtype=np.intp).copy(),
        powers=copy_powers(powers),
        stay_counts=np.zeros(scenario.num_mus, dtype=int),
        memory_len=memory_len,
    )


def update_beta(state: JaspaState, mu: int, new_ap: int) -> None:
    """Push one best-reply unit vector into the MU's FIFO memory and update
    its probability vector incrementally.

    First push sets beta to the reply; before saturation the memory head keeps
    the residual mass and 1/M moves to each new reply; at saturation the
    evicted entry's 1/M moves to the new reply. After M pushes beta equals the
    arithmetic mean of the stored vectors."""
    mem = state.memory[mu]
    m = state.memory_len
    if len(mem) == 0:
        state.beta[mu] = 0.0
        state.beta[mu, new_ap] = 1.0
    elif len(mem) == m:
        evicted = mem.popleft()
        state.beta[mu, new_ap] += 1.0 / m
        state.beta[mu, evicted] -= 1.0 / m
    else:
        state.beta[mu, new_ap] += 1.0 / m
        state.beta[mu, mem[0]] -= 1.0 / m
    mem.append(int(new_ap))


def sample_association(rng: np.random.Generator, probs: np.ndarray) -> int:
    """Categorical draw tolerant of the ~1e-16 bookkeeping drift in probs."""
    u = rng.random()
    cum = np.cumsum(probs)
    return min(int(np.searchsorted(cum, u, side="right")), probs.size - 1)


@dataclass
class OuterRecord:
    """Rich per-outer-iteration record kept for analysis and tests."""

    outer_iter: int
    association: tuple
    sum_rate: float
    potential: float
    residual_inf: float
    per_mu_rates: np.ndarray
    switch_count: int
    beta: Optional[np.ndarray] = None
    powers: Optional[list] = None
    stay_counts: Optional[np.ndarray] = None


@dataclass
class RunResult:
    """Final profile plus the full per-iteration history of a joint run.

    outer_iterations counts association profiles in the run history including
    the initial draw. jep_report is always computed from the final profile
    (cost-free, per the equilibrium definition); for runs driven by nonzero
    connection costs, converged certifies cost-stability, under which the
    cost-free verdict may legitimately be negative."""

    algorithm: str
    association: np.ndarray
    powers: list
    converged: bool
    outer_iterations: int
    rows: list
    detail: list
    jep_report: EquilibriumReport


def _resolve_costs(scenario, config: JaspaConfig) -> np.ndarray:
    if config.connection_cost is None:
        return scenario.connection_cost
    costs = np.asarray(config.connection_cost, dtype=float)
    if costs.ndim == 0:
        costs = np.full(scenario.num_mus, float(costs))
    if costs.shape != (scenario.num_mus,):
        raise ValidationError("connection_cost: expected a scalar or one value per MU")
    if np.any(costs < 0.0):
        raise ValidationError("connection_cost: entries must be nonnegative")
    return costs


def _initial_profile(scenario, config: JaspaConfig, rngs, random_powers: bool):
    if config.initial_association is not None:
        assoc = validate_association(scenario, config.initial_association).copy()
    else:
        assoc = np.array(
            [int(rngs[i].integers(scenario.num_aps)) for i in range(scenario.num_mus)],
            dtype=np.intp,
        )
    if config.initial_powers is not None:
        validate_powers(scenario, assoc, config.initial_powers)
        powers = copy_powers(config.initial_powers)
    elif random_powers:
        powers = random_feasible_powers(scenario, assoc, rngs)
    else:
        powers = uniform_powers(scenario, assoc)
    return assoc, powers


def _warn_short_memory(config: JaspaConfig, n: int) -> None:
    if config.memory_len < n:
        warnings.warn(
            f"memory_len={config.memory_len} < num_mus={n}: the convergence "
            "guarantee requires memory at least as long as the user count",
            stacklevel=3,
        )


def run_inner(scenario, association, config: JaspaConfig, initial_powers=None) -> InnerLoopResult:
    if config.inner_solver == "s_iwf":
        return s_iwf(
            scenario,
            association,
            eps_wf=config.eps_wf,
            max_iters=config.max_inner,
            initial_powers=initial_powers,
        )
    return a_iwf(
        scenario,
        association,
        schedule=config.schedule,
        eps_wf=config.eps_wf,
        max_iters=config.max_inner,
        initial_powers=initial_powers,
    )


def best_reply_table(scenario, association, powers):
    """Best-response rates and power vectors for every (MU, AP) pair, holding
    the current profile fixed. Returns (rates (N, W), powers per-AP list of
    (N, K_w) arrays)."""
    n, w = scenario.num_mus, scenario.num_aps
    rates = np.empty((n, w))
    vecs = []
    for ap in range(w):
        cols = scenario.chan_idx[ap]
        base = np.zeros(cols.size)
        for j in np.flatnonzero(association == ap):
            base += scenario.gain_sq[j, cols] * np.asarray(powers[j])
        gains = scenario.gain_sq[:, cols]
        interf = np.tile(base, (n, 1))
        for j in np.flatnonzero(association == ap):
            interf[j] -= gains[j] * np.asarray(powers[j])
        floors_phys = scenario.noise[cols] + interf
        phi, _ = water_fill_batch(floors_phys / gains, scenario.budget)
        rates[:, ap] = np.log2(1.0 + gains * phi / floors_phys).sum(axis=1) / scenario.num_channels
        vecs.append(phi)
    return rates, vecs


def _pick_replies(scenario, state, br_rates, cur_rates, costs, config, rngs):
    """JASPA step-3 semantics: qualify APs whose best-response rate beats the
    current rate plus the switch cost (waived for the current AP), then pick
    uniformly; or pick the argmax AP in greedy mode."""
    n, w = br_rates.shape
    picks = np.empty(n, dtype=np.intp)
    ap_range = np.arange(w)
    for i in range(n):
        if config.selection == "best":
            picks[i] = int(np.argmax(br_rates[i]))
            continue
        cur_ap = int(state.association[i])
        thresh = cur_rates[i] + costs[i] * (ap_range != cur_ap)
        members = np.flatnonzero(br_rates[i] >= thresh)
        if members.size == 0:
            members = np.array([cur_ap], dtype=np.intp)
        picks[i] = members[int(rngs[i].integers(members.size))]
    return picks


def _tail_constant(history: list, span: int) -> bool:
    if len(history) < span:
        return False
    tail = history[-span:]
    return all(t == tail[0] for t in tail)


def _cost_stable(scenario, association, powers, costs, eps: float) -> bool:
    """Stability of the cost-modified game: every MU is power-optimal and no
    switch gains more than its connection cost. With zero costs this is
    exactly the joint-equilibrium test; with costs it is what the dynamics
    actually stabilize at (a constant association window can occur by chance
    before stability, so termination is gated on this check)."""
    report = verify_power_ne(scenario, association, powers, eps)
    if not report.is_equilibrium:
        return False
    br_rates, _ = best_reply_table(scenario, association, powers)
    for i in range(scenario.num_mus):
        cur_ap = int(association[i])
        for ap in range(scenario.num_aps):
            if ap == cur_ap:
                continue
            if br_rates[i, ap] > report.current_rates[i] + costs[i] + eps:
                return False
    return True


def jaspa(scenario, config: JaspaConfig) -> RunResult:
    """Memory-based joint dynamics with intermediate power equilibria.

    Each outer iteration: reach a power equilibrium for the current
    association, record a best reply per MU (uniform over the qualifying AP
    set), refresh the probability vectors, then resample every association.
    A repeat of the association across memory_len+1 consecutive iterations
    proposes termination; convergence is declared only if the profile then
    verifies as stable under the connection costs in force (a constant window
    can occur by chance before stability, since every qualifying set contains
    the current AP). With zero costs the stability gate is exactly the joint
    equilibrium test. Deterministic under the config seed."""
    n = scenario.num_mus
    _warn_short_memory(config, n)
    costs = _resolve_costs(scenario, config)
    rngs = per_mu_rngs(config.seed, n)
    assoc, powers = _initial_profile(scenario, config, rngs, random_powers=False)
    state = new_state(scenario, assoc, powers, config.memory_len)
    history = [tuple(int(x) for x in assoc)]
    rows: list[TraceRow] = []
    detail: list[OuterRecord] = []
    converged = False
    prev = history[0]

    for body in range(config.max_outer):
        inner = run_inner(scenario, state.association, config, initial_powers=state.powers)
        state.powers = inner.powers
        rows.extend(inner_rows(body, state.association, inner.trace))

        cur_rates = all_rates(scenario, state.association, state.powers)
        br_rates, _ = best_reply_table(scenario, state.association, state.powers)
        picks = _pick_replies(scenario, state, br_rates, cur_rates, costs, config, rngs)
        for i in range(n):
            update_beta(state, i, int(picks[i]))
        nxt = np.array([sample_association(rngs[i], state.beta[i]) for i in range(n)], dtype=np.intp)

        here = tuple(int(x) for x in state.association)
        switch_count = sum(1 for x, y in zip(here, prev) if x != y)
        potential = float(inner.trace.potential[-1])
        res_inf = float(inner.trace.residual_inf[-1])
        total = float(cur_rates.sum())
        rows.append(
            TraceRow(body, -1, potential, total, res_inf, association_label(here), switch_count)
        )
        if config.record_detail:
            detail.append(
                OuterRecord(
                    body,
                    here,
                    total,
                    potential,
                    res_inf,
                    cur_rates,
                    switch_count,
                    beta=state.beta.copy(),
                    powers=copy_powers(state.powers),
                )
            )
        prev = here
        history.append(tuple(int(x) for x in nxt))

        if _tail_constant(history, config.memory_len + 1) and _cost_stable(
            scenario, state.association, state.powers, costs, config.eps_eq
        ):
            # The sampled association equals the evaluated one, so the latest
            # inner equilibrium is the final power profile.
            state.association = nxt
            converged = True
            break

        # Warm-start the next inner loop: movers restart from a uniform spread.
        for i in range(n):
            if nxt[i] != state.association[i]:
                k = scenario.chan_idx[int(nxt[i])].size
                state.powers[i] = np.full(k, scenario.budget[i] / k)
        state.association = nxt

    report = verify_jep(scenario, state.association, state.powers, config.eps_eq)
    return RunResult(
        "jaspa",
        state.association,
        state.powers,
        converged,
        len(history),
        rows,
        detail,
        report,
    )


def se_jaspa(scenario, config: JaspaConfig) -> RunResult:
    """Sequential variant: one MU per iteration moves to its highest-rate AP
    (uniform among exact ties) and takes a one-shot water-fill there; all
    others are frozen. Stops after num_mus consecutive iterations in which the
    acting MU kept its AP and moved its power by at most eps_wf."""
    n = scenario.num_mus
    rngs = per_mu_rngs(config.seed, n)
    assoc, powers = _initial_profile(scenario, config, rngs, random_powers=True)
    rows: list[TraceRow] = []
    detail: list[OuterRecord] = []

    def record(t, switch_count):
        res_inf, _, potential, total, rates = evaluate_profile(scenario, assoc, powers)
        rows.append(
            TraceRow(t, -1, potential, total, res_inf, association_label(assoc), switch_count)
        )
        if config.record_detail:
            detail.append(
                OuterRecord(
                    t,
                    tuple(int(x) for x in assoc),
                    total,
                    potential,
                    res_inf,
                    rates,
                    switch_count,
                    powers=copy_powers(powers),
                )
            )

    record(0, 0)
    converged = False
    quiet = 0
    turns = 0
    for body in range(config.max_outer):
        i = body % n
        br_rates, br_vecs = best_reply_table(scenario, assoc, powers)
        best = br_rates[i].max()
        ties = np.flatnonzero(br_rates[i] == best)
        pick = int(ties[int(rngs[i].integers(ties.size))])
        changed = pick != int(assoc[i])
        new_p = br_vecs[pick][i].copy()
        if changed:
            quiet = 0
        else:
            move = float(np.max(np.abs(new_p - np.asarray(powers[i]))))
            quiet = 0 if move > config.eps_wf else quiet + 1
        assoc[i] = pick
        powers[i] = new_p
        turns = body + 1
        record(turns, 1 if changed else 0)
        if quiet >= n:
            converged = True
            break

    report = verify_jep(scenario, assoc, powers, config.eps_eq)
    return RunResult(
        "se_jaspa", assoc, powers, converged, turns + 1, rows, detail, report
    )


def si_jaspa(scenario, config: JaspaConfig) -> RunResult:
    """Simultaneous variant without intermediate equilibria: every iteration
    each MU records a best reply (JASPA step-3 semantics), resamples its AP
    from its probability vector, and updates its power - a fresh water-fill on
    arrival at a new AP, an averaged step clocked by its stay duration
    otherwise. Termination is proposed when the association is constant over
    memory_len+1 iterations and the best-response residual is below eps_wf,
    and declared only once the profile verifies as stable under the
    connection costs in force (the joint equilibrium test when costs are
    zero)."""
    n = scenario.num_mus
    _warn_short_memory(config, n)
    costs = _resolve_costs(scenario, config)
    rngs = per_mu_rngs(config.seed, n)
    assoc, powers = _initial_profile(scenario, config, rngs, random_powers=True)
    state = new_state(scenario, assoc, powers, config.memory_len)
    history = [tuple(int(x) for x in assoc)]
    rows: list[TraceRow] = []
    detail: list[OuterRecord] = []

    def record(t, switch_count):
        res_inf, _, potential, total, rates = evaluate_profile(
            scenario, state.association, state.powers
        )
        rows.append(
            TraceRow(
                t, -1, potential, total, res_inf,
                association_label(state.association), switch_count,
            )
        )
        if config.record_detail:
            detail.append(
                OuterRecord(
                    t,
                    tuple(int(x) for x in state.association),
                    total,
                    potential,
                    res_inf,
                    rates,
                    switch_count,
                    beta=state.beta.copy(),
                    powers=copy_powers(state.powers),
                    stay_counts=state.stay_counts.copy(),
                )
            )
        return res_inf

    record(0, 0)
    converged = False
    steps = 0
    for body in range(config.max_outer):
        cur_rates = all_rates(scenario, state.association, state.powers)
        br_rates, br_vecs = best_reply_table(scenario, state.association, state.powers)
        picks = _pick_replies(scenario, state, br_rates, cur_rates, costs, config, rngs)
        for i in range(n):
            update_beta(state, i, int(picks[i]))
        nxt = np.array(
            [sample_association(rngs[i], state.beta[i]) for i in range(n)], dtype=np.intp
        )
        new_powers = []
        for i in range(n):
            target = br_vecs[int(nxt[i])][i]
            if nxt[i] != state.association[i]:
                state.stay_counts[i] = 1
                new_powers.append(target.copy())
            else:
                state.stay_counts[i] += 1
                alpha = config.schedule.alpha(int(state.stay_counts[i]))
                new_powers.append((1.0 - alpha) * np.asarray(state.powers[i]) + alpha * target)
        switch_count = int(np.sum(nxt != state.association))
        state.association = nxt
        state.powers = new_powers
        history.append(tuple(int(x) for x in nxt))
        steps = body + 1
        res_inf = record(steps, switch_count)
        if (
            _tail_constant(history, config.memory_len + 1)
            and res_inf <= config.eps_wf
            and _cost_stable(scenario, state.association, state.powers, costs, config.eps_eq)
        ):
            converged = True
            break

    report = verify_jep(scenario, state.association, state.powers, config.eps_eq)
    return RunResult(
        "si_jaspa",
        state.association,
        state.powers,
        converged,
        len(history),
        rows,
        detail,
        report,
    )
