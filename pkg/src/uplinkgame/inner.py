"""Fixed-association power equilibrium solvers.

a_iwf averages simultaneous water-fill responses with a diminishing stepsize;
s_iwf applies exact responses one MU at a time. Both stop when the
best-response residual drops below ``eps_wf`` in inf-norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ValidationError
from .game import copy_powers, uniform_powers, validate_association, validate_powers
from .waterfill import water_fill_batch


@dataclass(frozen=True)
class StepsizeSchedule:
    """Diminishing stepsizes with divergent sum and finite sum of squares.

    "polynomial": alpha_t = (t+1)^(-exponent), exponent in (0.5, 1].
    "harmonic":   alpha_t = 1/(t+1).
    "custom":     user-supplied func(t); each value must lie in (0, 1).

    The polynomial default (exponent 0.55) is used instead of the harmonic
    rule because harmonic steps contract the single-user error only like 1/t,
    which cannot reach the residual tolerances used here in any practical
    iteration budget.
    """

    rule: str = "polynomial"
    exponent: float = 0.55
    func: Optional[Callable[[int], float]] = None

    def __post_init__(self):
        if self.rule not in ("polynomial", "harmonic", "custom"):
            raise ValidationError(f"unknown stepsize rule {self.rule!r}")
        if self.rule == "polynomial" and not 0.5 < self.exponent <= 1.0:
            raise ValidationError("polynomial exponent must lie in (0.5, 1]")
        if self.rule == "custom" and self.func is None:
            raise ValidationError("custom schedule needs a func")

    def alpha(self, t: int) -> float:
        if t < 1:
            raise ValidationError("stepsize index starts at 1")
        if self.rule == "harmonic":
            a = 1.0 / (t + 1)
        elif self.rule == "polynomial":
            a = (t + 1.0) ** (-self.exponent)
        else:
            a = float(self.func(t))
        if not 0.0 < a < 1.0:
            raise ValidationError(f"stepsize alpha({t})={a} outside (0, 1)")
        return a


@dataclass
class InnerTrace:
    """Per-iteration records of one inner-loop run (row 0 is the start point).

    alpha[j] is the step applied after evaluating row j (nan on the final row
    and everywhere for s_iwf, which takes exact steps)."""

    potential: np.ndarray
    sum_rate: np.ndarray
    residual_inf: np.ndarray
    residual_two: np.ndarray
    alpha: np.ndarray


@dataclass
class InnerLoopResult:
    powers: list
    iterations: int
    converged: bool
    trace: InnerTrace


@dataclass
class InnerDiagnostics:
    """Convergence facts read off a trace: the index after which the potential
    never decreases, whether the residual dropped below tolerance, and the
    stepsize-weighted squared-residual sum (finite for a convergent run)."""

    monotone_from: int
    residual_converged: bool
    final_residual_inf: float
    stepsize_weighted_residual: float


class _ApBlock:
    """Dense per-AP state for vectorized iterations."""

    def __init__(self, scenario, members: np.ndarray, ap: int, powers):
        cols = scenario.chan_idx[ap]
        self.members = members
        self.gain = scenario.gain_sq[np.ix_(members, cols)]
        self.noise = scenario.noise[cols]
        self.budgets = scenario.budget[members]
        self.pmat = np.stack([np.asarray(powers[i], dtype=float) for i in members])

    def totals(self) -> np.ndarray:
        return self.noise + (self.gain * self.pmat).sum(axis=0)

    def responses(self, totals: np.ndarray) -> np.ndarray:
        floors = (totals[None, :] - self.gain * self.pmat) / self.gain
        phi, _ = water_fill_batch(floors, self.budgets)
        return phi

    def rates(self, totals: np.ndarray, num_channels: int) -> np.ndarray:
        own = self.gain * self.pmat
        return (np.log2(totals[None, :]) - np.log2(totals[None, :] - own)).sum(axis=1) / num_channels

    def potential(self, totals: np.ndarray, num_channels: int) -> float:
        return float((np.log2(totals) - np.log2(self.noise)).sum() / num_channels)


def _blocks(scenario, association, powers) -> list[_ApBlock]:
    blocks = []
    for ap in range(scenario.num_aps):
        members = np.flatnonzero(association == ap)
        if members.size:
            blocks.append(_ApBlock(scenario, members, ap, powers))
    return blocks


def _evaluate(blocks, num_channels, num_mus):
    """One synchronous evaluation: responses, residual norms, potential and
    per-MU rates."""
    res_sq = 0.0
    res_inf = 0.0
    potential = 0.0
    rates = np.zeros(num_mus)
    responses = []
    for blk in blocks:
        tot = blk.totals()
        phi = blk.responses(tot)
        s = phi - blk.pmat
        res_sq += float((s * s).sum())
        res_inf = max(res_inf, float(np.max(np.abs(s))))
        potential += blk.potential(tot, num_channels)
        rates[blk.members] = blk.rates(tot, num_channels)
        responses.append(phi)
    return responses, res_inf, math.sqrt(res_sq), potential, rates


def evaluate_profile(scenario, association, powers):
    """Batch metrics of one profile: (residual inf-norm, residual 2-norm,
    system potential, sum rate, per-MU rates)."""
    association = np.asarray(association, dtype=np.intp)
    blocks = _blocks(scenario, association, powers)
    _, res_inf, res_two, potential, rates = _evaluate(
        blocks, scenario.num_channels, scenario.num_mus
    )
    return res_inf, res_two, potential, float(rates.sum()), rates


def _collect(scenario, blocks) -> list:
    powers: list = [None] * scenario.num_mus
    for blk in blocks:
        for row, i in enumerate(blk.members):
            powers[int(i)] = blk.pmat[row].copy()
    return powers


def _prepare(scenario, association, initial_powers):
    association = validate_association(scenario, association)
    if initial_powers is None:
        powers = uniform_powers(scenario, association)
    else:
        validate_powers(scenario, association, initial_powers)
        powers = copy_powers(initial_powers)
    return association, powers


def a_iwf(
    scenario,
    association,
    schedule: Optional[StepsizeSchedule] = None,
    eps_wf: float = 1e-8,
    max_iters: int = 100_000,
    initial_powers=None,
) -> InnerLoopResult:
    """Averaged iterative water-filling: every MU moves a fraction alpha_t of
    the way to its water-fill response, simultaneously, each iteration."""
    association, powers = _prepare(scenario, association, initial_powers)
    if schedule is None:
        schedule = StepsizeSchedule()
    blocks = _blocks(scenario, association, powers)
    k = scenario.num_channels

    pot, rates, rinf, rtwo, alphas = [], [], [], [], []
    converged = False
    t = 0
    while True:
        responses, res_inf, res_two, potential, mu_rates = _evaluate(
            blocks, k, scenario.num_mus
        )
        pot.append(potential)
        rates.append(float(mu_rates.sum()))
        rinf.append(res_inf)
        rtwo.append(res_two)
        if res_inf <= eps_wf:
            converged = True
            alphas.append(math.nan)
            break
        if t >= max_iters:
            alphas.append(math.nan)
            break
        t += 1
        a = schedule.alpha(t)
        alphas.append(a)
        for blk, phi in zip(blocks, responses):
            blk.pmat += a * (phi - blk.pmat)
            # Convex combination of feasible points stays feasible.
            assert np.all(blk.pmat >= 0.0)
            assert np.all(blk.pmat.sum(axis=1) <= blk.budgets + 1e-9)

    trace = InnerTrace(
        potential=np.asarray(pot),
        sum_rate=np.asarray(rates),
        residual_inf=np.asarray(rinf),
        residual_two=np.asarray(rtwo),
        alpha=np.asarray(alphas),
    )
    return InnerLoopResult(_collect(scenario, blocks), t, converged, trace)


def s_iwf(
    scenario,
    association,
    eps_wf: float = 1e-8,
    max_iters: int = 100_000,
    initial_powers=None,
) -> InnerLoopResult:
    """Sequential iterative water-filling: MUs take exact water-fill steps in
    ascending index order; one iteration is one full round."""
    association, powers = _prepare(scenario, association, initial_powers)
    blocks = _blocks(scenario, association, powers)
    k = scenario.num_channels
    order = []  # (block, row) in ascending MU order
    by_mu = {}
    for blk in blocks:
        for row, i in enumerate(blk.members):
            by_mu[int(i)] = (blk, row)
    for i in sorted(by_mu):
        order.append(by_mu[i])

    pot, rates, rinf, rtwo = [], [], [], []
    converged = False
    rounds = 0
    while True:
        _, res_inf, res_two, potential, mu_rates = _evaluate(blocks, k, scenario.num_mus)
        pot.append(potential)
        rates.append(float(mu_rates.sum()))
        rinf.append(res_inf)
        rtwo.append(res_two)
        if res_inf <= eps_wf:
            converged = True
            break
        if rounds >= max_iters:
            break
        rounds += 1
        for blk, row in order:
            tot = blk.totals()
            floors = (tot - blk.gain[row] * blk.pmat[row]) / blk.gain[row]
            phi, _ = water_fill_batch(floors[None, :], blk.budgets[row : row + 1])
            blk.pmat[row] = phi[0]

    trace = InnerTrace(
        potential=np.asarray(pot),
        sum_rate=np.asarray(rates),
        residual_inf=np.asarray(rinf),
        residual_two=np.asarray(rtwo),
        alpha=np.full(len(pot), math.nan),
    )
    return InnerLoopResult(_collect(scenario, blocks), rounds, converged, trace)


def convergence_diagnostics(
    trace: InnerTrace, eps: float = 1e-8, monotone_tol: float = 1e-12
) -> InnerDiagnostics:
    """Summarize a trace: first index after which the potential is
    non-decreasing (within ``monotone_tol``), whether the final residual meets
    ``eps``, and sum over iterations of alpha * ||residual||_2^2."""
    p = trace.potential
    drops = np.flatnonzero(np.diff(p) < -monotone_tol)
    monotone_from = int(drops[-1] + 1) if drops.size else 0
    finite = np.isfinite(trace.alpha)
    weighted = float(np.sum(trace.alpha[finite] * trace.residual_two[finite] ** 2))
    final = float(trace.residual_inf[-1])
    return InnerDiagnostics(monotone_from, final <= eps, final, weighted)
