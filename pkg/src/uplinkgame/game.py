"""Shared game semantics: interference, rates, potentials, best responses and
equilibrium verification.

An association profile is an int array of length N with 0-based AP indices.
A power profile is a list of N vectors; powers[i] runs over the channels of
MU i's current AP. All rates and potentials are in bits (log base 2) and
carry the paper-style 1/K prefactor with K the *global* channel count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ValidationError
from .waterfill import water_fill, wf_operator

LN2 = math.log(2.0)

# Default tolerances: power fixed points are certified two orders tighter
# than rate-level equilibrium verdicts, so inner-loop noise cannot flip them.
EPS_WF = 1e-8
EPS_EQ = 1e-6


def members_of(association: np.ndarray, ap: int) -> np.ndarray:
    return np.flatnonzero(np.asarray(association) == ap)


def validate_association(scenario, association) -> np.ndarray:
    a = np.asarray(association, dtype=np.intp)
    if a.shape != (scenario.num_mus,):
        raise ValidationError(
            f"association: expected shape ({scenario.num_mus},), got {a.shape}"
        )
    if np.any(a < 0) or np.any(a >= scenario.num_aps):
        raise ValidationError("association: AP index out of range")
    return a


def validate_powers(scenario, association, powers, tol: float = 1e-12) -> None:
    """Check shapes, nonnegativity and per-MU budget feasibility."""
    if len(powers) != scenario.num_mus:
        raise ValidationError(f"powers: expected {scenario.num_mus} vectors")
    for i, p in enumerate(powers):
        cols = scenario.chan_idx[int(association[i])]
        p = np.asarray(p)
        if p.shape != cols.shape:
            raise ValidationError(
                f"powers[{i}]: expected length {cols.size}, got {p.shape}"
            )
        if np.any(p < 0.0):
            raise ValidationError(f"powers[{i}]: negative entry")
        if p.sum() > scenario.budget[i] + tol:
            raise ValidationError(f"powers[{i}]: budget exceeded")


def uniform_powers(scenario, association) -> list[np.ndarray]:
    """Spread each budget evenly over the channels of the MU's AP."""
    return [
        np.full(
            scenario.chan_idx[int(association[i])].size,
            scenario.budget[i] / scenario.chan_idx[int(association[i])].size,
        )
        for i in range(scenario.num_mus)
    ]


def random_feasible_powers(scenario, association, rngs) -> list[np.ndarray]:
    """Draw each MU's power uniformly from its solid simplex {p>=0, sum<=P}."""
    out = []
    for i in range(scenario.num_mus):
        k = scenario.chan_idx[int(association[i])].size
        frac = rngs[i].dirichlet(np.ones(k + 1))[:k]
        out.append(scenario.budget[i] * frac)
    return out


def copy_powers(powers) -> list[np.ndarray]:
    return [np.array(p, dtype=float) for p in powers]


def interference_at(scenario, association, powers, mu: int) -> np.ndarray:
    """Interference seen by ``mu`` on its AP's channels: the sum of
    co-associated MUs' received powers."""
    ap = int(association[mu])
    cols = scenario.chan_idx[ap]
    total = np.zeros(cols.size)
    for j in members_of(association, ap):
        if j == mu:
            continue
        pj = np.asarray(powers[j])
        if pj.shape != cols.shape:
            raise ValidationError(
                f"powers[{j}]: expected length {cols.size} for AP {ap}"
            )
        total += scenario.gain_sq[j, cols] * pj
    return total


def rate(scenario, association, powers, mu: int) -> float:
    """MU transmission rate in bits per channel use (1/K prefactor, global K)."""
    ap = int(association[mu])
    cols = scenario.chan_idx[ap]
    interf = interference_at(scenario, association, powers, mu)
    sinr = scenario.gain_sq[mu, cols] * np.asarray(powers[mu]) / (scenario.noise[cols] + interf)
    return float(np.sum(np.log2(1.0 + sinr)) / scenario.num_channels)


def all_rates(scenario, association, powers) -> np.ndarray:
    return np.array(
        [rate(scenario, association, powers, i) for i in range(scenario.num_mus)]
    )


def sum_rate(scenario, association, powers) -> float:
    return float(all_rates(scenario, association, powers).sum())


def received_totals(scenario, association, powers, ap: int) -> np.ndarray:
    """noise + sum of received powers on the AP's channels."""
    cols = scenario.chan_idx[ap]
    tot = scenario.noise[cols].copy()
    for j in members_of(association, ap):
        tot += scenario.gain_sq[j, cols] * np.asarray(powers[j])
    return tot


def per_ap_potential(scenario, association, powers, ap: int) -> float:
    cols = scenario.chan_idx[ap]
    tot = received_totals(scenario, association, powers, ap)
    return float(np.sum(np.log2(tot) - np.log2(scenario.noise[cols])) / scenario.num_channels)


def system_potential(scenario, association, powers) -> float:
    return float(
        sum(per_ap_potential(scenario, association, powers, w) for w in range(scenario.num_aps))
    )


def potential_gradient(scenario, association, powers) -> list[np.ndarray]:
    """d(potential)/d(powers[i][k]); strictly positive everywhere."""
    grads = []
    for i in range(scenario.num_mus):
        ap = int(association[i])
        cols = scenario.chan_idx[ap]
        tot = received_totals(scenario, association, powers, ap)
        grads.append(scenario.gain_sq[i, cols] / (scenario.num_channels * LN2 * tot))
    return grads


def residual(scenario, association, powers) -> list[np.ndarray]:
    """Distance-to-best-response map: per-MU water-fill output minus current
    power. Its vanishing certifies a power equilibrium."""
    return [
        wf_operator(scenario, association, powers, i) - np.asarray(powers[i])
        for i in range(scenario.num_mus)
    ]


def residual_norms(res: list[np.ndarray]) -> tuple[float, float]:
    """(inf-norm, 2-norm) of a concatenated residual."""
    flat = np.concatenate([np.asarray(r).ravel() for r in res])
    return float(np.max(np.abs(flat))), float(np.linalg.norm(flat))


def best_response_rate(scenario, association, powers, mu: int, candidate_ap: int):
    """Rate MU ``mu`` would get at ``candidate_ap`` with everyone else fixed
    (its current transmission is removed from its current AP), together with
    the maximizing water-fill power vector."""
    ap = int(candidate_ap)
    cols = scenario.chan_idx[ap]
    interf = np.zeros(cols.size)
    for j in members_of(association, ap):
        if j == mu:
            continue
        interf += scenario.gain_sq[j, cols] * np.asarray(powers[j])
    floor = scenario.noise[cols] + interf
    wf = water_fill(scenario.gain_sq[mu, cols], floor, scenario.budget[mu])
    sinr = scenario.gain_sq[mu, cols] * wf.powers / floor
    br = float(np.sum(np.log2(1.0 + sinr)) / scenario.num_channels)
    return br, wf.powers


def best_response_rates(scenario, association, powers, mu: int) -> np.ndarray:
    return np.array(
        [
            best_response_rate(scenario, association, powers, mu, w)[0]
            for w in range(scenario.num_aps)
        ]
    )


def best_ap_set(scenario, association, powers, mu: int, connection_cost: float) -> np.ndarray:
    """APs whose best-response rate beats the current rate, plus the cost for
    leaving: candidate w qualifies when br(w) >= current + c (c waived for the
    current AP, so staying is always free)."""
    cur_ap = int(association[mu])
    cur = rate(scenario, association, powers, mu)
    br = best_response_rates(scenario, association, powers, mu)
    thresh = cur + connection_cost * (np.arange(scenario.num_aps) != cur_ap)
    members = np.flatnonzero(br >= thresh)
    if members.size == 0:
        # Roundoff guard: the current AP qualifies in exact arithmetic
        # (optimizing your own power can never lose to the status quo).
        members = np.array([cur_ap], dtype=np.intp)
    return members


@dataclass(frozen=True)
class EquilibriumReport:
    """Outcome of an equilibrium check.

    violations holds the per-MU violation measure: water-fill residual
    inf-norms for power checks, best switch-rate gains for joint checks.
    """

    is_equilibrium: bool
    tolerance: float
    violations: np.ndarray
    current_rates: np.ndarray
    best_rates: np.ndarray
    worst_violator: Optional[tuple] = None  # (mu, ap, gain)


def verify_power_ne(scenario, association, powers, eps: float = EPS_WF) -> EquilibriumReport:
    """Fixed-point check of the water-fill operator for a fixed association."""
    viol = np.empty(scenario.num_mus)
    best = np.empty(scenario.num_mus)
    cur = all_rates(scenario, association, powers)
    for i in range(scenario.num_mus):
        phi = wf_operator(scenario, association, powers, i)
        viol[i] = np.max(np.abs(phi - np.asarray(powers[i])))
        best[i], _ = best_response_rate(scenario, association, powers, i, int(association[i]))
    ok = bool(np.all(viol <= eps))
    worst = None
    if not ok:
        i = int(np.argmax(viol))
        worst = (i, int(association[i]), float(viol[i]))
    return EquilibriumReport(ok, eps, viol, cur, best, worst)


def verify_jep(scenario, association, powers, eps: float = EPS_EQ) -> EquilibriumReport:
    """Joint check: per-MU power fixed point, and no MU can gain more than
    ``eps`` rate at any other AP. Connection costs are deliberately excluded:
    they shape the dynamics, not the equilibrium definition."""
    power_part = verify_power_ne(scenario, association, powers, eps)
    n, w = scenario.num_mus, scenario.num_aps
    gains = np.zeros(n)
    best = power_part.best_rates.copy()
    worst = None
    worst_gain = -np.inf
    for i in range(n):
        cur_ap = int(association[i])
        for ap in range(w):
            if ap == cur_ap:
                continue
            br, _ = best_response_rate(scenario, association, powers, i, ap)
            best[i] = max(best[i], br)
            gain = br - power_part.current_rates[i]
            gains[i] = max(gains[i], gain)
            if gain > worst_gain:
                worst_gain = gain
                worst = (i, ap, float(gain))
    ok = power_part.is_equilibrium and bool(np.all(gains <= eps))
    violator = None
    if not ok:
        violator = worst if np.any(gains > eps) else power_part.worst_violator
    return EquilibriumReport(
        ok, eps, gains, power_part.current_rates, best, violator
    )
