"""Probabilistic partition planning.

Models how a co-cluster of known minimum size survives a random row/column
permutation followed by an m x n block partition.  The count of co-cluster
rows landing in one block is hypergeometric; a Hoeffding-style tail bound
turns the detection thresholds into an exponential failure bound, and the
minimal number of sampling rounds needed to reach a target success
probability follows from it.  ``plan_partition`` searches candidate grids
for the cheapest admissible plan.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, PlannerError
from .matrix import uniform_split

__all__ = [
    "CoClusterPrior",
    "Margins",
    "AtomCostModel",
    "PartitionPlan",
    "hypergeom_pmf",
    "hypergeom_cdf_below",
    "tail_bound",
    "block_failure_bound",
    "failure_probability_bound",
    "min_sampling_rounds",
    "resolve_thresholds",
    "compute_margins",
    "tightest_prior",
    "plan_partition",
]

# relative slack absorbing float rounding when a threshold sits exactly on a
# round boundary (e.g. budgets quoted to a few decimals)
_CEIL_SLACK = 1e-7


@dataclass(frozen=True)
class CoClusterPrior:
    """Assumed minimum co-cluster size plus block-level detection thresholds.

    ``min_rows``/``min_cols`` are the smallest co-cluster dimensions the plan
    must be able to detect.  ``row_threshold``/``col_threshold`` are the
    minimum number of co-cluster rows/cols that must land inside one block
    for the atom co-clusterer to see it; ``None`` selects a size-scaled
    default at planning time.
    """

    min_rows: int
    min_cols: int
    row_threshold: int | None = None
    col_threshold: int | None = None

    def validate(self, n_rows, n_cols):
        if not (1 <= self.min_rows <= n_rows):
            raise ConfigError(
                f"min_rows={self.min_rows} outside [1, {n_rows}]"
            )
        if not (1 <= self.min_cols <= n_cols):
            raise ConfigError(
                f"min_cols={self.min_cols} outside [1, {n_cols}]"
            )
        if self.row_threshold is not None and not (
            1 <= self.row_threshold <= self.min_rows
        ):
            raise ConfigError(
                f"row_threshold={self.row_threshold} outside [1, min_rows={self.min_rows}]"
            )
        if self.col_threshold is not None and not (
            1 <= self.col_threshold <= self.min_cols
        ):
            raise ConfigError(
                f"col_threshold={self.col_threshold} outside [1, min_cols={self.min_cols}]"
            )


@dataclass(frozen=True)
class Margins:
    """Slack between expected block-local co-cluster size and the thresholds.

    s = min_rows/M - (T_m - 1)/phi, t = min_cols/N - (T_n - 1)/psi.  The
    exponential bounds are vacuous unless both margins are positive.
    """

    s: float
    t: float

    @property
    def admissible(self):
        return self.s > 0.0 and self.t > 0.0


def resolve_thresholds(prior, n_rows, n_cols, phi, psi):
    """Detection thresholds (T_m, T_n), defaulting to 10% of the expected
    block-local co-cluster size with a floor of 3."""
    t_m = prior.row_threshold
    if t_m is None:
        t_m = max(3, math.ceil(0.1 * phi * prior.min_rows / n_rows))
    t_n = prior.col_threshold
    if t_n is None:
        t_n = max(3, math.ceil(0.1 * psi * prior.min_cols / n_cols))
    return int(t_m), int(t_n)


def compute_margins(prior, n_rows, n_cols, phi, psi, t_m=None, t_n=None):
    if t_m is None or t_n is None:
        t_m, t_n = resolve_thresholds(prior, n_rows, n_cols, phi, psi)
    s = prior.min_rows / n_rows - (t_m - 1) / phi
    t = prior.min_cols / n_cols - (t_n - 1) / psi
    return Margins(s=s, t=t)


# ---------------------------------------------------------------------------
# Exact hypergeometric machinery
# ---------------------------------------------------------------------------


def _log_comb(n, k):
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def hypergeom_pmf(population, successes, draws, observed):
    """P(X = observed) for X ~ Hypergeometric(population, successes, draws).

    Computed in log space so populations up to ~1e6 stay finite; exact to
    float precision.  Out-of-support ``observed`` returns 0.0.
    """
    population, successes, draws, observed = (
        int(population),
        int(successes),
        int(draws),
        int(observed),
    )
    if population < 0 or not (0 <= successes <= population):
        raise ConfigError("need 0 <= successes <= population")
    if not (0 <= draws <= population):
        raise ConfigError("need 0 <= draws <= population")
    low = max(0, draws - (population - successes))
    high = min(successes, draws)
    if observed < low or observed > high:
        return 0.0
    log_p = (
        _log_comb(successes, observed)
        + _log_comb(population - successes, draws - observed)
        - _log_comb(population, draws)
    )
    return min(1.0, math.exp(log_p))


def hypergeom_cdf_below(population, successes, draws, threshold):
    """P(X < threshold), summed with compensated (fsum) accumulation."""
    low = max(0, draws - (population - successes))
    high = min(successes, draws)
    upper = min(threshold - 1, high)
    if upper < low:
        return 0.0
    return min(
        1.0,
        math.fsum(
            hypergeom_pmf(population, successes, draws, a)
            for a in range(low, upper + 1)
        ),
    )


# ---------------------------------------------------------------------------
# Exponential bounds
# ---------------------------------------------------------------------------


def tail_bound(share, threshold, block):
    """Hoeffding-style bound on P(X < threshold) for the block-local count.

    ``share`` is the co-cluster's population fraction (e.g. min_rows/M) and
    ``block`` the block size phi.  Returns exp(-2 s^2 phi) with
    s = share - (threshold - 1)/block, clamped to 1.0 when s <= 0 (the bound
    is vacuous there).
    """
    if block < 1:
        raise ConfigError("block size must be >= 1")
    if threshold < 1:
        raise ConfigError("threshold must be >= 1")
    s = share - (threshold - 1) / block
    if s <= 0.0:
        return 1.0
    return math.exp(-2.0 * s * s * block)


def block_failure_bound(prior, phi, psi, n_rows, n_cols, t_m=None, t_n=None):
    """Bound on the probability that one block holds fewer than T_m rows and
    T_n cols of the co-cluster: the product of the two tail bounds.

    Clamps to 1.0 whenever either margin is non-positive.
    """
    if t_m is None or t_n is None:
        t_m, t_n = resolve_thresholds(prior, n_rows, n_cols, phi, psi)
    margins = compute_margins(prior, n_rows, n_cols, phi, psi, t_m, t_n)
    if not margins.admissible:
        return 1.0
    return tail_bound(prior.min_rows / n_rows, t_m, phi) * tail_bound(
        prior.min_cols / n_cols, t_n, psi
    )


def failure_probability_bound(
    prior, m, n, phi, psi, n_rows, n_cols, t_m=None, t_n=None
):
    """Bound on the probability that one sampling round misses the co-cluster
    in every block: exp(-2 [phi m s^2 + psi n t^2]) for uniform blocks."""
    if t_m is None or t_n is None:
        t_m, t_n = resolve_thresholds(prior, n_rows, n_cols, phi, psi)
    margins = compute_margins(prior, n_rows, n_cols, phi, psi, t_m, t_n)
    if not margins.admissible:
        return 1.0
    exponent = phi * m * margins.s**2 + psi * n * margins.t**2
    return math.exp(-2.0 * exponent)


def exponent_budget(prior, m, n, phi, psi, n_rows, n_cols, t_m=None, t_n=None):
    """B = phi m s^2 + psi n t^2, or 0.0 when the margins are inadmissible."""
    if t_m is None or t_n is None:
        t_m, t_n = resolve_thresholds(prior, n_rows, n_cols, phi, psi)
    margins = compute_margins(prior, n_rows, n_cols, phi, psi, t_m, t_n)
    if not margins.admissible:
        return 0.0
    return phi * m * margins.s**2 + psi * n * margins.t**2


def min_sampling_rounds(budget, p_thresh):
    """Smallest T_p >= 1 with 1 - exp(-2 T_p B) >= p_thresh.

    Closed form: T_p = max(1, ceil(ln(1 - p_thresh) / (-2 B))); a relative
    slack of 1e-7 absorbs float rounding when the target sits exactly on a
    round boundary.
    """
    if budget <= 0.0:
        raise PlannerError("inadmissible margins: exponent budget must be > 0")
    if p_thresh >= 1.0:
        raise PlannerError("unreachable threshold: p_thresh must be < 1")
    if p_thresh < 0.0:
        raise ConfigError("p_thresh must be >= 0")
    if p_thresh == 0.0:
        return 1
    ratio = math.log1p(-p_thresh) / (-2.0 * budget)
    return max(1, math.ceil(ratio * (1.0 - _CEIL_SLACK)))


# ---------------------------------------------------------------------------
# Grid optimization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AtomCostModel:
    """Relative cost of co-clustering one phi x psi block.

    Dense blocks pay for an exact SVD (phi * psi * min(phi, psi)); sparse
    ones for an iterative truncated SVD (phi * psi * (l + 1)) where ``l`` is
    the number of retained singular vector pairs.
    """

    storage: str = "dense"
    n_components: int = 2

    def cost(self, phi, psi):
        if self.storage == "sparse":
            return float(phi) * float(psi) * (self.n_components + 1)
        return float(phi) * float(psi) * float(min(phi, psi))


@dataclass(frozen=True)
class PartitionPlan:
    """A certified block grid plus the sampling rounds needed to hit the
    target success probability.

    ``phi``/``psi`` are the conservative (smallest) block sizes used for the
    bound; actual spans come from :meth:`row_sizes`/:meth:`col_sizes` and
    differ by at most one.  ``success_bound`` = 1 - failure_bound**rounds.
    """

    n_rows: int
    n_cols: int
    m: int
    n: int
    phi: int
    psi: int
    rounds: int
    perm_seeds: tuple[tuple[int, int], ...]
    failure_bound: float
    success_bound: float
    p_thresh: float
    row_threshold: int
    col_threshold: int
    margins: Margins
    estimated_cost: float
    atom_p: float | None = None

    def row_sizes(self):
        return uniform_split(self.n_rows, self.m)

    def col_sizes(self):
        return uniform_split(self.n_cols, self.n)

    def to_dict(self):
        return {
            "m": self.m,
            "n": self.n,
            "phi": self.phi,
            "psi": self.psi,
            "rounds": self.rounds,
            "perm_seeds": [list(pair) for pair in self.perm_seeds],
            "failure_bound": self.failure_bound,
            "success_bound": self.success_bound,
            "p_thresh": self.p_thresh,
            "rows": self.n_rows,
            "cols": self.n_cols,
            "row_threshold": self.row_threshold,
            "col_threshold": self.col_threshold,
            "margin_s": self.margins.s,
            "margin_t": self.margins.t,
            "estimated_cost": self.estimated_cost,
            "atom_p": self.atom_p,
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, doc):
        return cls(
            n_rows=int(doc["rows"]),
            n_cols=int(doc["cols"]),
            m=int(doc["m"]),
            n=int(doc["n"]),
            phi=int(doc["phi"]),
            psi=int(doc["psi"]),
            rounds=int(doc["rounds"]),
            perm_seeds=tuple((int(a), int(b)) for a, b in doc["perm_seeds"]),
            failure_bound=float(doc["failure_bound"]),
            success_bound=float(doc["success_bound"]),
            p_thresh=float(doc["p_thresh"]),
            row_threshold=int(doc["row_threshold"]),
            col_threshold=int(doc["col_threshold"]),
            margins=Margins(s=float(doc["margin_s"]), t=float(doc["margin_t"])),
            estimated_cost=float(doc["estimated_cost"]),
            atom_p=doc.get("atom_p"),
        )


def tightest_prior(priors):
    """Collapse several priors into one that is conservative for all of them:
    smallest sizes, largest explicit thresholds."""
    if not priors:
        raise ConfigError("at least one prior is required")
    if len(priors) == 1:
        return priors[0]

    def _max_threshold(values):
        explicit = [v for v in values if v is not None]
        return max(explicit) if explicit else None

    return CoClusterPrior(
        min_rows=min(p.min_rows for p in priors),
        min_cols=min(p.min_cols for p in priors),
        row_threshold=_max_threshold(p.row_threshold for p in priors),
        col_threshold=_max_threshold(p.col_threshold for p in priors),
    )


def _candidate_axis(dim, max_grid):
    values = []
    v = 1
    while v <= min(dim, max_grid):
        values.append(v)
        v *= 2
    return values


def _derive_perm_seeds(root_seed, rounds):
    state = np.random.SeedSequence(root_seed).generate_state(2 * rounds, np.uint64)
    # mask to 63 bits so serialized seeds stay within signed-int JSON range
    state = (state & np.uint64((1 << 63) - 1)).tolist()
    return tuple((int(state[2 * r]), int(state[2 * r + 1])) for r in range(rounds))


def plan_partition(
    n_rows,
    n_cols,
    prior,
    p_thresh,
    workers=1,
    cost_model=None,
    root_seed=0,
    force_grid=None,
    max_grid=64,
    grid_budget=None,
    min_rounds_multiblock=2,
):
    """Choose the cheapest admissible uniform grid and its sampling rounds.

    Candidate grid counts run over powers of two up to ``max_grid`` with
    m * n capped at ``grid_budget`` (default ``4 * workers``; keeps block
    fragments large enough to re-merge and the candidate pool bounded).
    Admissibility requires both margins positive; the returned plan
    satisfies ``success_bound >= p_thresh``.

    Grids with more than one block are given at least
    ``min_rounds_multiblock`` rounds: fragments of one co-cluster in a
    single round never overlap on both axes at once, so cross-round overlap
    is what lets the merge stage reunite them.

    ``force_grid`` pins (m, n) and skips the search; it still errors if the
    forced grid is inadmissible.
    """
    if workers is None or workers < 1:
        raise ConfigError("workers must be >= 1")
    if not (0.0 <= p_thresh < 1.0):
        raise PlannerError(
            "unreachable threshold: p_thresh must lie in [0, 1)"
            if p_thresh >= 1.0
            else "p_thresh must be >= 0"
        )
    prior.validate(n_rows, n_cols)
    if cost_model is None:
        cost_model = AtomCostModel()
    if grid_budget is None:
        grid_budget = max(4 * workers, 1)

    if force_grid is not None:
        m, n = int(force_grid[0]), int(force_grid[1])
        if not (1 <= m <= n_rows and 1 <= n <= n_cols):
            raise ConfigError(f"forced grid {m}x{n} exceeds matrix shape")
        candidates = [(m, n)]
    else:
        candidates = [
            (m, n)
            for m in _candidate_axis(n_rows, max_grid)
            for n in _candidate_axis(n_cols, max_grid)
            if m * n <= grid_budget or (m, n) == (1, 1)
        ]

    best = None
    best_key = None
    worst_margins = None
    for m, n in candidates:
        phi = n_rows // m
        psi = n_cols // n
        if phi < 1 or psi < 1:
            continue
        t_m, t_n = resolve_thresholds(prior, n_rows, n_cols, phi, psi)
        margins = compute_margins(prior, n_rows, n_cols, phi, psi, t_m, t_n)
        if worst_margins is None or min(margins.s, margins.t) > min(
            worst_margins.s, worst_margins.t
        ):
            worst_margins = margins
        if not margins.admissible:
            continue
        budget = phi * m * margins.s**2 + psi * n * margins.t**2
        rounds = min_sampling_rounds(budget, p_thresh)
        if m * n > 1:
            rounds = max(rounds, min_rounds_multiblock)
        failure = math.exp(-2.0 * budget)
        success = 1.0 - failure**rounds
        while success < p_thresh:  # guard against boundary-slack shortfall
            rounds += 1
            success = 1.0 - failure**rounds
        est_cost = rounds * math.ceil(m * n / workers) * cost_model.cost(phi, psi)
        key = (est_cost, m, n)
        if best_key is None or key < best_key:
            best_key = key
            best = (m, n, phi, psi, t_m, t_n, margins, rounds, failure, success, est_cost)

    if best is None:
        detail = ""
        if worst_margins is not None:
            tight = "row margin s" if worst_margins.s <= worst_margins.t else "col margin t"
            detail = (
                f"; tightest violated margin: {tight} = "
                f"{min(worst_margins.s, worst_margins.t):.6f} <= 0"
            )
        raise PlannerError(
            "no admissible grid: detection thresholds exceed the expected "
            "block-local co-cluster size for every candidate" + detail
        )

    m, n, phi, psi, t_m, t_n, margins, rounds, failure, success, est_cost = best
    return PartitionPlan(
        n_rows=n_rows,
        n_cols=n_cols,
        m=m,
        n=n,
        phi=phi,
        psi=psi,
        rounds=rounds,
        perm_seeds=_derive_perm_seeds(root_seed, rounds),
        failure_bound=failure,
        success_bound=success,
        p_thresh=p_thresh,
        row_threshold=t_m,
        col_threshold=t_n,
        margins=margins,
        estimated_cost=est_cost,
    )
