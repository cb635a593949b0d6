"""Equilibrium computation for symmetric games by support enumeration.

Every candidate support gives a square linear system (equal payoffs on the
support, weights summing to one); solutions surviving nonnegativity and the
off-support best-reply inequality are Nash equilibria and get classified by
:mod:`replab.games`.  For conditionally negative definite games the unique
evolutionarily stable strategy found this way is the oracle against which the
war-of-attrition closed form is checked.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from . import games
from .errors import PreconditionError, ValidationError

log = logging.getLogger(__name__)

MAX_SUPPORT_N = 20          # 2^n - 1 supports are enumerated
EQUALIZE_TOL = 1e-10        # residual of the support solve itself
REPORT_RESIDUAL_TOL = 1e-9  # reports violating this are discarded
OFF_SUPPORT_TOL = 1e-9
DEDUP_DISTANCE = 1e-8


@dataclass(frozen=True)
class EquilibriumReport:
    """A candidate strategy together with its support, payoff and status."""

    strategy: np.ndarray
    support: tuple[int, ...]
    common_payoff: float
    status: str
    equal_payoff_residual: float
    off_support_slack: float    # max off-support payoff minus common payoff (<= tol)

    @property
    def residual(self) -> float:
        return max(self.equal_payoff_residual, self.off_support_slack, 0.0)

    @property
    def is_ess(self) -> bool:
        """Strict Nash vertices are evolutionarily stable by definition."""
        return self.status in (games.STRICT_NASH, games.ESS_CERTIFIED)


def equalize_on_support(A, support):
    """Solve for the mix supported on ``support`` that equalizes payoffs there.

    Returns ``(p, c, residual)`` with ``p`` a full-length closure point whose
    weights vanish off the support, or ``None`` when the linear system is
    singular ("degenerate support") or yields a negative weight.
    """
    A = games.as_payoff_matrix(A)
    sup = sorted(set(int(j) for j in support))
    if not sup:
        raise ValidationError("support must be nonempty")
    if sup[0] < 0 or sup[-1] >= A.shape[0]:
        raise ValidationError("support index out of range")
    m = len(sup)
    lhs = np.zeros((m + 1, m + 1))
    rhs = np.zeros(m + 1)
    lhs[:m, :m] = A[np.ix_(sup, sup)]
    lhs[:m, m] = -1.0
    lhs[m, :m] = 1.0
    rhs[m] = 1.0
    try:
        sol = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError:
        log.debug("degenerate support %s: singular equal-payoff system", sup)
        return None
    if not np.all(np.isfinite(sol)):
        log.debug("degenerate support %s: non-finite solution", sup)
        return None
    weights = sol[:m]
    c = float(sol[m])
    if weights.min() < -games.TIE_TOL:
        return None
    weights = np.clip(weights, 0.0, None)
    p = np.zeros(A.shape[0])
    p[sup] = weights
    residual = max(
        float(np.max(np.abs(A[sup][:, sup] @ weights - c))),
        abs(float(p.sum()) - 1.0),
    )
    if residual > EQUALIZE_TOL:
        log.debug("degenerate support %s: residual %.3g after solve", sup, residual)
        return None
    return p, c, residual


def solve_all_equilibria(A) -> list[EquilibriumReport]:
    """Enumerate all Nash equilibria with a nondegenerate support system.

    Supports are visited by increasing size, lexicographically within a size;
    duplicate strategies (within ``DEDUP_DISTANCE``) keep their first, i.e.
    smallest-support, occurrence.  The result is deterministic regardless of
    any parallel evaluation of supports because of this canonical order.
    """
    A = games.as_payoff_matrix(A)
    n = A.shape[0]
    if n > MAX_SUPPORT_N:
        raise ValidationError(
            f"support enumeration visits 2^n - 1 supports; refusing n = {n} > {MAX_SUPPORT_N}"
        )
    reports: list[EquilibriumReport] = []
    for size in range(1, n + 1):
        for support in itertools.combinations(range(n), size):
            solved = equalize_on_support(A, support)
            if solved is None:
                continue
            p, c, residual = solved
            if residual > REPORT_RESIDUAL_TOL:
                continue
            payoffs = A @ p
            off = [j for j in range(n) if j not in support]
            slack = float(np.max(payoffs[off] - c)) if off else -np.inf
            if slack > OFF_SUPPORT_TOL:
                continue
            if any(np.linalg.norm(p - r.strategy) < DEDUP_DISTANCE for r in reports):
                continue
            status = games.classify_equilibrium(A, p)
            if status == games.NOT_NASH:
                continue
            actual_support = tuple(int(j) for j in np.flatnonzero(p > 0.0))
            reports.append(
                EquilibriumReport(
                    strategy=p,
                    support=actual_support,
                    common_payoff=c,
                    status=status,
                    equal_payoff_residual=residual,
                    off_support_slack=max(slack, 0.0) if off else 0.0,
                )
            )
    reports.sort(key=lambda r: (len(r.support), r.support))
    return reports


def unique_ess(A) -> EquilibriumReport | None:
    """The single evolutionarily stable strategy of a CND game.

    Requires the payoff matrix to be conditionally negative definite, which
    forces every Nash equilibrium to be evolutionarily stable and at most one
    to exist: two stable strategies p, q would give ``(p-q).A.(p-q) >= 0`` on
    the zero-sum hyperplane.  Returns ``None`` only if enumeration found no
    nondegenerate equilibrium at all.
    """
    A = games.as_payoff_matrix(A)
    if not games.is_conditionally_negative_definite(A):
        raise PreconditionError(
            "conditionally-negative-definite",
            "unique_ess requires a conditionally negative definite payoff matrix",
        )
    reports = solve_all_equilibria(A)
    stable = [r for r in reports if r.is_ess]
    if len(stable) > 1:
        raise AssertionError(
            f"CND game produced {len(stable)} stable strategies; uniqueness violated"
        )
    if stable:
        return stable[0]
    return None
