"""Statics of symmetric matrix games on the probability simplex.

Conventions used throughout the package:

* A game is a plain square ``numpy`` array ``A`` where ``A[j, k]`` is the
  payoff to a player using (0-based) pure strategy ``j`` against an opponent
  playing ``k``.
* Mixed strategies and population states are probability vectors; ``interior``
  means every entry is strictly positive, ``closure`` allows zeros.
* Per-strategy diffusion coefficients ``sigma`` are strictly positive.

The analytical quantities here drive everything else: the centered
symmetrization and its second-largest eigenvalue measure how strongly a stable
mix attracts the noisy dynamics, ``aggregate_noise`` condenses the diffusion
coefficients into a single magnitude, and the dominance/equilibrium
classifiers provide the static side of every long-run statement the package
checks by simulation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

# Tolerances. Payoffs are user-given exact reals, so ties are detected at
# essentially machine precision; equal-payoff residuals of linear solves get
# the looser EQ_TOL.
SUM_TOL = 1e-12      # simplex normalization
TIE_TOL = 1e-12      # exact payoff ties (dominance, strict Nash)
EQ_TOL = 1e-9        # equal-payoff / best-reply residuals
CND_TOL = 1e-10      # |second eigenvalue| below this counts as boundary

NOT_NASH = "NotNash"
NASH = "Nash"
STRICT_NASH = "StrictNash"
ESS_CERTIFIED = "ESS-certified"
ESS_REFUTED = "ESS-refuted"
UNDETERMINED = "Undetermined"

MAX_EIG_N = 64           # supported matrix order for the dense eigensolver
MAX_DOMINANCE_N = 12     # basis enumeration in best_dominating_mix is O(C(2n, n))


# ---------------------------------------------------------------------------
# validation


def as_payoff_matrix(A) -> np.ndarray:
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"payoff matrix must be square, got shape {A.shape}")
    if A.shape[0] < 2:
        raise ValidationError("games need at least 2 strategies")
    if not np.all(np.isfinite(A)):
        raise ValidationError("payoff matrix has non-finite entries")
    return A


def as_noise_vector(sigma, n: int) -> np.ndarray:
    s = np.array(sigma, dtype=float).reshape(-1)
    if s.size != n:
        raise ValidationError(f"need {n} diffusion coefficients, got {s.size}")
    if not np.all(np.isfinite(s)) or np.any(s <= 0.0):
        raise ValidationError("diffusion coefficients must be finite and > 0")
    return s


def as_simplex_point(x, n: int | None = None, *, interior: bool = False) -> np.ndarray:
    p = np.array(x, dtype=float).reshape(-1)
    if n is not None and p.size != n:
        raise ValidationError(f"expected a vector of length {n}, got {p.size}")
    if not np.all(np.isfinite(p)):
        raise ValidationError("simplex point has non-finite entries")
    if abs(p.sum() - 1.0) > SUM_TOL:
        raise ValidationError(f"weights sum to {p.sum()!r}, not 1 within {SUM_TOL}")
    if interior:
        if np.any(p <= 0.0):
            raise ValidationError("point must be strictly interior (all weights > 0)")
    elif np.any(p < 0.0):
        raise ValidationError("weights must be nonnegative")
    return p


def uniform_point(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def vertex(n: int, k: int) -> np.ndarray:
    e = np.zeros(n)
    e[k] = 1.0
    return e


# ---------------------------------------------------------------------------
# regions of the simplex


@dataclass(frozen=True)
class Region:
    """A measurable target set used for hitting times and occupation fractions.

    Kinds: ``ball`` (Euclidean ball around a point), ``vertex`` (one coordinate
    at least ``1 - eps``), ``any_vertex`` (some coordinate at least ``1 - eps``)
    and ``coordinate_below`` (one coordinate at most ``eps``).
    """

    kind: str
    center: tuple[float, ...] | None = None
    radius: float | None = None
    index: int | None = None
    eps: float | None = None

    @classmethod
    def ball(cls, center, radius: float) -> "Region":
        c = as_simplex_point(center)
        if not radius > 0.0:
            raise ValidationError("ball radius must be > 0")
        return cls(kind="ball", center=tuple(float(v) for v in c), radius=float(radius))

    @classmethod
    def vertex_neighborhood(cls, index: int, eps: float) -> "Region":
        if not 0.0 < eps < 1.0:
            raise ValidationError("eps must lie in (0, 1)")
        return cls(kind="vertex", index=int(index), eps=float(eps))

    @classmethod
    def any_vertex_neighborhood(cls, eps: float) -> "Region":
        if not 0.0 < eps < 1.0:
            raise ValidationError("eps must lie in (0, 1)")
        return cls(kind="any_vertex", eps=float(eps))

    @classmethod
    def coordinate_below(cls, index: int, eps: float) -> "Region":
        if not 0.0 < eps < 1.0:
            raise ValidationError("eps must lie in (0, 1)")
        return cls(kind="coordinate_below", index=int(index), eps=float(eps))

    def contains(self, states) -> np.ndarray:
        """Vectorized membership test; accepts one state or an (m, n) stack."""
        x = np.asarray(states, dtype=float)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if self.kind == "ball":
            c = np.asarray(self.center)
            inside = ((x - c) ** 2).sum(axis=1) < self.radius**2
        elif self.kind == "vertex":
            inside = x[:, self.index] >= 1.0 - self.eps
        elif self.kind == "any_vertex":
            inside = x.max(axis=1) >= 1.0 - self.eps
        elif self.kind == "coordinate_below":
            inside = x[:, self.index] <= self.eps
        else:  # pragma: no cover - constructors prevent this
            raise ValidationError(f"unknown region kind {self.kind!r}")
        return bool(inside[0]) if squeeze else inside

    def describe(self) -> str:
        if self.kind == "ball":
            return f"ball(radius={self.radius:g})"
        if self.kind == "vertex":
            return f"x[{self.index}] >= {1.0 - self.eps:g}"
        if self.kind == "any_vertex":
            return f"max_k x[k] >= {1.0 - self.eps:g}"
        return f"x[{self.index}] <= {self.eps:g}"


# ---------------------------------------------------------------------------
# eigenvalues of small dense symmetric matrices


def jacobi_eigh(S, *, tol: float | None = None, max_sweeps: int = 100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, V)`` with eigenvalues sorted descending and eigenvectors in
    the corresponding columns of ``V``.  Sweeps stop once the off-diagonal
    Frobenius norm falls below ``tol`` (default: 1e-13 relative to the matrix
    scale), which pins every eigenvalue to well under 1e-12 absolute for the
    matrix orders supported here (n <= 64).
    """
    A = np.array(S, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValidationError("matrix must be square")
    if n > MAX_EIG_N:
        raise ValidationError(f"dense Jacobi eigensolver supports n <= {MAX_EIG_N}")
    if not np.allclose(A, A.T, atol=1e-12, rtol=0.0):
        raise ValidationError("matrix must be symmetric")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    if n == 1:
        return A.diagonal().copy(), V
    scale = np.abs(A).max()
    if tol is None:
        tol = 1e-13 * max(1.0, scale)
    for _ in range(max_sweeps):
        off = math.sqrt(float((np.triu(A, 1) ** 2).sum()))
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= tol / (n * n):
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(1.0, theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    w = A.diagonal().copy()
    order = np.argsort(w)[::-1]
    return w[order], V[:, order]


# ---------------------------------------------------------------------------
# attraction constants


def centered_symmetrization(A) -> np.ndarray:
    """Symmetrize and center a payoff matrix onto the zero-sum hyperplane.

    The result ``D`` is symmetric, has the all-ones vector in its kernel, and
    agrees with ``A`` as a quadratic form on ``{y : sum(y) = 0}``.
    """
    A = as_payoff_matrix(A)
    n = A.shape[0]
    Abar = 0.5 * (A + A.T)
    ones = np.ones((n, 1))
    row = Abar @ ones @ ones.T / n
    col = ones @ (ones.T @ Abar) / n
    total = float(A.sum()) / n**2
    return Abar - row - col + total * np.ones((n, n))


def _zero_sum_basis(n: int) -> np.ndarray:
    """Orthonormal basis of the hyperplane orthogonal to the all-ones vector."""
    E = np.zeros((n, n - 1))
    E[0, :] = -1.0
    for i in range(n - 1):
        E[i + 1, i] = 1.0
    Q, _ = np.linalg.qr(E)
    return Q


def second_eigenvalue(A) -> float:
    """Maximum of ``y.A.y / y.y`` over nonzero zero-sum directions.

    Computed as the top eigenvalue of the centered form restricted to the
    hyperplane orthogonal to the all-ones vector.  The all-ones direction is a
    kernel direction of the centered matrix, so whenever the form is negative
    on the hyperplane this value is exactly the second-largest eigenvalue of
    the centered matrix (counting multiplicity); its sign decides conditional
    negative definiteness, and its magnitude measures the strength of
    attraction toward a stable mix.
    """
    D = centered_symmetrization(A)
    Q = _zero_sum_basis(D.shape[0])
    w, _ = jacobi_eigh(Q.T @ D @ Q)
    return float(w[0])


def cnd_status(A) -> str:
    """One of ``negative`` / ``boundary`` / ``nonnegative`` for the centered form."""
    lam2 = second_eigenvalue(A)
    if lam2 < -CND_TOL:
        return "negative"
    if lam2 <= CND_TOL:
        return "boundary"
    return "nonnegative"


def is_conditionally_negative_definite(A) -> bool:
    """True iff the quadratic form is negative on the zero-sum hyperplane.

    Boundary cases (second eigenvalue within ``CND_TOL`` of zero) report
    False: the certificates built on top of this test are only claimed when
    the sign is unambiguous.
    """
    return cnd_status(A) == "negative"


def kl_distance(x, p) -> float:
    """Relative entropy ``sum_{p_j > 0} p_j log(p_j / x_j)``.

    ``x`` must be strictly interior; ``p`` may sit on the boundary, in which
    case only its support contributes and the value is still finite and >= 0.
    """
    x = as_simplex_point(x, interior=True)
    p = as_simplex_point(p, x.size)
    support = p > 0.0
    return float(np.sum(p[support] * np.log(p[support] / x[support])))


def aggregate_noise(p, sigma) -> float:
    """Scalar noise magnitude ``kappa`` of a mix under per-strategy noise.

    ``kappa^2 = 0.5 * sum p_j sigma_j^2 - 0.5 / sum sigma_j^-2``; the value is
    nonnegative by Cauchy-Schwarz, and tiny negative round-off is clipped.
    """
    p = as_simplex_point(p)
    s = as_noise_vector(sigma, p.size)
    s2 = s * s
    kappa_sq = 0.5 * float(p @ s2) - 0.5 / float(np.sum(1.0 / s2))
    return math.sqrt(max(kappa_sq, 0.0))


def noise_below_attraction_threshold(p, sigma, lam2: float) -> bool:
    """Smallness condition tying noise to the attraction gap of an interior mix.

    Holds iff ``kappa < n/(n-1) * sqrt(|lam2|) * min_j p_j`` (strictly); points
    with a zero weight therefore always fail.  Requires ``lam2 < 0``.
    """
    p = as_simplex_point(p)
    if not lam2 < 0.0:
        raise ValidationError("threshold needs a negative second eigenvalue")
    n = p.size
    kappa = aggregate_noise(p, sigma)
    return kappa < (n / (n - 1.0)) * math.sqrt(-lam2) * float(p.min())


def effective_payoff_matrix(A, sigma) -> np.ndarray:
    """Payoff matrix felt by the noisy dynamics: ``A - diag(sigma^2)``."""
    A = as_payoff_matrix(A)
    s = as_noise_vector(sigma, A.shape[0])
    B = A.copy()
    B[np.diag_indices_from(B)] -= s * s
    return B


# ---------------------------------------------------------------------------
# dominance


@dataclass(frozen=True)
class DominanceResult:
    """Outcome of testing whether a mix beats a pure strategy everywhere.

    ``margin`` is the worst-case payoff advantage ``min_r (p - e_k) . A e_r``
    over opponent vertices (the minimum over all opponent mixes, by linearity).
    """

    kind: str                  # "none" | "weak" | "strict"
    margin: float
    per_vertex: tuple[float, ...] = field(repr=False, default=())


def verify_dominance(A, k: int, p) -> DominanceResult:
    """Classify whether mixed strategy ``p`` dominates pure strategy ``k``."""
    A = as_payoff_matrix(A)
    n = A.shape[0]
    if not 0 <= k < n:
        raise ValidationError(f"strategy index {k} out of range")
    p = as_simplex_point(p, n)
    if np.max(np.abs(p - vertex(n, k))) <= TIE_TOL:
        raise ValidationError("the dominating mix must differ from the strategy itself")
    diffs = p @ A - A[k, :]
    margin = float(diffs.min())
    if margin > TIE_TOL:
        kind = "strict"
    elif margin >= -TIE_TOL and bool(np.any(diffs > TIE_TOL)):
        kind = "weak"
    else:
        kind = "none"
    return DominanceResult(kind=kind, margin=margin, per_vertex=tuple(float(d) for d in diffs))


def best_dominating_mix(A, k: int):
    """Search for the mix that dominates pure strategy ``k`` with maximal margin.

    Solves ``max_p min_r (p - e_k) . A e_r`` over the closed simplex exactly,
    by enumerating basic solutions of the small max-min linear program (all
    support / tight-constraint pairs).  Cost grows like C(2n, n); inputs are
    capped at n <= 12.  Returns ``(p, margin)`` where the returned mix
    verifies weak or strict dominance, or ``None`` when no such witness
    exists.
    """
    A = as_payoff_matrix(A)
    n = A.shape[0]
    if n > MAX_DOMINANCE_N:
        raise ValidationError(f"dominance search enumerates bases; limited to n <= {MAX_DOMINANCE_N}")
    if not 0 <= k < n:
        raise ValidationError(f"strategy index {k} out of range")
    M = A - A[k, :][None, :]        # M[j, r] = payoff advantage of j over k vs vertex r

    best_val = -math.inf
    best_points: list[np.ndarray] = []
    indices = range(n)
    for t in range(1, n + 1):
        for support in itertools.combinations(indices, t):
            sup = list(support)
            for tight in itertools.combinations(indices, t):
                # unknowns: p on the support plus the common tight value c
                lhs = np.zeros((t + 1, t + 1))
                rhs = np.zeros(t + 1)
                for i, r in enumerate(tight):
                    lhs[i, :t] = M[sup, r]
                    lhs[i, t] = -1.0
                lhs[t, :t] = 1.0
                rhs[t] = 1.0
                try:
                    sol = np.linalg.solve(lhs, rhs)
                except np.linalg.LinAlgError:
                    continue
                if not np.all(np.isfinite(sol)):
                    continue
                p = np.zeros(n)
                p[sup] = sol[:t]
                if p.min() < -1e-10:
                    continue
                p = np.clip(p, 0.0, None)
                total = p.sum()
                if not 0.5 < total < 2.0:
                    continue
                p /= total
                values = p @ M
                val = float(values.min())
                if val > best_val + 1e-12:
                    best_val = val
                    best_points = [p]
                elif abs(val - best_val) <= 1e-12:
                    best_points.append(p)

    if not best_points or best_val < -TIE_TOL:
        return None

    candidates = [p for p in best_points
                  if np.max(np.abs(p - vertex(n, k))) > TIE_TOL]
    # deduplicate, then add the centroid of the optimal face: strictness may
    # hold only away from the face's corners
    unique: list[np.ndarray] = []
    for p in candidates:
        if all(np.linalg.norm(p - q) > 1e-8 for q in unique):
            unique.append(p)
    if len(unique) > 1:
        unique.append(np.mean(unique, axis=0))

    best = None
    for p in unique:
        res = verify_dominance(A, k, p)
        if res.kind == "strict":
            return p, res.margin
        if res.kind == "weak" and best is None:
            best = (p, res.margin)
    return best


# ---------------------------------------------------------------------------
# equilibrium classification


def noise_robust_strict_nash(A, sigma, k: int) -> bool:
    """Strict Nash test with the noise-adjusted diagonal margin.

    True iff ``A[k, k] > A[j, k] + sigma_k^2`` for every ``j != k``: strategy
    ``k`` remains a strict Nash equilibrium of the effective payoff matrix.
    """
    A = as_payoff_matrix(A)
    s = as_noise_vector(sigma, A.shape[0])
    if not 0 <= k < A.shape[0]:
        raise ValidationError(f"strategy index {k} out of range")
    margin = s[k] ** 2
    col = A[:, k]
    return all(col[k] > col[j] + margin for j in range(A.shape[0]) if j != k)


def is_coordination_game(A, sigma) -> bool:
    """True iff every pure strategy passes the noise-robust strict Nash test."""
    A = as_payoff_matrix(A)
    return all(noise_robust_strict_nash(A, sigma, k) for k in range(A.shape[0]))


def classify_equilibrium(A, p, *, tol: float = EQ_TOL, cone_samples: int = 10_000) -> str:
    """Classify a candidate strategy: Nash status plus stability certification.

    Order of decision:

    1. ``NotNash`` if some pure reply earns more than ``p`` against ``p``.
    2. ``StrictNash`` for a vertex that strictly beats every other pure reply.
    3. ``ESS-certified`` when the whole matrix is conditionally negative
       definite (every Nash equilibrium is then evolutionarily stable), or
       when the payoff form is negative definite on the span of directions
       inside the best-reply face.
    4. ``ESS-refuted`` when a feasible direction in the face makes the
       quadratic form nonnegative (checked on eigen-directions of the
       restricted form and on a fixed batch of random face samples).
    5. ``Undetermined`` otherwise; definiteness on a polyhedral cone is not
       decided by its extreme rays, so no claim is made either way.
    """
    A = as_payoff_matrix(A)
    n = A.shape[0]
    p = as_simplex_point(p, n)
    payoffs = A @ p
    own = float(p @ payoffs)
    if float(payoffs.max()) > own + tol:
        return NOT_NASH

    k = int(np.argmax(p))
    if np.max(np.abs(p - vertex(n, k))) <= TIE_TOL:
        col = A[:, k]
        if all(col[k] > col[j] + TIE_TOL for j in range(n) if j != k):
            return STRICT_NASH

    if is_conditionally_negative_definite(A):
        return ESS_CERTIFIED

    face = np.flatnonzero(payoffs >= own - tol)
    if face.size == 1:
        # unique best reply: p is that vertex and is strict up to ties caught above
        return STRICT_NASH

    # span of zero-sum directions supported on the best-reply face
    E = np.zeros((n, face.size - 1))
    for i, j in enumerate(face[1:]):
        E[face[0], i] = -1.0
        E[j, i] = 1.0
    Q, _ = np.linalg.qr(E)
    Abar = 0.5 * (A + A.T)
    S = Q.T @ Abar @ Q
    w, V = jacobi_eigh(S)
    if w[0] < -CND_TOL:
        return ESS_CERTIFIED

    zero_weight = [j for j in face if p[j] <= TIE_TOL]

    def feasible(y: np.ndarray) -> bool:
        if np.max(np.abs(y)) <= 1e-14:
            return False
        return all(y[j] >= -TIE_TOL for j in zero_weight)

    for i in range(w.size):
        if w[i] <= CND_TOL:
            continue
        y = Q @ V[:, i]
        if feasible(y) or feasible(-y):
            return ESS_REFUTED

    # random directions inside the face cone (fixed stream: classification is
    # a pure function of its inputs)
    rng = np.random.default_rng(0)
    qs = rng.dirichlet(np.ones(face.size), size=cone_samples)
    Y = np.zeros((cone_samples, n))
    Y[:, face] = qs
    Y -= p[None, :]
    quad = np.einsum("ij,jk,ik->i", Y, Abar, Y)
    norms = (Y * Y).sum(axis=1)
    mask = norms > 1e-20
    if np.any(quad[mask] > CND_TOL * norms[mask]):
        return ESS_REFUTED

    return UNDETERMINED
