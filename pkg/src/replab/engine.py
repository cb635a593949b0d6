"""Seeded numerical integration of replicator dynamics on the simplex.

The stochastic dynamics are integrated in log-ratio coordinates
``Y_j = log(x_j / x_ref)``: the simplex boundary maps to infinity, so every
state mapped back is positive and normalized by construction, and the noise in
these coordinates is additive, which gives the Euler-Maruyama step strong
first order here.  The reference coordinate defaults to the last strategy and
is re-chosen once at setup (never mid-path, to keep the noise map fixed) when
the initial weight of the last strategy is tiny.

Log-ratios are clamped at ``+-y_cap`` (default 500): a frequency below
``exp(-500)`` is physically extinct, and the clamp prevents overflow while the
``clamped`` flag records that it happened.  Recorded frequencies are floored
at 1e-300 so states stay strictly positive even when ratios span more than
the representable range; the floor is far below every tolerance used anywhere
(extinction is reported at frequency 1e-12).

Determinism contract: each path's Gaussian increments come from its own
counter-based stream (see :mod:`replab.rng`), paths are partitioned into
fixed-size chunks by sorted path index, and worker count only decides how many
chunks run concurrently.  Batch output is therefore byte-identical for any
worker count and any permutation of the requested path indices.

Hitting times are detected on the step grid while integrating (no
Brownian-bridge correction: the bias is at most one step and the acceptance
slacks absorb it); all other trajectory diagnostics use the recorded grid,
which is the step grid thinned by ``record_stride``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import games, rng
from .errors import SimulationError, ValidationError
from .games import Region

MAX_RECORD_POINTS = 100_000
STATE_FLOOR = 1e-300
_CHUNK_FLOAT_BUDGET = 6_000_000     # recorded floats per chunk
_MAX_CHUNK_PATHS = 512
_NOISE_BLOCK_FLOATS = 786_432      # increments drawn per refill


@dataclass(frozen=True)
class SdeConfig:
    """Discretization, horizon and seeding of one integration run."""

    h: float
    horizon: float
    seed: int
    y_cap: float = 500.0
    record_stride: int | None = None

    def __post_init__(self):
        if not (math.isfinite(self.h) and self.h > 0.0):
            raise ValidationError("step size must be finite and > 0")
        if not (math.isfinite(self.horizon) and self.horizon >= self.h):
            raise ValidationError("horizon must satisfy 0 < h <= horizon")
        if not self.y_cap >= 50.0:
            raise ValidationError("y_cap must be at least 50")
        rng.check_seed(self.seed)
        if self.record_stride is not None and int(self.record_stride) < 1:
            raise ValidationError("record_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        """Number of steps; the grid ends at ``n_steps * h`` (~ horizon)."""
        return max(1, int(round(self.horizon / self.h)))

    @property
    def effective_stride(self) -> int:
        if self.record_stride is not None:
            return int(self.record_stride)
        return max(1, math.ceil((self.n_steps + 1) / MAX_RECORD_POINTS))

    def record_steps(self) -> np.ndarray:
        steps = np.arange(0, self.n_steps + 1, self.effective_stride)
        if steps[-1] != self.n_steps:
            steps = np.append(steps, self.n_steps)
        return steps


@dataclass(frozen=True)
class Trajectory:
    """One recorded path: time grid, simplex states and bookkeeping."""

    times: np.ndarray           # (m,)
    states: np.ndarray          # (m, n)
    clamped: bool
    seed: int
    path_index: int = 0

    @property
    def n_strategies(self) -> int:
        return self.states.shape[1]

    def final_state(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class HittingTimeResult:
    hit: bool
    time: float


# ---------------------------------------------------------------------------
# drift and diffusion fields


def drift(A, sigma, x) -> np.ndarray:
    """Drift of the noisy dynamics at state ``x``; components sum to zero.

    ``b(x) = [diag(x) - x x^T] (A - diag(sigma^2)) x``; it vanishes at any
    vertex and at any stable mix of the effective payoff matrix.
    """
    A = games.as_payoff_matrix(A)
    s = games.as_noise_vector(sigma, A.shape[0])
    x = games.as_simplex_point(x, A.shape[0])
    m = (A @ x) - (s * s) * x
    return x * (m - float(x @ m))


def diffusion_matrix(sigma, x) -> np.ndarray:
    """Noise-to-state map ``C(x) = [diag(x) - x x^T] diag(sigma)``; columns sum to zero."""
    x = games.as_simplex_point(x)
    s = games.as_noise_vector(sigma, x.size)
    return (np.diag(x) - np.outer(x, x)) * s[None, :]


# ---------------------------------------------------------------------------
# core integrators (vectorized over a chunk of paths)


def _reference_index(x0: np.ndarray) -> int:
    return int(np.argmax(x0)) if x0[-1] < 1e-6 else x0.size - 1


def _states_from_log_ratios(Y: np.ndarray, ref: int, others: np.ndarray) -> np.ndarray:
    m = Y.shape[0]
    n = Y.shape[1] + 1
    L = np.zeros((m, n))
    L[:, others] = Y
    L -= L.max(axis=1, keepdims=True)
    np.exp(L, out=L)
    L /= L.sum(axis=1, keepdims=True)
    np.maximum(L, STATE_FLOOR, out=L)
    return L


class _NoiseBlocks:
    """Per-path Gaussian increments drawn in memory-bounded blocks."""

    def __init__(self, seed: int, paths, n: int, total_steps: int):
        self._gens = [rng.path_generator(seed, p) for p in paths]
        self._n = n
        self._left = total_steps
        self._block = max(1, _NOISE_BLOCK_FLOATS // max(1, len(self._gens) * n))
        self._buf: np.ndarray | None = None
        self._pos = 0

    def next_step(self) -> np.ndarray:
        """Increments for one step, shape (paths, n)."""
        if self._buf is None or self._pos == self._buf.shape[0]:
            take = min(self._block, self._left)
            draws = [g.standard_normal((take, self._n)) for g in self._gens]
            self._buf = np.stack(draws, axis=1)
            self._pos = 0
            self._left -= take
        out = self._buf[self._pos]
        self._pos += 1
        return out


@dataclass
class _ChunkResult:
    times: np.ndarray
    states: np.ndarray            # (paths, records, n)
    clamped: np.ndarray           # (paths,) bool
    hit_steps: dict[str, np.ndarray]
    abort_steps: np.ndarray       # (paths,) int, -1 = completed


def _simulate_chunk(A, sigma, x0, cfg: SdeConfig, paths, mode: str,
                    hit_regions: Mapping[str, Region] | None = None,
                    z0=None) -> _ChunkResult:
    A = games.as_payoff_matrix(A)
    n = A.shape[0]
    At = np.ascontiguousarray(A.T)
    m = len(paths)
    n_steps = cfg.n_steps
    rec_steps = cfg.record_steps()
    times = rec_steps * cfg.h
    states = np.empty((m, rec_steps.size, n))
    clamped = np.zeros(m, dtype=bool)
    abort_steps = np.full(m, -1, dtype=np.int64)
    regions = dict(hit_regions or {})
    hit_steps = {name: np.full(m, -1, dtype=np.int64) for name in regions}
    pending = {name: np.ones(m, dtype=bool) for name in regions}

    if mode == "sizes":
        z = np.array(z0, dtype=float).reshape(-1)
        if z.size != n or not np.all(np.isfinite(z)) or np.any(z <= 0.0):
            raise ValidationError("initial sizes must be finite and > 0")
        x_first = z / z.sum()
        Z = np.broadcast_to(x_first, (m, n)).copy()
    else:
        x_start = games.as_simplex_point(x0, n, interior=True)
        x_first = x_start
        ref = _reference_index(x_start)
        others = np.array([j for j in range(n) if j != ref])
        Y = np.broadcast_to(np.log(x_start[others] / x_start[ref]), (m, n - 1)).copy()

    if mode == "sde":
        sig = games.as_noise_vector(sigma, n)
        half_corr = 0.5 * (sig[others] ** 2 - sig[ref] ** 2)
        sig_o = sig[others]
        sig_r = sig[ref]
        noise = _NoiseBlocks(cfg.seed, paths, n, n_steps)
    elif mode == "sizes":
        sig = games.as_noise_vector(sigma, n)
        noise = _NoiseBlocks(cfg.seed, paths, n, n_steps)
    elif mode == "ode":
        noise = None
    else:  # pragma: no cover
        raise ValidationError(f"unknown mode {mode!r}")

    sqrt_h = math.sqrt(cfg.h)
    h = cfg.h
    cap = cfg.y_cap

    rec_ptr = 0
    live = ~np.zeros(m, dtype=bool)

    for k in range(n_steps + 1):
        if k == 0:
            x = np.broadcast_to(x_first, (m, n)).copy()
        elif mode == "sizes":
            x = Z
        else:
            x = _states_from_log_ratios(Y, ref, others)

        if rec_ptr < rec_steps.size and k == rec_steps[rec_ptr]:
            states[:, rec_ptr, :] = x
            dead = abort_steps >= 0
            if dead.any():
                states[dead, rec_ptr, :] = np.nan
            rec_ptr += 1

        for name, region in regions.items():
            mask = pending[name]
            if not mask.any():
                continue
            inside = region.contains(x)
            newly = mask & inside & (abort_steps < 0)
            hit_steps[name][newly] = k
            pending[name] &= ~inside

        if k == n_steps:
            break

        if mode == "ode":
            def force(Yv):
                xs = _states_from_log_ratios(Yv, ref, others)
                ax = xs @ At
                return ax[:, others] - ax[:, ref:ref + 1]

            k1 = force(Y)
            k2 = force(Y + 0.5 * h * k1)
            k3 = force(Y + 0.5 * h * k2)
            k4 = force(Y + h * k3)
            Y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        elif mode == "sde":
            xi = noise.next_step()
            ax = x @ At
            dY = (ax[:, others] - ax[:, ref:ref + 1] - half_corr) * h
            dY += sqrt_h * (sig_o * xi[:, others] - sig_r * xi[:, ref:ref + 1])
            Y += dY
            over = (np.abs(Y) > cap).any(axis=1)
            if over.any():
                clamped |= over
                np.clip(Y, -cap, cap, out=Y)
            if not np.all(np.isfinite(Y)):
                bad = ~np.isfinite(Y).all(axis=1)
                raise SimulationError(
                    f"non-finite log-ratios at step {k + 1} (t={h * (k + 1):g}) "
                    f"for paths {[paths[i] for i in np.flatnonzero(bad)[:5]]}"
                )
        else:  # sizes
            xi = noise.next_step()
            ax = Z @ At
            growth = 1.0 + h * ax + sqrt_h * sig * xi
            bad = (growth <= 0.0) | ~np.isfinite(growth)
            bad_paths = bad.any(axis=1) & live
            if bad_paths.any():
                abort_steps[bad_paths] = k + 1
                live &= ~bad_paths
                growth[bad_paths] = 1.0
            Z = Z * growth
            Z /= Z.sum(axis=1, keepdims=True)

    return _ChunkResult(times=times, states=states, clamped=clamped,
                        hit_steps=hit_steps, abort_steps=abort_steps)


# ---------------------------------------------------------------------------
# single-run interfaces


def simulate_sde(A, sigma, x0, cfg: SdeConfig, path_index: int = 0) -> Trajectory:
    """Integrate the noisy dynamics from an interior state; one seeded path."""
    res = _simulate_chunk(A, sigma, x0, cfg, [path_index], "sde")
    return Trajectory(times=res.times, states=res.states[0],
                      clamped=bool(res.clamped[0]), seed=cfg.seed, path_index=path_index)


def simulate_ode(A, x0, cfg: SdeConfig) -> Trajectory:
    """Integrate the deterministic dynamics (classic fourth-order one-step method).

    The seed and noise-related fields of ``cfg`` are ignored.
    """
    res = _simulate_chunk(A, None, x0, cfg, [0], "ode")
    return Trajectory(times=res.times, states=res.states[0],
                      clamped=bool(res.clamped[0]), seed=cfg.seed, path_index=0)


def simulate_sizes(A, sigma, z0, cfg: SdeConfig, path_index: int = 0) -> Trajectory:
    """Integrate raw subpopulation sizes and return the normalized path.

    The multiplicative Euler-Maruyama update acts on the sizes themselves
    (renormalized by their sum each step, which leaves the frequencies
    untouched and prevents overflow of the total).  Driven by the same seed
    and path index, the increments coincide with :func:`simulate_sde`'s, so
    the two normalized paths can be compared step by step; they agree up to
    discretization order, not exactly, because the schemes differ.
    """
    res = _simulate_chunk(A, sigma, None, cfg, [path_index], "sizes", z0=z0)
    if res.abort_steps[0] >= 0:
        step = int(res.abort_steps[0])
        raise SimulationError(
            f"size update left the positive cone at step {step} (t={step * cfg.h:g}); "
            "reduce the step size or the noise"
        )
    return Trajectory(times=res.times, states=res.states[0],
                      clamped=bool(res.clamped[0]), seed=cfg.seed, path_index=path_index)


def hitting_time(A, sigma, x0, cfg: SdeConfig, region: Region,
                 path_index: int = 0) -> HittingTimeResult:
    """First step-grid time at which one seeded path enters the region."""
    res = _simulate_chunk(A, sigma, x0, cfg, [path_index], "sde",
                          hit_regions={"target": region})
    step = int(res.hit_steps["target"][0])
    if step >= 0:
        return HittingTimeResult(hit=True, time=step * cfg.h)
    return HittingTimeResult(hit=False, time=cfg.n_steps * cfg.h)


# ---------------------------------------------------------------------------
# trajectory diagnostics


def occupation_fraction(traj: Trajectory, region: Region, t_start: float) -> float:
    """Fraction of recorded grid points at or after ``t_start`` lying in the region."""
    if not t_start < traj.times[-1]:
        raise ValidationError("t_start must precede the end of the trajectory")
    mask = traj.times >= t_start
    return float(np.mean(region.contains(traj.states[mask])))


def time_avg_sq_distance(traj: Trajectory, p) -> float:
    """Trapezoidal time average of the squared Euclidean distance to ``p``."""
    p = games.as_simplex_point(p, traj.n_strategies)
    f = ((traj.states - p[None, :]) ** 2).sum(axis=1)
    t = traj.times
    if t.size == 1:
        return float(f[0])
    dt = np.diff(t)
    integral = float(np.sum(0.5 * dt * (f[1:] + f[:-1])))
    return integral / float(t[-1] - t[0])


# ---------------------------------------------------------------------------
# named per-path statistics


@dataclass(frozen=True)
class Statistic:
    """A named per-path diagnostic for batch runs.

    ``kind == "trajectory"`` statistics evaluate ``fn`` on the recorded path;
    ``kind == "hitting_time"`` / ``"hit_flag"`` statistics are evaluated on
    the step grid while integrating (finer than the recorded grid).
    """

    name: str
    kind: str = "trajectory"
    fn: Callable[[Trajectory], float] | None = None
    region: Region | None = field(default=None)


def final_share(j: int) -> Statistic:
    return Statistic(name=f"final_share_{j}", fn=lambda tr: float(tr.states[-1, j]))


def max_final_share() -> Statistic:
    return Statistic(name="max_final_share", fn=lambda tr: float(tr.states[-1].max()))


def share_at(j: int, t: float) -> Statistic:
    def fn(tr: Trajectory) -> float:
        i = int(np.argmin(np.abs(tr.times - t)))
        return float(tr.states[i, j])

    return Statistic(name=f"share_{j}_at_{t:g}", fn=fn)


def window_max_share(j: int, t_start: float) -> Statistic:
    def fn(tr: Trajectory) -> float:
        mask = tr.times >= t_start
        return float(tr.states[mask, j].max())

    return Statistic(name=f"max_share_{j}_from_{t_start:g}", fn=fn)


def occupation_stat(region: Region, t_start: float) -> Statistic:
    return Statistic(
        name=f"occupation[{region.describe()}]",
        fn=lambda tr: occupation_fraction(tr, region, t_start),
    )


def time_avg_sq_distance_stat(p) -> Statistic:
    p = games.as_simplex_point(p)
    return Statistic(name="time_avg_sq_distance", fn=lambda tr: time_avg_sq_distance(tr, p))


def peak_distance_stat(p) -> Statistic:
    p = games.as_simplex_point(p)

    def fn(tr: Trajectory) -> float:
        return float(np.sqrt(((tr.states - p[None, :]) ** 2).sum(axis=1).max()))

    return Statistic(name="peak_distance", fn=fn)


def hitting_time_stat(region: Region, name: str | None = None) -> Statistic:
    return Statistic(name=name or f"hitting_time[{region.describe()}]",
                     kind="hitting_time", region=region)


def hit_flag_stat(region: Region, name: str | None = None) -> Statistic:
    return Statistic(name=name or f"hit[{region.describe()}]",
                     kind="hit_flag", region=region)


def decay_envelope_ratio_stat(k: int, rate: float, sigma_max: float) -> Statistic:
    """Late-to-early ratio of the exponential-envelope-compensated share.

    Per path, ``M(t) = x_k(t) * exp(rate * t - 3 sigma_max sqrt(t log log t))``
    (the square-root term applies only once ``log log t`` is positive); the
    statistic is ``max M over the late half / max M over the early half`` and
    values below one indicate decay faster than the envelope.
    """

    def fn(tr: Trajectory) -> float:
        t = tr.times
        envelope = rate * t
        big = t > math.e
        envelope[big] -= 3.0 * sigma_max * np.sqrt(t[big] * np.log(np.log(t[big])))
        m = tr.states[:, k] * np.exp(envelope)
        half = t[-1] / 2.0
        early = float(m[t <= half].max())
        late = float(m[t > half].max())
        return late / max(early, 1e-300)

    return Statistic(name=f"decay_envelope_ratio_{k}", fn=fn)


# ---------------------------------------------------------------------------
# batch running


@dataclass(frozen=True)
class BatchResult:
    """Per-path values of one statistic plus their mean and standard error."""

    statistic: str
    mean: float
    std_error: float
    values: np.ndarray          # per path; NaN for aborted paths
    n_paths: int
    seed: int
    aborted: int

    def to_json_dict(self) -> dict:
        per_path = [None if not math.isfinite(v) else float(v) for v in self.values]
        return {
            "statistic": self.statistic,
            "mean": self.mean,
            "std_error": self.std_error,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "per_path": per_path,
        }


def resolve_workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("REPLAB_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ValidationError(f"REPLAB_WORKERS must be an integer, got {env!r}") from exc
    return 1


def _chunk_size(cfg: SdeConfig, n: int) -> int:
    records = cfg.record_steps().size
    return max(1, min(_MAX_CHUNK_PATHS, _CHUNK_FLOAT_BUDGET // max(1, records * n)))


def batch_run_many(A, sigma, x0, cfg: SdeConfig, n_paths: int,
                   statistics: Mapping[str, Statistic],
                   *, workers: int | None = None,
                   path_indices=None) -> dict[str, BatchResult]:
    """Evaluate several per-path statistics over a batch of seeded paths.

    Path indices default to ``0..n_paths-1``; an explicit list may be given in
    any order (results are reported in that order, computed canonically, so
    permutations change nothing but the reporting order).
    """
    if path_indices is None:
        if n_paths < 1:
            raise ValidationError("need at least one path")
        path_indices = list(range(n_paths))
    else:
        path_indices = [int(i) for i in path_indices]
        if len(path_indices) != n_paths:
            raise ValidationError("n_paths must match the number of path indices")
        if len(set(path_indices)) != n_paths:
            raise ValidationError("path indices must be distinct")
    if not statistics:
        raise ValidationError("need at least one statistic")

    A = games.as_payoff_matrix(A)
    n = A.shape[0]
    order = sorted(range(n_paths), key=lambda i: path_indices[i])
    sorted_paths = [path_indices[i] for i in order]
    chunk = _chunk_size(cfg, n)
    chunks = [sorted_paths[i:i + chunk] for i in range(0, n_paths, chunk)]

    hit_regions = {name: st.region for name, st in statistics.items()
                   if st.kind in ("hitting_time", "hit_flag")}
    traj_stats = {name: st for name, st in statistics.items() if st.kind == "trajectory"}

    def run_chunk(paths):
        res = _simulate_chunk(A, sigma, x0, cfg, paths, "sde", hit_regions=hit_regions)
        out = {}
        horizon = cfg.n_steps * cfg.h
        for name, st in statistics.items():
            vals = np.empty(len(paths))
            if st.kind == "hitting_time":
                steps = res.hit_steps[name]
                vals = np.where(steps >= 0, steps * cfg.h, horizon)
            elif st.kind == "hit_flag":
                vals = (res.hit_steps[name] >= 0).astype(float)
            else:
                for i, p in enumerate(paths):
                    if res.abort_steps[i] >= 0:
                        vals[i] = np.nan
                        continue
                    tr = Trajectory(times=res.times, states=res.states[i],
                                    clamped=bool(res.clamped[i]),
                                    seed=cfg.seed, path_index=p)
                    vals[i] = float(st.fn(tr))
            aborted = res.abort_steps >= 0
            if st.kind != "trajectory" and aborted.any():
                vals = np.where(aborted, np.nan, vals)
            out[name] = vals
        return out, (res.abort_steps >= 0)

    n_workers = resolve_workers(workers)
    results = [None] * len(chunks)
    if n_workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            for i, res in enumerate(pool.map(run_chunk, chunks)):
                results[i] = res
    else:
        for i, paths in enumerate(chunks):
            results[i] = run_chunk(paths)

    sorted_values = {name: np.concatenate([r[0][name] for r in results])
                     for name in statistics}
    aborted_mask = np.concatenate([r[1] for r in results])

    inverse = np.empty(n_paths, dtype=np.int64)
    inverse[order] = np.arange(n_paths)

    out: dict[str, BatchResult] = {}
    for name in statistics:
        values = sorted_values[name][inverse]
        valid = values[np.isfinite(values)]
        mean = float(valid.mean()) if valid.size else math.nan
        if valid.size > 1:
            se = float(valid.std(ddof=1) / math.sqrt(valid.size))
        else:
            se = math.nan
        out[name] = BatchResult(
            statistic=statistics[name].name,
            mean=mean,
            std_error=se,
            values=values,
            n_paths=n_paths,
            seed=cfg.seed,
            aborted=int(aborted_mask.sum()),
        )
    return out


def batch_run(A, sigma, x0, cfg: SdeConfig, n_paths: int, statistic: Statistic,
              *, workers: int | None = None, path_indices=None) -> BatchResult:
    """Run one statistic over a batch; see :func:`batch_run_many`."""
    res = batch_run_many(A, sigma, x0, cfg, n_paths, {statistic.name: statistic},
                         workers=workers, path_indices=path_indices)
    return res[statistic.name]


# ---------------------------------------------------------------------------
# exports


def trajectory_csv_text(traj: Trajectory) -> str:
    """CSV with header ``t,x_1,...,x_n`` at full double precision."""
    n = traj.n_strategies
    lines = ["t," + ",".join(f"x_{j + 1}" for j in range(n))]
    for i in range(traj.times.size):
        row = [f"{traj.times[i]:.17g}"] + [f"{v:.17g}" for v in traj.states[i]]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
