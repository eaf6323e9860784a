"""Riemann sums of two-parameter germs over regular partitions.

The objects here mirror the constructive side of stochastic sewing: regular
partitions, the coarsening map ``rho`` that at least multiplies the mean mesh
by 3/2, the exact telescoping identity relating ``A^pi - A^{rho(pi)}`` to
``delta A`` over comparable triples, and dyadic Riemann sums whose limit is
read off by extrapolation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import NoConvergence
from .fit import RateEstimate, loglog_fit
from .rng import as_generator, parallel_map, tree_sum

MAX_DYADIC_LEVEL = 24
CHUNK = 1 << 18
_REL_TOL = 1e-12


class MeshStats(NamedTuple):
    mean_mesh: float
    max_mesh: float
    min_mesh: float
    is_regular: bool


@dataclass(frozen=True, eq=False)
class Partition:
    points: np.ndarray

    def __post_init__(self):
        p = np.array(self.points, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("a partition needs at least two points")
        if np.any(np.diff(p) <= 0):
            raise ValueError("partition points must be strictly increasing")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @classmethod
    def dyadic(cls, level: int, S: float = 0.0, T: float = 1.0) -> "Partition":
        return cls(S + (T - S) * np.arange(2**level + 1) / 2**level)

    @property
    def n(self) -> int:
        return self.points.size - 1

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.points)

    def __len__(self):
        return self.points.size


@dataclass(frozen=True)
class PairSetSpec:
    S: float
    T: float
    M: float = 0.0

    def __post_init__(self):
        if not self.S < self.T:
            raise ValueError(f"need S < T, got {self.S}, {self.T}")
        if self.M < 0:
            raise ValueError(f"M must be non-negative, got {self.M}")


@dataclass(frozen=True, eq=False)
class Germ:
    """A family ``A_{s,t}``.

    ``evaluator(s, t)`` is vectorised: equal-length 1-d arrays in, an array of
    shape ``(m,)`` or ``(m, d)`` out. ``replicates`` optionally lists the same
    germ over independent random contexts (used for moment estimates), and
    ``conditional_delta(s, u, t, r)`` returns one sample per replicate of
    ``E^r delta A_{s,u,t}``, shape ``(R, d)``.
    """

    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = "germ"
    eps1: Optional[float] = None
    eps2: Optional[float] = None
    replicates: tuple = ()
    conditional_delta: Optional[Callable[[float, float, float, float], np.ndarray]] = None

    def __call__(self, s, t) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.asarray(self.evaluator(s, t), dtype=float)
        return out.reshape(s.size, -1)


@dataclass
class SewResult:
    germ_name: str
    S: float
    T: float
    meshes: np.ndarray
    sums: np.ndarray
    limit: np.ndarray
    rate: Optional[RateEstimate]
    error_bound: float
    extrapolated: bool
    meta: dict = field(default_factory=dict)

    @property
    def levels(self) -> list[tuple[float, np.ndarray]]:
        return list(zip(self.meshes.tolist(), self.sums))

    def to_json(self) -> str:
        payload = {
            "germ_name": self.germ_name,
            "levels": [{"mesh": float(m), "sum": s.tolist()} for m, s in zip(self.meshes, self.sums)],
            "limit": self.limit.tolist(),
            "rate": None if self.rate is None else {"slope": self.rate.slope, "stderr": self.rate.stderr},
        }
        return json.dumps(payload, sort_keys=True, allow_nan=False) + "\n"


def mesh_stats(p: Partition) -> MeshStats:
    steps = p.steps
    mean = (p.points[-1] - p.points[0]) / p.n
    mx, mn = float(steps.max()), float(steps.min())
    return MeshStats(float(mean), mx, mn, bool(mn >= mx / 2 * (1 - _REL_TOL)))


def pair_in_set(s: float, t: float, spec: PairSetSpec) -> bool:
    """Membership of ``(s, t)`` in ``{S <= s < t <= T, s - M(t-s) >= S}``."""
    tol = _REL_TOL * max(1.0, abs(spec.T - spec.S))
    return bool(spec.S - tol <= s < t <= spec.T + tol and s - spec.M * (t - s) >= spec.S - tol)


def triple_in_set(s: float, u: float, t: float, spec: PairSetSpec) -> bool:
    return pair_in_set(s, t, spec) and spec.S < u < spec.T


def triple_in_bar_set(s: float, u: float, t: float, spec: PairSetSpec) -> bool:
    """Triples whose two sub-intervals are both at least a third of ``t - s``."""
    third = (t - s) / 3 * (1 - 1e-9)
    return triple_in_set(s, u, t, spec) and (u - s) >= third and (t - u) >= third


def _first_max_index(steps: np.ndarray) -> int:
    return int(np.flatnonzero(steps >= steps.max() * (1 - _REL_TOL))[0])


def _rho_parts(points: np.ndarray) -> tuple[Optional[int], np.ndarray]:
    """Split index (1-based step index, None for even n) and the padded partition."""
    n = points.size - 1
    if n % 2 == 0:
        return None, points
    i = _first_max_index(np.diff(points)) + 1
    mid = 0.5 * (points[i - 1] + points[i])
    return i, np.concatenate([points[:i], [mid], points[i:]])


def rho_refine(p: Partition) -> Partition:
    """Coarsening map: even n keeps every second point; odd n first halves the
    first longest step. Endpoints are always kept."""
    if p.n == 1:
        return p
    _, padded = _rho_parts(p.points)
    return Partition(padded[::2])


def riemann_sum(g: Germ, p: Partition, workers: int = 1) -> np.ndarray:
    pts = p.points
    if pts.size - 1 <= CHUNK:
        return g(pts[:-1], pts[1:]).sum(axis=0)
    bounds = list(range(0, pts.size - 1, CHUNK)) + [pts.size - 1]

    def part(k):
        a, b = bounds[k], bounds[k + 1]
        return g(pts[a:b], pts[a + 1 : b + 1]).sum(axis=0)

    return tree_sum(parallel_map(part, range(len(bounds) - 1), workers))


def delta_A(g: Germ, s, u, t) -> np.ndarray:
    """``A_{s,t} - A_{s,u} - A_{u,t}``; vectorised over array arguments."""
    out = g(s, t) - g(s, u) - g(u, t)
    return out[0] if np.ndim(s) == 0 else out


def telescoping_terms(p: Partition) -> tuple[Optional[tuple[float, float, float]], np.ndarray]:
    """Triples in ``A^pi - A^{rho(pi)} = delta A(first) - sum delta A(rows)``."""
    i, padded = _rho_parts(p.points)
    first = None if i is None else (p.points[i - 1], padded[i], p.points[i])
    triples = np.stack([padded[0:-2:2], padded[1:-1:2], padded[2::2]], axis=1)
    return first, triples


def telescoping_check(g: Germ, p: Partition) -> float:
    """Absolute gap between ``A^pi - A^{rho(pi)}`` computed directly and through
    the ``delta A`` expansion. Zero up to round-off by construction."""
    direct = riemann_sum(g, p) - riemann_sum(g, rho_refine(p))
    first, triples = telescoping_terms(p)
    via = -delta_A(g, triples[:, 0], triples[:, 1], triples[:, 2]).sum(axis=0)
    if first is not None:
        via = via + delta_A(g, *first)
    return float(np.max(np.abs(direct - via)))


def _convergence_trend(diffs: np.ndarray, meshes: np.ndarray, floor: float) -> Optional[RateEstimate]:
    keep = diffs > floor
    if keep.sum() < 3:
        return None
    return loglog_fit(meshes[keep], diffs[keep])


def dyadic_sew(g: Germ, S: float = 0.0, T: float = 1.0, max_level: int = 16,
               min_level: int = 1, workers: int = 1, extrapolate_r2: float = 0.99) -> SewResult:
    """Dyadic Riemann sums on levels ``min_level..max_level`` and their limit.

    When the successive differences follow a clean power law (log-log R^2 at
    least ``extrapolate_r2``), the limit is Richardson-extrapolated from the
    last two levels with the fitted rate; otherwise, as for germs built on a
    rough random path, the finest sum is reported. Raises NoConvergence when
    the successive differences show no decreasing trend.
    """
    if not 1 <= min_level < max_level <= MAX_DYADIC_LEVEL:
        raise ValueError(f"need 1 <= min_level < max_level <= {MAX_DYADIC_LEVEL}")
    levels = range(min_level, max_level + 1)
    sums = np.stack([riemann_sum(g, Partition.dyadic(n, S, T), workers) for n in levels])
    meshes = (T - S) / 2.0 ** np.arange(min_level, max_level + 1)
    diffs = np.max(np.abs(np.diff(sums, axis=0)), axis=1)
    scale = 1.0 + float(np.max(np.abs(sums)))
    floor = 1e3 * np.finfo(float).eps * scale
    trend = _convergence_trend(diffs, meshes[1:], floor)
    if trend is not None and trend.slope + 2.0 * trend.stderr <= 0:
        raise NoConvergence(
            f"successive dyadic differences of {g.name} do not decrease (slope {trend.slope:.3g})"
        )
    limit = sums[-1].copy()
    extrapolated = False
    if trend is not None and trend.r_squared >= extrapolate_r2:
        limit = sums[-1] + (sums[-1] - sums[-2]) / (2.0**trend.slope - 1.0)
        extrapolated = True
    error_bound = float(diffs[-1]) if diffs.size else 0.0
    err = np.max(np.abs(sums - limit), axis=1)
    keep = err > floor
    rate = loglog_fit(meshes[keep], err[keep]) if keep.sum() >= 3 else None
    return SewResult(g.name, S, T, meshes, sums, limit, rate, error_bound, extrapolated)


def _sample_pairs(spec: PairSetSpec, n_pairs: int, rng, min_frac: float) -> tuple[np.ndarray, np.ndarray]:
    hmax = (spec.T - spec.S) / (1.0 + spec.M)
    h = np.exp(rng.uniform(np.log(hmax * min_frac), np.log(hmax), n_pairs))
    lo = spec.S + spec.M * h
    s = lo + rng.uniform(size=n_pairs) * (spec.T - h - lo)
    return s, s + h


def _moment(samples: np.ndarray, p: float) -> float:
    mags = np.linalg.norm(np.atleast_2d(samples), axis=-1)
    return float(np.mean(mags**p) ** (1.0 / p))


def germ_rate_probe(g: Germ, spec: PairSetSpec, n_pairs: int = 32, p: float = 2.0,
                    seed=None, min_frac: float = 2.0**-8) -> tuple[RateEstimate, Optional[RateEstimate]]:
    """Empirical exponents of ``||A_{s,t}||_p`` and ``||E^{s-M(t-s)} delta A_{s,u,t}||_p``.

    Pairs are drawn inside ``[S,T]^2_M`` with log-uniform lengths and triples
    inside the comparable-triple set; moments are taken over the germ's
    replicates. The second estimate is None when the germ exposes no
    conditional expectation or when every conditional increment vanishes.
    """
    rng = as_generator(seed)
    reps: Sequence[Germ] = g.replicates or (g,)
    s, t = _sample_pairs(spec, n_pairs, rng, min_frac)
    vals = np.stack([r(s, t) for r in reps])  # (R, m, d)
    norms = np.array([_moment(vals[:, j], p) for j in range(n_pairs)])
    first = loglog_fit(t - s, norms)
    if g.conditional_delta is None:
        return first, None
    s2, t2 = _sample_pairs(spec, n_pairs, rng, min_frac)
    u2 = s2 + (t2 - s2) * rng.uniform(1 / 3, 2 / 3, n_pairs)
    cond = np.array(
        [_moment(g.conditional_delta(a, b, c, a - spec.M * (c - a)), p) for a, b, c in zip(s2, u2, t2)]
    )
    if np.all(cond == 0):
        return first, None
    keep = cond > 0
    return first, loglog_fit((t2 - s2)[keep], cond[keep])
