"""Rate optimisation over source brightness and detector efficiency.

The objective is ``log R``: the rate spans tens of decades across the
parameter box, and the logarithm keeps the quasi-Newton steps well scaled.
Bounded parameters are mapped to unbounded coordinates by a logistic map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from cesqkd.coincidence import qber
from cesqkd.core import ETA_DARK_LIMIT, ResourceParams, Topology
from cesqkd.rates import qber_cutoff, secret_key_rate


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for :func:`maximize_rate`.

    ``base`` supplies everything that is not optimised. With
    ``optimize_eta=False`` the efficiency (and dark-count probability) of
    ``base`` are kept and only ``chi`` moves.
    """

    base: ResourceParams = field(
        default_factory=lambda: ResourceParams(chi=0.1, eta=0.4, dark_coupled=True)
    )
    chi_bounds: tuple[float, float] = (0.0, 0.5)
    eta_bounds: tuple[float, float] = (0.01, ETA_DARK_LIMIT)
    optimize_eta: bool = True
    n_max: int = 3
    squash: bool = False
    seeds: int = 5
    rel_step: float = 1e-4
    tol: float = 1e-4
    max_iter: int = 200

    def __post_init__(self) -> None:
        lo, hi = self.chi_bounds
        if not 0.0 <= lo < hi < 1.0:
            raise ValueError(f"chi bounds must satisfy 0 <= lo < hi < 1, got {self.chi_bounds}")
        lo, hi = self.eta_bounds
        if not 0.0 <= lo < hi <= 1.0:
            raise ValueError(f"eta bounds must satisfy 0 <= lo < hi <= 1, got {self.eta_bounds}")
        if self.base.dark_coupled and hi > ETA_DARK_LIMIT:
            raise ValueError(f"eta upper bound must stay <= {ETA_DARK_LIMIT:.4f} with coupled dark counts")
        if self.seeds < 1 or self.max_iter < 1:
            raise ValueError("seeds and max_iter must be positive")

    def with_(self, **changes) -> OptimizerConfig:
        return replace(self, **changes)


@dataclass(frozen=True)
class OptimumRecord:
    ell: float
    stations: int
    chi_opt: float
    eta_opt: float
    dark: float
    qber: float
    r_max: float
    evaluations: int
    converged: bool

    @property
    def log10_rmax(self) -> float | None:
        return math.log10(self.r_max) if self.r_max > 0 else None


@dataclass(frozen=True)
class QberScan:
    chi: np.ndarray
    qber: np.ndarray
    threshold: float
    crossing: float | None


# ------------------------------------------------------------ transforms


def _to_unbounded(x: float, lo: float, hi: float) -> float:
    u = (x - lo) / (hi - lo)
    u = min(max(u, 1e-12), 1.0 - 1e-12)
    return math.log(u / (1.0 - u))


def _to_bounded(z: float, lo: float, hi: float) -> float:
    if z >= 0:
        s = 1.0 / (1.0 + math.exp(-z))
    else:
        e = math.exp(z)
        s = e / (1.0 + e)
    return lo + (hi - lo) * s


class _Objective:
    """``log R`` in unbounded coordinates, counting calls and caching points."""

    def __init__(self, stations: int, ell: float, cfg: OptimizerConfig):
        self.topo = Topology(stations, ell)
        self.cfg = cfg
        self.calls = 0
        self._cache: dict = {}

    def params(self, z: Sequence[float]) -> ResourceParams:
        cfg = self.cfg
        chi = _to_bounded(z[0], *cfg.chi_bounds)
        if cfg.optimize_eta:
            return cfg.base.with_(chi=chi, eta=_to_bounded(z[1], *cfg.eta_bounds))
        return cfg.base.with_(chi=chi)

    def point(self, chi: float, eta: float) -> np.ndarray:
        z = [_to_unbounded(chi, *self.cfg.chi_bounds)]
        if self.cfg.optimize_eta:
            z.append(_to_unbounded(eta, *self.cfg.eta_bounds))
        return np.array(z)

    def evaluate(self, z: np.ndarray):
        key = tuple(float(v) for v in z)
        if key not in self._cache:
            self.calls += 1
            p = self.params(z)
            rb = secret_key_rate(p, self.topo, n_max=self.cfg.n_max, squash=self.cfg.squash)
            val = math.log(rb.r) if rb.r > 0 else -math.inf
            self._cache[key] = (val, p, rb)
        return self._cache[key]

    def __call__(self, z: np.ndarray) -> float:
        return self.evaluate(z)[0]


# ------------------------------------------------------------ quasi-Newton


def _gradient(f: Callable, z: np.ndarray, rel_step: float) -> np.ndarray | None:
    g = np.zeros_like(z)
    for d in range(z.size):
        h = rel_step * max(abs(z[d]), 1.0)
        zp, zm = z.copy(), z.copy()
        zp[d] += h
        zm[d] -= h
        fp, fm = f(zp), f(zm)
        if not (math.isfinite(fp) and math.isfinite(fm)):
            return None
        g[d] = (fp - fm) / (2 * h)
    return g


def bfgs_maximize(
    f: Callable,
    z0: np.ndarray,
    rel_step: float = 1e-4,
    tol: float = 1e-4,
    max_iter: int = 200,
) -> tuple[np.ndarray, float, bool]:
    """Maximise ``f`` from ``z0`` with BFGS and a backtracking line search.

    Stops when an iteration improves ``f`` by less than ``tol`` relative (or
    absolute for ``|f| < 1``), or after ``max_iter`` iterations. Returns
    ``(z, f(z), converged)``.
    """
    z = np.asarray(z0, dtype=float).copy()
    fz = f(z)
    if not math.isfinite(fz):
        return z, fz, False
    n = z.size
    hinv = np.eye(n)
    g = _gradient(f, z, rel_step)
    if g is None:
        return z, fz, False
    for _ in range(max_iter):
        if not np.any(g):
            return z, fz, True
        step = hinv @ g
        if step @ g <= 0:  # lost ascent direction; restart from steepest ascent
            hinv = np.eye(n)
            step = g.copy()
        t = 1.0
        while True:
            z_new = z + t * step
            f_new = f(z_new)
            if math.isfinite(f_new) and f_new >= fz + 1e-4 * t * (g @ step):
                break
            t *= 0.5
            if t < 1e-10:
                return z, fz, True
        g_new = _gradient(f, z_new, rel_step)
        improvement = f_new - fz
        s, y = z_new - z, (g_new - g) if g_new is not None else None
        z, fz = z_new, f_new
        if improvement < tol * max(abs(fz), 1.0):
            return z, fz, True
        if g_new is None:
            return z, fz, False
        # curvature of -f must be positive for the update
        sy = -(s @ y)
        if sy > 1e-12:
            rho = 1.0 / sy
            eye = np.eye(n)
            hinv = (eye - rho * np.outer(s, -y)) @ hinv @ (eye - rho * np.outer(-y, s)) + rho * np.outer(s, s)
        g = g_new
    return z, fz, False


# ------------------------------------------------------------ public API


def _seed_values(lo: float, hi: float, count: int) -> list[float]:
    return [lo + (hi - lo) * (k + 0.5) / count for k in range(count)]


def _seeds(obj: _Objective, cfg: OptimizerConfig, extra: Sequence[tuple[float, float]]):
    chis = _seed_values(*cfg.chi_bounds, cfg.seeds)
    etas = _seed_values(*cfg.eta_bounds, cfg.seeds) if cfg.optimize_eta else [cfg.base.eta]
    grid = [(c, e) for e in etas for c in chis]
    feasible = [obj.point(c, e) for c, e in grid if math.isfinite(obj(obj.point(c, e)))]
    if not feasible:
        # The coarse grid misses the feasible band. Descend the QBER from the
        # best grid points: its minimum is feasible whenever anything is.
        def neg_q(z):
            q = obj.evaluate(z)[2].q
            return -q if math.isfinite(q) else -math.inf

        ranked = sorted(grid, key=lambda ce: -neg_q(obj.point(*ce)))
        for c, e in ranked[:3]:
            z, _, _ = bfgs_maximize(neg_q, obj.point(c, e), cfg.rel_step, 1e-10, cfg.max_iter)
            if math.isfinite(obj(z)):
                feasible.append(z)
    for c, e in extra:
        z = obj.point(c, e)
        if math.isfinite(obj(z)):
            feasible.append(z)
    return feasible


def maximize_rate(
    stations: int,
    ell: float,
    cfg: OptimizerConfig = OptimizerConfig(),
    warm_start: Sequence[tuple[float, float]] = (),
) -> OptimumRecord:
    """Largest secret-key rate over ``chi`` (and ``eta``) at distance ``ell``.

    Every feasible seed is ascended; the best end point wins. When nothing is
    feasible the record has ``r_max = 0`` and ``converged = False``.
    """
    if ell < 0:
        raise ValueError("ell must be >= 0")
    obj = _Objective(stations, ell, cfg)
    best = None
    for z0 in _seeds(obj, cfg, warm_start):
        z, fz, ok = bfgs_maximize(obj, z0, cfg.rel_step, cfg.tol, cfg.max_iter)
        if best is None or fz > best[1]:
            best = (z, fz, ok)
    if best is None or not math.isfinite(best[1]):
        p = cfg.base
        return OptimumRecord(
            ell=ell, stations=stations, chi_opt=p.chi, eta_opt=p.eta,
            dark=p.dark_probability, qber=math.nan, r_max=0.0,
            evaluations=obj.calls, converged=False,
        )
    _, p, rb = obj.evaluate(best[0])
    return OptimumRecord(
        ell=ell, stations=stations, chi_opt=p.chi, eta_opt=p.eta,
        dark=p.dark_probability, qber=rb.q, r_max=rb.r,
        evaluations=obj.calls, converged=best[2],
    )


def scan_qber_vs_chi(
    stations: int,
    chis: Sequence[float],
    params: ResourceParams,
    ell: float = 0.0,
    threshold: float | None = None,
    n_max: int = 3,
    squash: bool = False,
) -> QberScan:
    """QBER along an ascending ``chi`` grid and the first upward threshold crossing.

    The crossing is interpolated linearly between the bracketing grid points.
    ``threshold`` defaults to the Shor-Preskill cutoff for ``params.kappa``.
    """
    chis = np.asarray(chis, dtype=float)
    if np.any(np.diff(chis) <= 0):
        raise ValueError("chi grid must be strictly ascending")
    thr = qber_cutoff(params.kappa) if threshold is None else threshold
    topo = Topology(stations, ell)
    qs = np.array([qber(params.with_(chi=float(c)), topo, n_max=n_max, squash=squash) for c in chis])
    crossing = None
    for k in range(len(chis) - 1):
        if qs[k] <= thr < qs[k + 1]:
            frac = (thr - qs[k]) / (qs[k + 1] - qs[k])
            crossing = float(chis[k] + frac * (chis[k + 1] - chis[k]))
            break
    return QberScan(chi=chis, qber=qs, threshold=thr, crossing=crossing)


def scan_rate_vs_distance(
    stations: int,
    ells: Sequence[float],
    cfg: OptimizerConfig = OptimizerConfig(),
) -> list[OptimumRecord]:
    """Optimum at each distance, warm-started from the previous optimum."""
    ells = list(ells)
    if any(b <= a for a, b in zip(ells, ells[1:])):
        raise ValueError("distance grid must be strictly ascending")
    out: list[OptimumRecord] = []
    warm: list[tuple[float, float]] = []
    for ell in ells:
        rec = maximize_rate(stations, ell, cfg, warm_start=warm)
        out.append(rec)
        warm = [(rec.chi_opt, rec.eta_opt)] if rec.r_max > 0 else []
    return out


def find_lmax(
    stations: int,
    cfg: OptimizerConfig = OptimizerConfig(),
    bracket: tuple[float, float] = (0.0, 1000.0),
    resolution: float = 10.0,
) -> float:
    """Cutoff distance beyond which the optimised rate vanishes, by bisection.

    The bracket is halved until it is at most ``resolution`` km wide and its
    midpoint is returned, so the estimate lies within ``resolution / 2`` of
    the boundary.
    """
    lo, hi = bracket
    if not 0 <= lo < hi:
        raise ValueError("bracket must satisfy 0 <= lo < hi")
    if maximize_rate(stations, lo, cfg).r_max <= 0:
        raise ValueError(f"no positive rate at the lower end ({lo} km); bracket does not straddle")
    if maximize_rate(stations, hi, cfg).r_max > 0:
        raise ValueError(f"rate still positive at the upper end ({hi} km); bracket does not straddle")
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if maximize_rate(stations, mid, cfg).r_max > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
