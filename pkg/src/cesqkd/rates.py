"""Closed-form key rates and bounds.

All rates are per source pulse; multiply by the repetition rate for bits/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from cesqkd.coincidence import visibility
from cesqkd.core import ResourceParams, Topology


@dataclass(frozen=True)
class RateBreakdown:
    r_sif: float
    r_sp: float
    r: float
    q: float
    feasible: bool
    truncation_bound: float = 0.0

    def bits_per_second(self, rep_rate_hz: float = 1e8) -> float:
        return self.r * rep_rate_hz


def shannon_entropy(q: float) -> float:
    """Binary entropy in bits, with ``0 log 0 = 0``."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    if q == 0.0 or q == 1.0:
        return 0.0
    return -q * math.log2(q) - (1.0 - q) * math.log2(1.0 - q)


def shor_preskill(q: float, kappa: float = 1.0) -> float:
    """Secret fraction ``1 - kappa H2(q) - H2(q)``; negative above the cutoff."""
    if kappa < 1.0:
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    if not 0.0 <= q <= 0.5:
        raise ValueError(f"q must lie in [0, 0.5], got {q}")
    h = shannon_entropy(q)
    return 1.0 - kappa * h - h


def qber_cutoff(kappa: float = 1.0, tol: float = 1e-6) -> float:
    """QBER at which :func:`shor_preskill` reaches zero, by bisection on (0, 0.5)."""
    if kappa < 1.0:
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    lo, hi = 0.0, 0.5
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if shor_preskill(mid, kappa) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sifted_rate(chi: float, eta: float, stations: int, ell: float, alpha: float) -> float:
    """Sifted-key rate per pulse.

    Product of pair emission at all ``2N`` sources, transmission of ``4N``
    photons over ``ell / (4N)`` each, ``2N - 1`` Bell measurements succeeding
    with ``eta**2 / 2`` and detection at both ends, times one half for sifting.
    """
    n = stations
    emission = (chi**2) ** (2 * n)
    transmission = 10.0 ** ((-alpha * ell / (40.0 * n)) * 4 * n)
    bsm = (eta**2 / 2.0) ** (2 * n - 1)
    return 0.5 * emission * transmission * bsm * eta**2


def secret_key_rate(
    params: ResourceParams,
    topo: Topology,
    n_max: int = 3,
    squash: bool = False,
) -> RateBreakdown:
    """Secret-key rate ``R = R_sif * R_SP``, clipped at zero when infeasible."""
    vis = visibility(params, topo, n_max=n_max, squash=squash)
    q = vis.qber
    r_sif = sifted_rate(params.chi, params.eta, topo.stations, topo.distance, params.alpha)
    r_sp = shor_preskill(min(max(q, 0.0), 0.5), params.kappa)
    feasible = r_sp > 0.0
    return RateBreakdown(
        r_sif=r_sif,
        r_sp=r_sp,
        r=r_sif * r_sp if feasible else 0.0,
        q=q,
        feasible=feasible,
        truncation_bound=vis.truncation_bound,
    )


def ideal_rate(stations: int, ell: float, alpha: float = 0.25) -> float:
    """Rate with single-photon sources and perfect detectors: ``2^-2N 10^(-alpha ell/10)``."""
    return 2.0 ** (-2 * stations) * 10.0 ** (-alpha * ell / 10.0)


def tgw_bound(ell: float, alpha: float = 0.25) -> float:
    """Repeaterless upper bound ``log2((1 + t) / (1 - t))`` for transmittance ``t``."""
    if ell <= 0 or alpha <= 0:
        raise ValueError("the bound diverges at unit transmittance; need ell > 0 and alpha > 0")
    t = 10.0 ** (-alpha * ell / 10.0)
    # log1p keeps the bound positive where (1 + t) / (1 - t) rounds to 1
    return (math.log1p(t) - math.log1p(-t)) / math.log(2.0)
