"""Click statistics, post-selected coincidences, visibility and QBER.

Detector click probabilities are conditioned on the ideal photon pattern and
weighted by ``|amplitude|**2``. A station outcome is post-selected when it is
anti-correlated across the station: H left with V right, or V left with H
right. In detector order ``(H_L, V_L, V_R, H_R)`` these are ``1010`` and
``0101``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from cesqkd.amplitude import (
    AnalyzerAngles,
    PhotonPattern,
    pattern_table,
    sector_table,
)
from cesqkd.core import DetectorModel, ResourceParams, Topology

POSTSELECTED = ((1, 0, 1, 0), (0, 1, 0, 1))

# end strings per party, H bit first
A_10 = (1, 0)
A_01 = (0, 1)


@dataclass(frozen=True)
class ClickOutcome:
    """Click (1) / no-click (0) record of every detector.

    ``q, r, s, t`` are per-station strings for the H-left, V-left, V-right and
    H-right detectors; ``ends`` is ``(q', r', s', t')`` for A's H and V and
    B's V and H detectors.
    """

    q: tuple[int, ...]
    r: tuple[int, ...]
    s: tuple[int, ...]
    t: tuple[int, ...]
    ends: tuple[int, int, int, int] = (0, 0, 0, 0)
    stations: int = field(init=False)

    def __post_init__(self) -> None:
        for name in ("q", "r", "s", "t"):
            object.__setattr__(self, name, tuple(int(b) for b in getattr(self, name)))
        object.__setattr__(self, "ends", tuple(int(b) for b in self.ends))
        n_sites = len(self.q)
        if n_sites % 2 == 0 or not (len(self.r) == len(self.s) == len(self.t) == n_sites):
            raise ValueError("station strings must share an odd length 2N - 1")
        if any(b not in (0, 1) for b in self.flat()):
            raise ValueError("click bits must be 0 or 1")
        object.__setattr__(self, "stations", (n_sites + 1) // 2)

    @classmethod
    def from_flat(cls, bits, stations: int) -> ClickOutcome:
        s = 2 * stations - 1
        b = [int(x) for x in bits]
        if len(b) != 4 * s + 4:
            raise ValueError(f"expected {4 * s + 4} bits for N={stations}, got {len(b)}")
        quads = [b[4 * x:4 * x + 4] for x in range(s)]
        return cls(*(tuple(qd[m] for qd in quads) for m in range(4)), ends=tuple(b[4 * s:]))

    @classmethod
    def from_strings(cls, stations: Sequence[str], ends: str) -> ClickOutcome:
        """Build from per-station strings like ``"1010"`` and an end string ``"1001"``."""
        bits = [int(c) for st in stations for c in st] + [int(c) for c in ends]
        return cls.from_flat(bits, (len(stations) + 1) // 2)

    def flat(self) -> tuple[int, ...]:
        quads = (b for st in zip(self.q, self.r, self.s, self.t) for b in st)
        return tuple(quads) + tuple(self.ends)

    def station_quads(self) -> list[tuple[int, int, int, int]]:
        return list(zip(self.q, self.r, self.s, self.t))

    @property
    def recorded(self) -> bool:
        """Every station has at least one click on each side."""
        return all((q or r) and (s or t) for q, r, s, t in self.station_quads())

    @property
    def postselected(self) -> bool:
        return all(quad in POSTSELECTED for quad in self.station_quads())


@dataclass(frozen=True)
class VisibilityResult:
    max_count: float
    min_count: float
    visibility: float
    truncation_bound: float

    @property
    def qber(self) -> float:
        return (1.0 - self.visibility) / 2.0


def _no_click_table(counts: np.ndarray, det: DetectorModel) -> np.ndarray:
    return (1.0 - det.dark) * (1.0 - det.eta_eff) ** counts


def _detector_list(detectors, n_detectors: int) -> list[DetectorModel]:
    if isinstance(detectors, DetectorModel):
        return [detectors] * n_detectors
    detectors = list(detectors)
    if len(detectors) != n_detectors:
        raise ValueError(f"need {n_detectors} detector models, got {len(detectors)}")
    return detectors


def click_likelihood(
    outcome: ClickOutcome,
    pattern: PhotonPattern,
    detectors: DetectorModel | Sequence[DetectorModel],
) -> float:
    """Probability of ``outcome`` given the ideal counts ``pattern``.

    ``detectors`` is one model shared by all ``8N`` detectors or a sequence in
    flat detector order.
    """
    if outcome.stations != pattern.stations:
        raise ValueError("outcome and pattern describe different chains")
    bits, counts = outcome.flat(), pattern.flat()
    dets = _detector_list(detectors, len(bits))
    out = 1.0
    for b, n, det in zip(bits, counts, dets):
        silent = (1.0 - det.dark) * (1.0 - det.eta_eff) ** n
        out *= (1.0 - silent) if b else silent
    return out


def _station_bits(station_outcome, stations: int) -> np.ndarray:
    if isinstance(station_outcome, ClickOutcome):
        return np.asarray(station_outcome.flat()[:-4])
    bits = np.asarray([int(b) for b in station_outcome])
    if bits.size != 4 * (2 * stations - 1):
        raise ValueError("station outcome has the wrong length for this chain")
    return bits


def _likelihood_rows(counts: np.ndarray, bits: np.ndarray, det: DetectorModel) -> np.ndarray:
    silent = _no_click_table(counts, det)
    return np.prod(np.where(bits.astype(bool), 1.0 - silent, silent), axis=1)


def joint_probabilities(
    end_outcomes: Sequence[Sequence[int]],
    station_outcome,
    params: ResourceParams,
    topo: Topology,
    angles: AnalyzerAngles = AnalyzerAngles(),
    n_max: int = 3,
) -> tuple[np.ndarray, float]:
    """Joint probabilities of each end outcome with the station outcome.

    Returns ``(joint, station_marginal)`` summed over the enumerated patterns.
    """
    n = topo.stations
    table = pattern_table(n, n_max, angles)
    det = params.detector(topo)
    w = table.weight(params.chi)
    s_bits = _station_bits(station_outcome, n)
    n_st = s_bits.size
    station_like = w * _likelihood_rows(table.counts[:, :n_st], s_bits, det)
    joint = np.array(
        [
            np.sum(station_like * _likelihood_rows(table.counts[:, n_st:], np.asarray(e), det))
            for e in end_outcomes
        ]
    )
    return joint, float(np.sum(station_like))


def coincidence_prob(
    end_outcome: Sequence[int],
    station_outcome,
    params: ResourceParams,
    topo: Topology,
    angles: AnalyzerAngles = AnalyzerAngles(),
    n_max: int = 3,
) -> float:
    """Probability of the end clicks ``(q', r', s', t')`` given the station clicks.

    Joint probability of end and station clicks divided by the station-click
    probability, both summed over the truncated pattern set.
    """
    if len(end_outcome) != 4:
        raise ValueError("end outcome needs four bits (q', r', s', t')")
    joint, marginal = joint_probabilities([end_outcome], station_outcome, params, topo, angles, n_max)
    if marginal == 0.0:
        raise ZeroDivisionError(
            "station outcome has zero probability at this cutoff (impossible outcome or cutoff too small)"
        )
    return float(joint[0] / marginal)


# --------------------------------------------------------------- visibility


def _end_weights(squash: bool) -> tuple[np.ndarray, np.ndarray]:
    """Weight with which raw end bits ``[H, V]`` are reported as ``10`` and ``01``."""
    as10 = np.zeros((2, 2))
    as01 = np.zeros((2, 2))
    as10[1, 0] = 1.0
    as01[0, 1] = 1.0
    if squash:
        as10[1, 1] = as01[1, 1] = 0.5
    return as10, as01


def _max_min(prob: np.ndarray, squash: bool) -> tuple[float, float]:
    """Reduce ``prob[aH, aV, bH, bV]`` to anti-correlated and correlated masses."""
    as10, as01 = _end_weights(squash)
    anti = np.einsum("abcd,ab,cd->", prob, as10, as01) + np.einsum("abcd,ab,cd->", prob, as01, as10)
    corr = np.einsum("abcd,ab,cd->", prob, as10, as10) + np.einsum("abcd,ab,cd->", prob, as01, as01)
    return float(anti), float(corr)


def _sector_visibility(params: ResourceParams, topo: Topology, n_max: int, squash: bool):
    n = topo.stations
    table = sector_table(n, n_max)
    det = params.detector(topo)
    w = table.weight(params.chi)
    nc_l = _no_click_table(table.left, det)
    nc_r = _no_click_table(table.right, det)
    # station in H sector: choice 0 -> (L click, R silent), choice 1 -> (L silent, R click)
    choice = np.stack([(1.0 - nc_l) * nc_r, nc_l * (1.0 - nc_r)])  # (2, P, S)
    g = np.ones((1, w.size))
    for st in range(table.left.shape[1]):
        g = (g[:, None, :] * choice[None, :, :, st]).reshape(-1, w.size)
    nc_a = _no_click_table(table.to_a, det)
    nc_b = _no_click_table(table.to_b, det)
    end_a = np.stack([nc_a, 1.0 - nc_a])
    end_b = np.stack([nc_b, 1.0 - nc_b])
    f = np.einsum("sp,ap,bp,p->sab", g, end_a, end_b, w)  # (2^S, aH, bH)
    # the V sector sees each station choice with left/right swapped
    f_v = f[::-1]
    prob = np.einsum("sac,sbd->abcd", f, f_v)  # (aH, aV, bH, bV)
    missing = max(0.0, 1.0 - float(np.sum(w)) ** 2)
    return _max_min(prob, squash), missing


def _pattern_visibility(params: ResourceParams, topo: Topology, n_max: int, squash: bool):
    n = topo.stations
    table = pattern_table(n, n_max, AnalyzerAngles())
    det = params.detector(topo)
    w = table.weight(params.chi)
    n_st = 4 * topo.n_sites
    nc = _no_click_table(table.counts, det)
    station = np.ones(w.size)
    for st in range(topo.n_sites):
        block = nc[:, 4 * st:4 * st + 4]
        station *= sum(
            np.prod(np.where(np.asarray(quad, dtype=bool), 1.0 - block, block), axis=1)
            for quad in POSTSELECTED
        )
    ends = nc[:, n_st:]  # A_H, A_V, B_V, B_H
    prob = np.zeros((2, 2, 2, 2))
    for a_h, a_v, b_h, b_v in itertools.product((0, 1), repeat=4):
        bits = np.array([a_h, a_v, b_v, b_h], dtype=bool)
        like = np.prod(np.where(bits, 1.0 - ends, ends), axis=1)
        prob[a_h, a_v, b_h, b_v] = np.sum(w * station * like)
    missing = max(0.0, 1.0 - float(np.sum(w)))
    return _max_min(prob, squash), missing


def visibility(
    params: ResourceParams,
    topo: Topology,
    n_max: int = 3,
    squash: bool = False,
    method: str = "sector",
) -> VisibilityResult:
    """Visibility of post-selected end coincidences with both analyzers at zero.

    ``max`` collects end strings ``A=10, B=01`` and ``A=01, B=10``; ``min``
    collects ``10/10`` and ``01/01``. Double clicks at an end are discarded,
    or split evenly between ``10`` and ``01`` when ``squash`` is set.

    ``method="sector"`` uses the H/V factorisation of the zero-angle
    amplitude; ``method="patterns"`` sums the full pattern table and is kept
    as a cross-check.
    """
    if method == "sector":
        (mx, mn), missing = _sector_visibility(params, topo, n_max, squash)
    elif method == "patterns":
        (mx, mn), missing = _pattern_visibility(params, topo, n_max, squash)
    else:
        raise ValueError(f"unknown method {method!r}")
    if mx + mn <= 0.0:
        raise ZeroDivisionError("no post-selected coincidences: max + min underflows to 0")
    return VisibilityResult(
        max_count=mx,
        min_count=mn,
        visibility=(mx - mn) / (mx + mn),
        truncation_bound=missing,
    )


def qber(params: ResourceParams, topo: Topology, n_max: int = 3, squash: bool = False) -> float:
    """Quantum bit error rate ``(1 - V) / 2``."""
    return visibility(params, topo, n_max=n_max, squash=squash).qber
