"""Closed-form Fock amplitudes of the swapping chain.

Stations are indexed the way the closed form consumes them: entries
``0 .. N-1`` are the first-level stations (each fed by two sources), numbered
from B's end towards A's end, and entries ``N .. 2N-2`` are the connecting
stations, entry ``N + n - 1`` sitting between first-level stations ``n`` and
``n + 1``. At a station, ``i``/``l`` count horizontal photons at the left and
right output ports, ``j``/``k`` vertical photons at left and right. At the
ends, A sees ``i'`` (H) and ``j'`` (V), B sees ``k'`` (V) and ``l'`` (H).

Inside the amplitude the sums over ``mu, lambda`` (and ``nu, kappa``) only
enter through ``mu + lambda``, the number of station photons whose partners
travel towards A. Grouping them gives one signed sum per station
(:func:`_split_sum`), and the Kronecker deltas then fix every chain index once
the first station's split is chosen, so the evaluation is a short sum over
that split and over the H/V division at the ends.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator

import numpy as np

# beyond this the float exponentials of log-factorials lose meaning
MAX_CUTOFF = 40

_LOG2 = math.log(2.0)


@lru_cache(maxsize=None)
def _lfact(n: int) -> float:
    return math.lgamma(n + 1)


def _check_cutoff(n_max: int) -> None:
    if n_max < 0:
        raise ValueError(f"cutoff must be >= 0, got {n_max}")
    if n_max > MAX_CUTOFF:
        raise OverflowError(f"cutoff {n_max} exceeds the supported range (<= {MAX_CUTOFF})")


@dataclass(frozen=True)
class AnalyzerAngles:
    """Polarizer-rotator angles at A (``alpha_t``) and B (``delta_t``), radians."""

    alpha_t: float = 0.0
    delta_t: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha_t", math.fmod(self.alpha_t, 2 * math.pi))
        object.__setattr__(self, "delta_t", math.fmod(self.delta_t, 2 * math.pi))

    @property
    def is_zero(self) -> bool:
        return self.alpha_t == 0.0 and self.delta_t == 0.0


@dataclass(frozen=True)
class PhotonPattern:
    """Ideal photon counts at every detector of the chain.

    ``i, j, k, l`` hold one entry per station (length ``2N - 1``); ``ends`` is
    ``(i', j', k', l')``.
    """

    i: tuple[int, ...]
    j: tuple[int, ...]
    k: tuple[int, ...]
    l: tuple[int, ...]
    ends: tuple[int, int, int, int] = (0, 0, 0, 0)
    stations: int = field(init=False)

    def __post_init__(self) -> None:
        for name in ("i", "j", "k", "l"):
            object.__setattr__(self, name, tuple(int(x) for x in getattr(self, name)))
        object.__setattr__(self, "ends", tuple(int(x) for x in self.ends))
        n_sites = len(self.i)
        if n_sites % 2 == 0 or not (len(self.j) == len(self.k) == len(self.l) == n_sites):
            raise ValueError("station strings must share an odd length 2N - 1")
        if len(self.ends) != 4:
            raise ValueError("ends must hold four counts (i', j', k', l')")
        if min(self.flat()) < 0:
            raise ValueError("photon counts must be non-negative")
        object.__setattr__(self, "stations", (n_sites + 1) // 2)

    @classmethod
    def from_flat(cls, counts, stations: int) -> PhotonPattern:
        """Inverse of :meth:`flat`: station quadruples ``(i, j, k, l)`` then the ends."""
        s = 2 * stations - 1
        c = [int(x) for x in counts]
        if len(c) != 4 * s + 4:
            raise ValueError(f"expected {4 * s + 4} counts for N={stations}, got {len(c)}")
        quads = [c[4 * q:4 * q + 4] for q in range(s)]
        return cls(
            i=tuple(q[0] for q in quads),
            j=tuple(q[1] for q in quads),
            k=tuple(q[2] for q in quads),
            l=tuple(q[3] for q in quads),
            ends=tuple(c[4 * s:]),
        )

    def flat(self) -> tuple[int, ...]:
        quads = (x for st in zip(self.i, self.j, self.k, self.l) for x in st)
        return tuple(quads) + tuple(self.ends)

    @property
    def pairs(self) -> int:
        """Photon pairs emitted: one photon of every pair lands on a first-level station."""
        n = self.stations
        return sum(self.i[:n]) + sum(self.j[:n]) + sum(self.k[:n]) + sum(self.l[:n])


@lru_cache(maxsize=None)
def _omega_h(h: int, i_n: int, l_n: int) -> int:
    total = 0
    rest = i_n + l_n - h
    if rest < 0:
        return 0
    for g in range(h + 1):
        if 0 <= i_n - g <= rest:
            total += math.comb(h, g) * math.comb(rest, i_n - g) * (-1) ** (h - g)
    return total


def omega(mu: int, lam: int, i_n: int, l_n: int) -> int:
    """Signed interference sum of a connecting station.

    Only ``mu + lam`` matters; binomials with out-of-range lower index vanish.

    >>> omega(0, 0, 2, 1)
    3
    >>> omega(1, 0, 1, 1)
    0
    """
    if min(mu, lam, i_n, l_n) < 0:
        raise ValueError("omega arguments must be non-negative")
    return _omega_h(mu + lam, i_n, l_n)


@lru_cache(maxsize=None)
def _split_sum(i: int, l: int, h: int) -> int:
    """Sum over mu + lam = h of (-1)**mu C(i, mu) C(l, lam)."""
    total = 0
    for mu in range(max(0, h - l), min(i, h) + 1):
        total += (-1) ** mu * math.comb(i, mu) * math.comb(l, h - mu)
    return total


def _end_factor(h: int, v: int, out_h: int, out_v: int, angle: float) -> complex:
    """End-station factor for ``h`` H and ``v`` V photons rotated to ``(out_h, out_v)``.

    The n_a sum of the closed form carries ``tan(angle/2)`` against inverse
    cosines, a removable singularity at ``angle = pi``. This is the same sum
    with non-negative trigonometric powers.
    """
    if h + v != out_h + out_v:
        return 0.0
    c = math.cos(angle / 2.0)
    s = 1j * math.sin(angle / 2.0)
    total = 0.0
    for n_a in range(max(0, out_v - h), min(out_v, v) + 1):
        total += (
            math.comb(h, out_v - n_a)
            * math.comb(v, n_a)
            * c ** (h - out_v + 2 * n_a)
            * s ** (out_v + v - 2 * n_a)
        )
    return total * math.exp(0.5 * (_lfact(out_h) + _lfact(out_v)))


def _chain(x: tuple[int, ...], y: tuple[int, ...], n: int, h1: int):
    """Signed integer weight of one polarization sector given the first split.

    Returns ``(weight, h_N, g_1)``: the photons handed to A's end and to B's
    end, or ``None`` if a delta constraint cannot be met.
    """
    if not 0 <= h1 <= x[0] + y[0]:
        return None
    weight = _split_sum(x[0], y[0], h1)
    h = h1
    for m in range(1, n):
        c = n + m - 1
        h_next = h + x[m] + y[m] - (x[c] + y[c])
        if not 0 <= h_next <= x[m] + y[m]:
            return None
        weight *= _omega_h(h, x[c], y[c]) * _split_sum(x[m], y[m], h_next)
        if weight == 0:
            return 0, h_next, x[0] + y[0] - h1
        h = h_next
    return weight, h, x[0] + y[0] - h1


def _log_station_norm(x: tuple[int, ...], y: tuple[int, ...], n: int) -> float:
    """Log of the per-station normalisations of one polarization sector."""
    out = 0.0
    for s, (a, b) in enumerate(zip(x, y)):
        sign = -1.0 if s < n else 1.0
        out += sign * 0.5 * (_lfact(a) + _lfact(b)) - 0.5 * (a + b) * _LOG2
    return out


def _log_pair_factor(chi: float, pairs: int, n: int) -> float:
    """log of tanh(chi)**pairs / cosh(chi)**(4N); -inf for a dead source with pairs."""
    if pairs == 0:
        return -4 * n * math.log(math.cosh(chi))
    if chi == 0.0:
        return -math.inf
    return pairs * math.log(math.tanh(chi)) - 4 * n * math.log(math.cosh(chi))


def _combinatorial_part(p: PhotonPattern, angles: AnalyzerAngles) -> complex:
    """Amplitude without the ``tanh**pairs / cosh**(4N)`` source factor."""
    n = p.stations
    ip, jp, kp, lp = p.ends
    if ip + jp + kp + lp != 2 * p.pairs - sum(p.flat()[:-4]):
        return 0.0
    total = 0.0
    for h1 in range(p.i[0] + p.l[0] + 1):
        hc = _chain(p.i, p.l, n, h1)
        if hc is None or hc[0] == 0:
            continue
        wh, h_a, h_b = hc
        for v1 in range(p.j[0] + p.k[0] + 1):
            vc = _chain(p.j, p.k, n, v1)
            if vc is None or vc[0] == 0:
                continue
            wv, v_a, v_b = vc
            if h_a + v_a != ip + jp or h_b + v_b != kp + lp:
                continue
            total += (
                wh
                * wv
                * _end_factor(h_a, v_a, ip, jp, angles.alpha_t)
                * _end_factor(h_b, v_b, lp, kp, angles.delta_t)
            )
    if total == 0:
        return 0.0
    lognorm = _log_station_norm(p.i, p.l, n) + _log_station_norm(p.j, p.k, n)
    return total * math.exp(lognorm)


def amplitude(pattern: PhotonPattern, angles: AnalyzerAngles, chi: float) -> complex:
    """Probability amplitude that ideal detectors register ``pattern``.

    The source phase ``1j ** pattern.pairs`` is left out. It is fixed by the
    pattern, so every probability is unaffected.
    """
    if not 0.0 <= chi < 1.0:
        raise ValueError(f"chi must lie in [0, 1), got {chi}")
    _check_cutoff(max(pattern.flat()))
    comb_part = _combinatorial_part(pattern, angles)
    if comb_part == 0:
        return 0.0
    log_src = _log_pair_factor(chi, pattern.pairs, pattern.stations)
    if log_src == -math.inf:
        return 0.0
    return comb_part * math.exp(log_src)


def thermal_tail(chi: float, n_max: int) -> float:
    """Geometric tail ``(tanh^2 chi)^(n_max + 1)`` of one PDC mode beyond the cutoff."""
    return math.tanh(chi) ** (2 * (n_max + 1))


# ---------------------------------------------------------------- enumeration


def _sector_chains(n: int, n_max: int):
    """All station strings of one polarization sector and their end hand-offs.

    Yields ``(x, y, h1, h_N, g_1)`` in lexicographic order of ``(x, y, h1)``.
    The chain is grown station by station in closed-form order, so only
    strings satisfying the delta constraints are ever built.
    """
    s = 2 * n - 1
    pairs = [(a, b) for a in range(n_max + 1) for b in range(n_max + 1)]
    found = []

    def grow(m: int, h: int, first: list, conn: list, h1: int):
        # first-level station m (0-based) has been placed with handoff h
        if m == n - 1:
            x = tuple(q[0] for q in first) + tuple(q[0] for q in conn)
            y = tuple(q[1] for q in first) + tuple(q[1] for q in conn)
            found.append((x, y, h1, h, first[0][0] + first[0][1] - h1))
            return
        for xc, yc in pairs:
            g = xc + yc - h
            if g < 0:
                continue
            for xf, yf in pairs:
                h_next = xf + yf - g
                if h_next < 0:
                    continue
                grow(m + 1, h_next, first + [(xf, yf)], conn + [(xc, yc)], h1)

    for x0, y0 in pairs:
        for h1 in range(x0 + y0 + 1):
            grow(0, h1, [(x0, y0)], [], h1)
    assert all(len(f[0]) == s for f in found)
    found.sort(key=lambda f: (f[0], f[1], f[2]))
    return found


def _sector_handoffs(n: int, n_max: int) -> dict:
    """Map station strings ``(x, y)`` to the set of ``(to_A, to_B)`` hand-offs."""
    out: dict = {}
    for x, y, _h1, h_a, h_b in _sector_chains(n, n_max):
        out.setdefault((x, y), set()).add((h_a, h_b))
    return out


def enumerate_patterns(stations: int, n_max: int) -> Iterator[PhotonPattern]:
    """Patterns with every entry <= ``n_max`` that satisfy the closed form's deltas.

    Deterministic lexicographic order of :meth:`PhotonPattern.flat`.
    """
    if stations < 1:
        raise ValueError("stations must be >= 1")
    _check_cutoff(n_max)
    n = stations
    s = 2 * n - 1
    sectors = _sector_handoffs(n, n_max)
    keys = sorted(sectors)
    flats = set()
    for (xi, yl), (xj, yk) in itertools.product(keys, keys):
        totals = {
            (ha + va, hb + vb) for ha, hb in sectors[(xi, yl)] for va, vb in sectors[(xj, yk)]
        }
        station = tuple(v for q in range(s) for v in (xi[q], xj[q], yk[q], yl[q]))
        for to_a, to_b in totals:
            for ip in range(max(0, to_a - n_max), min(n_max, to_a) + 1):
                for kp in range(max(0, to_b - n_max), min(n_max, to_b) + 1):
                    flats.add(station + (ip, to_a - ip, kp, to_b - kp))
    for f in sorted(flats):
        yield PhotonPattern.from_flat(f, n)


@dataclass(frozen=True)
class PatternTable:
    """Vectorised pattern data: counts, pair numbers and chi-free weights.

    ``weight(chi)`` gives ``|amplitude|**2`` for every row.
    """

    stations: int
    counts: np.ndarray  # (P, 4(2N-1) + 4), flat pattern order
    pairs: np.ndarray  # (P,)
    coef2: np.ndarray  # (P,) |amplitude|^2 with the source factor removed

    def weight(self, chi: float) -> np.ndarray:
        if chi == 0.0:
            return np.where(self.pairs == 0, self.coef2, 0.0)
        t2 = math.tanh(chi) ** 2
        return self.coef2 * t2 ** self.pairs / math.cosh(chi) ** (8 * self.stations)


@lru_cache(maxsize=32)
def pattern_table(stations: int, n_max: int, angles: AnalyzerAngles = AnalyzerAngles()) -> PatternTable:
    """Every enumerated pattern with non-vanishing amplitude, for arbitrary angles."""
    rows, pairs, coef2 = [], [], []
    for p in enumerate_patterns(stations, n_max):
        c = _combinatorial_part(p, angles)
        w = abs(c) ** 2
        if w == 0.0:
            continue
        rows.append(p.flat())
        pairs.append(p.pairs)
        coef2.append(w)
    width = 4 * (2 * stations - 1) + 4
    return PatternTable(
        stations=stations,
        counts=np.asarray(rows, dtype=np.int64).reshape(-1, width),
        pairs=np.asarray(pairs, dtype=np.int64),
        coef2=np.asarray(coef2, dtype=float),
    )


@dataclass(frozen=True)
class SectorTable:
    """One polarization sector at zero analyzer angles.

    With both rotators at zero the amplitude factorises into an H part
    (counts ``i``, ``l``, ``i'``, ``l'``) and an identically structured V part
    (``j``, ``k``, ``j'``, ``k'``); this table serves both. ``left``/``right``
    are the port counts per station, ``to_a``/``to_b`` the end counts.
    """

    stations: int
    left: np.ndarray  # (P, 2N-1)
    right: np.ndarray  # (P, 2N-1)
    to_a: np.ndarray  # (P,)
    to_b: np.ndarray  # (P,)
    pairs: np.ndarray  # (P,)
    coef2: np.ndarray  # (P,)

    def weight(self, chi: float) -> np.ndarray:
        """Sector probability of each row: ``coef2 * tanh^(2 pairs) / cosh^(4N)``."""
        if chi == 0.0:
            return np.where(self.pairs == 0, self.coef2, 0.0)
        t2 = math.tanh(chi) ** 2
        return self.coef2 * t2 ** self.pairs / math.cosh(chi) ** (4 * self.stations)


@lru_cache(maxsize=16)
def sector_table(stations: int, n_max: int) -> SectorTable:
    """Sector rows with non-vanishing weight and end counts within the cutoff."""
    n = stations
    left, right, to_a, to_b, pairs, coef2 = [], [], [], [], [], []
    for x, y, h1, h_a, h_b in _sector_chains(n, n_max):
        if h_a > n_max or h_b > n_max:
            continue
        w, _, _ = _chain(x, y, n, h1)
        if w == 0:
            continue
        # log |sector amplitude| without the source factor; ends contribute sqrt(h!)
        log_c = (
            math.log(abs(w))
            + _log_station_norm(x, y, n)
            + 0.5 * (_lfact(h_a) + _lfact(h_b))
        )
        left.append(x)
        right.append(y)
        to_a.append(h_a)
        to_b.append(h_b)
        pairs.append(sum(x[:n]) + sum(y[:n]))
        coef2.append(math.exp(2.0 * log_c))
    s = 2 * n - 1
    return SectorTable(
        stations=n,
        left=np.asarray(left, dtype=np.int64).reshape(-1, s),
        right=np.asarray(right, dtype=np.int64).reshape(-1, s),
        to_a=np.asarray(to_a, dtype=np.int64),
        to_b=np.asarray(to_b, dtype=np.int64),
        pairs=np.asarray(pairs, dtype=np.int64),
        coef2=np.asarray(coef2, dtype=float),
    )
