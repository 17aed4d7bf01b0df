"""Brute-force Fock-space oracle for the swapping chain.

The PDC state is written out term by term over the source modes, each source
creation operator is replaced by its linear-optics image on the detector
modes, and the resulting polynomial is read off as output Fock amplitudes.
Nothing here uses the closed-form combinatorics of :mod:`cesqkd.amplitude`,
which is what makes it a useful check.

Source modes are grouped four per source, ``(left H, left V, right H,
right V)``, sources ordered from A to B. Output modes follow the flat
detector order of :class:`cesqkd.amplitude.PhotonPattern`: station
quadruples ``(H_L, V_L, V_R, H_R)`` then ``(A_H, A_V, B_V, B_H)``.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from cesqkd.amplitude import AnalyzerAngles
from cesqkd.coincidence import POSTSELECTED, ClickOutcome, joint_probabilities
from cesqkd.core import DetectorModel, ResourceParams, Topology

Poly = dict  # exponent tuple -> complex coefficient

N1_SOURCE_MODES = ("A_H", "A_V", "u_H", "u_V", "w_H", "w_V", "B_H", "B_V")
N1_OUTPUT_MODES = ("H_L", "V_L", "V_R", "H_R", "A_H", "A_V", "B_V", "B_H")


@dataclass(frozen=True)
class TruncatedState:
    """PDC state over the ``8N`` source modes, each occupation <= ``n_max``.

    ``amplitudes`` maps occupation tuples to complex amplitudes.
    """

    amplitudes: dict
    n_max: int
    stations: int = 1

    @property
    def n_modes(self) -> int:
        return 8 * self.stations

    def norm(self) -> float:
        """Total probability kept by the truncation."""
        return float(sum(abs(c) ** 2 for c in self.amplitudes.values()))

    def vacuum_amplitude(self) -> complex:
        return self.amplitudes.get((0,) * self.n_modes, 0.0)


def build_pdc_state(chi: float, n_max: int, stations: int = 1) -> TruncatedState:
    """Product of two-mode squeezed vacua, one per source and polarization.

    ``n`` pairs in one polarization carry ``(i tanh chi)^n / cosh chi``.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    if not 0.0 <= chi < 1.0:
        raise ValueError(f"chi must lie in [0, 1), got {chi}")
    if stations < 1:
        raise ValueError("stations must be >= 1")
    t = math.tanh(chi)
    one = [(1j * t) ** n / math.cosh(chi) for n in range(n_max + 1)]
    amps = {}
    for counts in itertools.product(range(n_max + 1), repeat=4 * stations):
        c = 1.0 + 0j
        for n in counts:
            c *= one[n]
        if c == 0:
            continue
        occ = []
        for s in range(2 * stations):
            h, v = counts[2 * s], counts[2 * s + 1]
            occ += [h, v, h, v]
        amps[tuple(occ)] = c
    return TruncatedState(amplitudes=amps, n_max=n_max, stations=stations)


# ------------------------------------------------------------- linear optics


def _station_slot(zeta: int, n: int) -> int:
    """Flat station index of the ``zeta``-th station counted from A (1-based)."""
    if zeta % 2:
        return n - (zeta + 1) // 2
    return 2 * n - 1 - zeta // 2


def mode_map(stations: int, angles: AnalyzerAngles) -> list[dict]:
    """Image of every source creation operator as ``{output mode: coefficient}``.

    First-level stations (odd ``zeta`` from A) take the A-side photon as
    ``(R - L)/sqrt 2`` and the B-side photon as ``(L + R)/sqrt 2``;
    connecting stations take them as ``(L + R)/sqrt 2`` and ``(L - R)/sqrt 2``.
    The end rotators mix H and V by half the analyzer angle.
    """
    n = stations
    s_out = 2 * n - 1
    a_h, a_v, b_v, b_h = 4 * s_out, 4 * s_out + 1, 4 * s_out + 2, 4 * s_out + 3
    ca, sa = math.cos(angles.alpha_t / 2), math.sin(angles.alpha_t / 2)
    cd, sd = math.cos(angles.delta_t / 2), math.sin(angles.delta_t / 2)
    r2 = 1.0 / math.sqrt(2.0)
    forms: list[dict] = []
    for sig in range(1, 2 * n + 1):
        for side in ("left", "right"):
            for pol in ("H", "V"):
                if side == "left" and sig == 1:
                    form = {a_h: ca, a_v: 1j * sa} if pol == "H" else {a_h: 1j * sa, a_v: ca}
                elif side == "right" and sig == 2 * n:
                    form = {b_h: cd, b_v: 1j * sd} if pol == "H" else {b_h: 1j * sd, b_v: cd}
                else:
                    zeta = sig - 1 if side == "left" else sig
                    st = _station_slot(zeta, n)
                    lo = 4 * st + (0 if pol == "H" else 1)
                    ro = 4 * st + (3 if pol == "H" else 2)
                    b_side = side == "left"  # this photon enters the station from B's side
                    if zeta % 2:
                        form = {lo: r2, ro: r2} if b_side else {lo: -r2, ro: r2}
                    else:
                        form = {lo: r2, ro: -r2} if b_side else {lo: r2, ro: r2}
                forms.append(form)
    return forms


def _mul(p: Poly, q: Poly, cutoff: int | None) -> Poly:
    out: Poly = defaultdict(complex)
    for k1, c1 in p.items():
        for k2, c2 in q.items():
            k = tuple(a + b for a, b in zip(k1, k2))
            if cutoff is not None and max(k) > cutoff:
                continue
            out[k] += c1 * c2
    return out


def _form_powers(form: dict, n_modes: int, top: int, cutoff: int | None) -> list[Poly]:
    """``form**n / sqrt(n!)`` for ``n = 0 .. top``."""
    lin = {}
    for m, c in form.items():
        e = [0] * n_modes
        e[m] = 1
        lin[tuple(e)] = c
    pows = [{(0,) * n_modes: 1.0 + 0j}]
    acc = pows[0]
    for n in range(1, top + 1):
        acc = _mul(acc, lin, cutoff)
        pows.append({k: c / math.sqrt(math.factorial(n)) for k, c in acc.items()})
    return pows


def evolve(state: TruncatedState, angles: AnalyzerAngles, out_cutoff: int | None = None) -> dict:
    """Output Fock amplitudes after the passive optics.

    Terms with any output occupation above ``out_cutoff`` are dropped.
    """
    n_modes = state.n_modes
    forms = mode_map(state.stations, angles)
    top = max((max(k) for k in state.amplitudes), default=0)
    powers = [_form_powers(f, n_modes, top, out_cutoff) for f in forms]
    # share prefix products across source terms
    level: dict = {(): {(0,) * n_modes: 1.0 + 0j}}
    for m in range(n_modes):
        prefixes = {k[: m + 1] for k in state.amplitudes}
        level = {pre: _mul(level[pre[:-1]], powers[m][pre[-1]], out_cutoff) for pre in prefixes}
    out: dict = defaultdict(complex)
    for occ, c in state.amplitudes.items():
        for k, v in level[occ].items():
            out[k] += c * v
    return {
        k: c * math.sqrt(math.prod(math.factorial(x) for x in k)) for k, c in out.items() if c != 0
    }


def chain_amplitudes(
    stations: int, chi: float, angles: AnalyzerAngles, n_max: int
) -> dict:
    """Output amplitudes with every detector count <= ``n_max``.

    Source occupations run up to ``2 n_max``, which covers every output
    pattern inside the cutoff, so the result is exact on that set.
    """
    return evolve(build_pdc_state(chi, 2 * n_max, stations), angles, out_cutoff=n_max)


# ------------------------------------------------------------------ loss


def apply_loss(state: TruncatedState, transmittance: float) -> list[TruncatedState]:
    """Uniform loss on every source mode, as unnormalised pure branches.

    Each branch is labelled by the photons lost from each mode; the mixture of
    branches is the lossy state.
    """
    if not 0.0 <= transmittance <= 1.0:
        raise ValueError("transmittance must lie in [0, 1]")
    eta = transmittance
    branches: dict = defaultdict(dict)
    for occ, c in state.amplitudes.items():
        for lost in itertools.product(*(range(n + 1) for n in occ)):
            kept = tuple(n - k for n, k in zip(occ, lost))
            w = 1.0
            for n, k in zip(occ, lost):
                w *= math.comb(n, k) * eta ** (n - k) * (1.0 - eta) ** k
            if w == 0.0:
                continue
            b = branches[lost]
            b[kept] = b.get(kept, 0.0) + c * math.sqrt(w)
    return [TruncatedState(a, state.n_max, state.stations) for _, a in sorted(branches.items())]


# -------------------------------------------------------------- detection


def _silent_prob(n: int, det: DetectorModel) -> float:
    # binomial loss: the detector sees k of n photons; silent only if k = 0 and no dark count
    detected_none = math.comb(n, 0) * det.eta_eff**0 * (1.0 - det.eta_eff) ** n
    return (1.0 - det.dark) * detected_none


@dataclass(frozen=True)
class OutcomeTable:
    """Click probabilities over all ``2^8`` outcomes of the one-station chain.

    ``probs`` is indexed by the eight click bits in output-mode order and sums
    to one; ``retained`` is the probability kept by the source truncation, so
    ``probs * retained`` are absolute probabilities.
    """

    probs: np.ndarray
    retained: float

    def prob(self, bits: Sequence[int]) -> float:
        return float(self.probs[tuple(int(b) for b in bits)])

    def joint(self, bits: Sequence[int]) -> float:
        return self.prob(bits) * self.retained

    def station_marginal(self, station_bits: Sequence[int]) -> float:
        return float(self.probs[tuple(int(b) for b in station_bits)].sum()) * self.retained


def _detectors(detectors, n: int) -> list[DetectorModel]:
    if isinstance(detectors, DetectorModel):
        return [detectors] * n
    detectors = list(detectors)
    if len(detectors) != n:
        raise ValueError(f"need {n} detector models, got {len(detectors)}")
    return detectors


def evolve_and_measure(
    state: TruncatedState | Iterable[TruncatedState],
    angles: AnalyzerAngles,
    detectors: DetectorModel | Sequence[DetectorModel],
) -> OutcomeTable:
    """Full click-outcome distribution of the one-station chain.

    ``state`` may be a list of branches from :func:`apply_loss`, which are
    summed incoherently.
    """
    branches = [state] if isinstance(state, TruncatedState) else list(state)
    if any(b.stations != 1 for b in branches):
        raise ValueError("evolve_and_measure supports the one-station chain only (N = 1)")
    dets = _detectors(detectors, 8)
    table = np.zeros((2,) * 8)
    for b in branches:
        table += _table_from_amplitudes(evolve(b, angles), dets)
    total = float(table.sum())
    if total == 0.0:
        raise ZeroDivisionError("state carries no probability")
    return OutcomeTable(probs=table / total, retained=total)


def table_visibility(table: OutcomeTable, squash: bool = False) -> float:
    """Visibility of post-selected end coincidences read from an outcome table."""
    sel = sum(table.probs[quad] for quad in POSTSELECTED)  # (A_H, A_V, B_V, B_H)
    prob = np.transpose(sel, (0, 1, 3, 2))  # -> (aH, aV, bH, bV)
    half = 0.5 if squash else 0.0
    as10 = np.array([[0.0, 0.0], [1.0, half]])
    as01 = np.array([[0.0, 1.0], [0.0, half]])
    anti = np.einsum("abcd,ab,cd->", prob, as10, as01) + np.einsum("abcd,ab,cd->", prob, as01, as10)
    corr = np.einsum("abcd,ab,cd->", prob, as10, as10) + np.einsum("abcd,ab,cd->", prob, as01, as01)
    return float((anti - corr) / (anti + corr))


# ------------------------------------------------------------- comparison


def _rel(a: float, b: float) -> float:
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(a), abs(b))


def compare_closed_form(
    chi_grid: Iterable[float],
    angle_grid: Iterable[float],
    n_max: int,
    params: ResourceParams | None = None,
    oracle_nmax: int | None = None,
    outcomes: str = "postselected",
) -> float:
    """Worst relative deviation between the closed form and the oracle.

    Both sides evaluate the joint probability of every end outcome with each
    station outcome, and the conditional probability given the station, on
    the one-station chain at ``ell = 0``. A scalar in ``angle_grid`` sets both
    analyzers; an ``(alpha, delta)`` pair sets them separately.

    By default the oracle keeps exactly the output patterns the closed form
    enumerates, so the two agree to rounding. With ``oracle_nmax > n_max`` the
    oracle keeps all patterns up to that cutoff and the deviation measures the
    truncation error of the closed form.
    """
    if outcomes not in ("postselected", "recorded"):
        raise ValueError("outcomes must be 'postselected' or 'recorded'")
    base = params or ResourceParams(chi=0.0, eta=0.4, dark=1e-5)
    topo = Topology(1, 0.0)
    stations = [
        q for q in itertools.product((0, 1), repeat=4)
        if (q in POSTSELECTED if outcomes == "postselected" else ClickOutcome((q[0],), (q[1],), (q[2],), (q[3],)).recorded)
    ]
    ends = list(itertools.product((0, 1), repeat=4))
    o_cut = n_max if oracle_nmax is None else oracle_nmax
    worst = 0.0
    for chi in chi_grid:
        params_chi = base.with_(chi=chi)
        det = params_chi.detector(topo)
        for ang in angle_grid:
            angles = AnalyzerAngles(*ang) if isinstance(ang, tuple) else AnalyzerAngles(ang, ang)
            state = build_pdc_state(chi, 2 * o_cut)
            out = evolve(state, angles, out_cutoff=o_cut)
            for st in stations:
                joint, marginal = joint_probabilities(ends, st, params_chi, topo, angles, n_max)
                ref_joint, ref_marg = _oracle_joint(out, det, st, ends)
                for a, b in zip(joint, ref_joint):
                    worst = max(worst, _rel(float(a), float(b)))
                if marginal > 0.0 and ref_marg > 0.0:
                    for a, b in zip(joint / marginal, ref_joint / ref_marg):
                        worst = max(worst, _rel(float(a), float(b)))
    return worst


def _table_from_amplitudes(out: dict, dets: Sequence[DetectorModel]) -> np.ndarray:
    """Absolute (unnormalised) click table from output amplitudes."""
    table = np.zeros((2,) * 8)
    if not out:
        return table
    keys = list(out)
    p = np.array([abs(out[k]) ** 2 for k in keys])
    silent = np.array([[_silent_prob(n, d) for n, d in zip(k, dets)] for k in keys])  # (P, 8)
    per_mode = np.stack([silent, 1.0 - silent], axis=-1)
    return np.einsum(
        "p,pa,pb,pc,pd,pe,pf,pg,ph->abcdefgh", p, *(per_mode[:, m, :] for m in range(8))
    )


def _oracle_joint(out: dict, det: DetectorModel, station: tuple, ends: list) -> tuple[np.ndarray, float]:
    """Joint probabilities of ``ends`` with ``station`` plus the station marginal."""
    if not out:
        return np.zeros(len(ends)), 0.0
    keys = list(out)
    p = np.array([abs(out[k]) ** 2 for k in keys])
    silent = np.array([[_silent_prob(n, det) for n in k] for k in keys])
    click = 1.0 - silent

    def like(cols: np.ndarray, bits) -> np.ndarray:
        return np.prod(np.where(np.asarray(bits, dtype=bool), click[:, cols], silent[:, cols]), axis=1)

    st_like = p * like(np.arange(4), station)
    joint = np.array([np.sum(st_like * like(np.arange(4, 8), e)) for e in ends])
    return joint, float(np.sum(st_like))


def oracle_coincidence_prob(
    end_outcome: Sequence[int],
    station_outcome: Sequence[int],
    params: ResourceParams,
    angles: AnalyzerAngles,
    n_max: int,
) -> float:
    """Conditional end-click probability of the one-station chain at ``ell = 0``.

    Uses the output patterns with every count <= ``n_max``, the same set the
    closed form sums over.
    """
    det = params.detector(Topology(1, 0.0))
    out = evolve(build_pdc_state(params.chi, 2 * n_max), angles, out_cutoff=n_max)
    joint, marginal = _oracle_joint(out, det, tuple(station_outcome), [tuple(end_outcome)])
    if marginal == 0.0:
        raise ZeroDivisionError("station outcome has zero probability")
    return float(joint[0] / marginal)
