"""Resource parameters, chain geometry and the threshold-detector model.

Every photon travels from its PDC source to the nearest detector over one
segment of length ``ell / (4 N)``, so a single :class:`DetectorModel` covers
all ``8 N`` detectors of a chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

# InGaAs efficiency/dark-count trade-off, dark = A * exp(B * eta)
DARK_A = 6.1e-7
DARK_B = 17.0

# largest eta for which A * exp(B * eta) stays a probability
ETA_DARK_LIMIT = math.log(1.0 / DARK_A) / DARK_B


@dataclass(frozen=True)
class DetectorModel:
    """Lossy threshold detector: net efficiency and dark-count probability."""

    eta_eff: float
    dark: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta_eff <= 1.0:
            raise ValueError(f"eta_eff must lie in [0, 1], got {self.eta_eff}")
        if not 0.0 <= self.dark <= 1.0:
            raise ValueError(f"dark must lie in [0, 1], got {self.dark}")


@dataclass(frozen=True)
class Topology:
    """``stations`` swapping setups spread over ``distance`` km."""

    stations: int
    distance: float = 0.0

    def __post_init__(self) -> None:
        if int(self.stations) != self.stations or self.stations < 1:
            raise ValueError(f"stations must be an integer >= 1, got {self.stations}")
        if self.distance < 0:
            raise ValueError(f"distance must be >= 0, got {self.distance}")

    @property
    def n_sites(self) -> int:
        """Number of measurement stations, ``2N - 1``."""
        return 2 * self.stations - 1

    @property
    def segment_length(self) -> float:
        """Fibre length between a source and its nearest detector."""
        return self.distance / (4 * self.stations)

    def station_positions(self) -> list[float]:
        n = self.stations
        return [z * self.distance / (2 * n) for z in range(1, 2 * n)]

    def source_positions(self) -> list[float]:
        n = self.stations
        return [(2 * z + 1) * self.distance / (4 * n) for z in range(2 * n)]


@dataclass(frozen=True)
class ResourceParams:
    """Physical resources of the link.

    Attributes:
        chi: PDC amplitude; the pair probability scales as ``chi**2``.
        eta: intrinsic detector efficiency.
        dark: dark-count probability per detector and time bin. Ignored when
            ``dark_coupled`` is set, in which case :func:`dark_for_eta` is used.
        alpha: fibre loss in dB/km.
        alpha0: distance-independent loss in dB, charged once per detector path.
        kappa: reconciliation efficiency (1 is perfect).
        dark_coupled: derive the dark-count probability from ``eta``.
    """

    chi: float
    eta: float
    dark: float = 1e-5
    alpha: float = 0.25
    alpha0: float = 4.0
    kappa: float = 1.22
    dark_coupled: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.chi < 1.0:
            raise ValueError(f"chi must lie in [0, 1), got {self.chi}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if not 0.0 <= self.dark <= 1.0:
            raise ValueError(f"dark must lie in [0, 1], got {self.dark}")
        if self.alpha < 0 or self.alpha0 < 0:
            raise ValueError("loss coefficients must be non-negative")
        if self.kappa < 1.0:
            raise ValueError(f"kappa must be >= 1, got {self.kappa}")
        if self.dark_coupled:
            dark_for_eta(self.eta)  # raises in the nonphysical regime

    @property
    def dark_probability(self) -> float:
        return dark_for_eta(self.eta) if self.dark_coupled else self.dark

    def detector(self, topology: Topology) -> DetectorModel:
        eta_eff = effective_efficiency(self.eta, topology.segment_length, self.alpha, self.alpha0)
        return DetectorModel(eta_eff=eta_eff, dark=self.dark_probability)

    def with_(self, **changes) -> ResourceParams:
        return replace(self, **changes)

    @classmethod
    def perfect(cls, chi: float, **kw) -> ResourceParams:
        """Unit-efficiency, dark-free detectors; fibre and fixed losses stay as given."""
        return cls(chi=chi, eta=1.0, dark=0.0, dark_coupled=False, **kw)


def effective_efficiency(eta: float, seg_len: float, alpha: float, alpha0: float) -> float:
    """Detector efficiency times the transmittance of one fibre segment.

    >>> effective_efficiency(1.0, 40, 0.25, 0)
    0.1
    """
    if seg_len < 0 or alpha < 0 or alpha0 < 0:
        raise ValueError("seg_len, alpha and alpha0 must be non-negative")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    return 10.0 ** (-(alpha * seg_len + alpha0) / 10.0) * eta


def dark_for_eta(eta: float) -> float:
    """Dark-count probability paired with efficiency ``eta`` for InGaAs detectors.

    Raises ValueError once the trade-off leaves [0, 1] (eta above ~0.8418).
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    dark = DARK_A * math.exp(DARK_B * eta)
    if dark > 1.0:
        raise ValueError(f"dark-count probability {dark:.3g} > 1 at eta={eta}; nonphysical regime")
    return dark


def prob_no_click(i, det: DetectorModel):
    """Probability that a detector stays silent when ``i`` photons arrive.

    Works elementwise on integer arrays.
    """
    if np.any(np.asarray(i) < 0):
        raise ValueError("photon count must be non-negative")
    return (1.0 - det.dark) * (1.0 - det.eta_eff) ** i


def prob_click(i, det: DetectorModel):
    return 1.0 - prob_no_click(i, det)
