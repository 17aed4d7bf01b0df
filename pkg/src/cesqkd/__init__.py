"""Secret-key rates for BBM92 over concatenated entanglement swapping with PDC sources."""

from cesqkd.core import (
    DetectorModel,
    ResourceParams,
    Topology,
    dark_for_eta,
    effective_efficiency,
    prob_click,
    prob_no_click,
)
from cesqkd.amplitude import AnalyzerAngles, PhotonPattern, amplitude, enumerate_patterns, omega
from cesqkd.coincidence import ClickOutcome, VisibilityResult, coincidence_prob, qber, visibility
from cesqkd.rates import (
    RateBreakdown,
    ideal_rate,
    qber_cutoff,
    secret_key_rate,
    shannon_entropy,
    shor_preskill,
    sifted_rate,
    tgw_bound,
)
from cesqkd.optimizer import (
    OptimizerConfig,
    OptimumRecord,
    find_lmax,
    maximize_rate,
    scan_qber_vs_chi,
    scan_rate_vs_distance,
)
from cesqkd.oracle import TruncatedState, build_pdc_state, compare_closed_form, evolve_and_measure

__version__ = "0.1.0"

__all__ = [
    "AnalyzerAngles",
    "ClickOutcome",
    "DetectorModel",
    "OptimizerConfig",
    "OptimumRecord",
    "PhotonPattern",
    "RateBreakdown",
    "ResourceParams",
    "Topology",
    "TruncatedState",
    "VisibilityResult",
    "amplitude",
    "build_pdc_state",
    "coincidence_prob",
    "compare_closed_form",
    "dark_for_eta",
    "effective_efficiency",
    "enumerate_patterns",
    "evolve_and_measure",
    "find_lmax",
    "ideal_rate",
    "maximize_rate",
    "omega",
    "prob_click",
    "prob_no_click",
    "qber",
    "qber_cutoff",
    "scan_qber_vs_chi",
    "scan_rate_vs_distance",
    "secret_key_rate",
    "shannon_entropy",
    "shor_preskill",
    "sifted_rate",
    "tgw_bound",
    "visibility",
]
