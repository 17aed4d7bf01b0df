import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cesqkd.amplitude import AnalyzerAngles, PhotonPattern
from cesqkd.coincidence import (
    ClickOutcome,
    VisibilityResult,
    click_likelihood,
    coincidence_prob,
    joint_probabilities,
    qber,
    visibility,
)
from cesqkd.core import DetectorModel, ResourceParams, Topology
from cesqkd.oracle import (
    build_pdc_state,
    evolve_and_measure,
    oracle_coincidence_prob,
    table_visibility,
)

ONE = Topology(1, 0.0)
FIG2 = ResourceParams(chi=0.1, eta=0.4, dark=1e-5)
# end bits are (A_H, A_V, B_V, B_H)
A10_B01 = (1, 0, 1, 0)
A01_B10 = (0, 1, 0, 1)
A10_B10 = (1, 0, 0, 1)
A01_B01 = (0, 1, 1, 0)


class TestClickOutcome:
    def test_strings(self):
        o = ClickOutcome.from_strings(["1010", "0101", "1001"], "1001")
        assert o.stations == 2
        assert o.q == (1, 0, 1) and o.t == (0, 1, 1)
        assert o.flat() == tuple(int(c) for c in "101001011001" + "1001")

    def test_selection_rules(self):
        assert ClickOutcome.from_strings(["1010"], "0000").postselected
        assert ClickOutcome.from_strings(["0101"], "0000").postselected
        assert not ClickOutcome.from_strings(["1001"], "0000").postselected
        assert ClickOutcome.from_strings(["1001"], "0000").recorded
        assert not ClickOutcome.from_strings(["1100"], "0000").recorded

    def test_rejects_bad_bits(self):
        with pytest.raises(ValueError):
            ClickOutcome((2,), (0,), (0,), (0,))
        with pytest.raises(ValueError):
            ClickOutcome.from_flat((0,) * 9, 1)


class TestClickLikelihood:
    def test_silence(self):
        p = PhotonPattern.from_flat((0,) * 8, 1)
        assert click_likelihood(ClickOutcome.from_flat((0,) * 8, 1), p, DetectorModel(0.3, 0.0)) == 1.0

    def test_click_without_cause(self):
        p = PhotonPattern.from_flat((0,) * 8, 1)
        for bits in itertools.product((0, 1), repeat=8):
            if any(bits):
                assert click_likelihood(ClickOutcome.from_flat(bits, 1), p, DetectorModel(0.3, 0.0)) == 0.0

    def test_single_photon(self):
        p = PhotonPattern.from_flat((0, 0, 1, 0, 0, 0, 0, 0), 1)
        o = ClickOutcome.from_flat((0, 0, 1, 0, 0, 0, 0, 0), 1)
        assert click_likelihood(o, p, DetectorModel(0.5, 0.0)) == 0.5

    @given(st.lists(st.integers(0, 3), min_size=8, max_size=8), st.floats(0, 1), st.floats(0, 0.2))
    def test_sums_to_one(self, counts, eta, dark):
        p = PhotonPattern.from_flat(counts, 1)
        det = DetectorModel(eta, dark)
        total = sum(click_likelihood(ClickOutcome.from_flat(b, 1), p, det) for b in itertools.product((0, 1), repeat=8))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_per_detector_models(self):
        p = PhotonPattern.from_flat((1,) * 8, 1)
        o = ClickOutcome.from_flat((1,) * 8, 1)
        dets = [DetectorModel(0.1 * (k + 1), 0.0) for k in range(8)]
        assert click_likelihood(o, p, dets) == pytest.approx(math.prod(0.1 * (k + 1) for k in range(8)))
        with pytest.raises(ValueError):
            click_likelihood(o, p, dets[:3])


class TestCoincidence:
    def test_dead_source_and_detectors(self):
        p = ResourceParams(chi=0.0, eta=0.4, dark=0.0)
        ends = list(itertools.product((0, 1), repeat=4))
        joint, marginal = joint_probabilities(ends, (1, 0, 1, 0), p, ONE)
        assert marginal == 0.0 and not np.any(joint)
        with pytest.raises(ZeroDivisionError):
            coincidence_prob(A10_B01, (1, 0, 1, 0), p, ONE)

    def test_ideal_swapping_limit(self):
        p = ResourceParams.perfect(1e-3, alpha0=0.0)
        anti = [coincidence_prob(e, (1, 0, 1, 0), p, ONE) for e in (A10_B01, A01_B10)]
        corr = [coincidence_prob(e, (1, 0, 1, 0), p, ONE) for e in (A10_B10, A01_B01)]
        assert sum(corr) < 1e-12
        assert anti[0] == pytest.approx(anti[1], rel=1e-9)
        # the other half of the heralds come from double pairs at one source
        assert sum(anti) == pytest.approx(0.5, rel=1e-5)

    def test_example_against_oracle(self):
        ang = AnalyzerAngles()
        for n_max in (2, 3):
            ours = coincidence_prob(A10_B01, (1, 0, 1, 0), FIG2, ONE, ang, n_max)
            ref = oracle_coincidence_prob(A10_B01, (1, 0, 1, 0), FIG2, ang, n_max)
            assert ours == pytest.approx(ref, rel=1e-8)

    @pytest.mark.parametrize("angles", [(math.pi / 4, math.pi / 4), (math.pi / 2, 0.3)])
    def test_rotated_against_oracle(self, angles):
        ang = AnalyzerAngles(*angles)
        for ends in itertools.product((0, 1), repeat=4):
            ours = coincidence_prob(ends, (0, 1, 0, 1), FIG2, ONE, ang, 2)
            ref = oracle_coincidence_prob(ends, (0, 1, 0, 1), FIG2, ang, 2)
            assert ours == pytest.approx(ref, rel=1e-8)

    def test_conditional_sums_to_one(self):
        ends = list(itertools.product((0, 1), repeat=4))
        joint, marginal = joint_probabilities(ends, (1, 0, 1, 0), FIG2, ONE, n_max=3)
        assert joint.sum() / marginal == pytest.approx(1.0, rel=1e-12)
        assert np.all(joint >= 0)

    def test_station_outcome_validation(self):
        with pytest.raises(ValueError):
            coincidence_prob((1, 0), (1, 0, 1, 0), FIG2, ONE)
        with pytest.raises(ValueError):
            joint_probabilities([A10_B01], (1, 0, 1), FIG2, ONE)


class TestVisibility:
    @pytest.mark.parametrize("n,n_max", [(1, 3), (2, 3), (3, 2)])
    def test_perfect_low_brightness(self, n, n_max):
        # swapped-in double pairs leave an error of order chi**2 for N > 1
        gap = [
            1.0 - visibility(ResourceParams.perfect(c, alpha0=0.0), Topology(n, 0.0), n_max=n_max).visibility
            for c in (1e-3, 2e-3)
        ]
        assert gap[0] < 1e-4
        if n == 1:
            assert gap == [0.0, 0.0]
        else:
            assert gap[1] / gap[0] == pytest.approx(4.0, rel=1e-3)

    def test_definition(self):
        r = VisibilityResult(max_count=0.3, min_count=0.3, visibility=0.0, truncation_bound=0.0)
        assert r.qber == 0.5
        assert VisibilityResult(1.0, 0.0, 1.0, 0.0).qber == 0.0
        assert VisibilityResult(0.89, 0.11, 0.78, 0.0).qber == pytest.approx(0.11)

    def test_reference_operating_point(self):
        q = qber(FIG2.with_(chi=0.2), ONE)
        assert q == pytest.approx(0.11, rel=0.15)

    @pytest.mark.parametrize("n,n_max", [(1, 3), (2, 2)])
    def test_sector_and_pattern_routes_agree(self, n, n_max):
        topo = Topology(n, 50.0)
        for squash in (False, True):
            a = visibility(FIG2, topo, n_max, squash, method="sector")
            b = visibility(FIG2, topo, n_max, squash, method="patterns")
            assert a.max_count == pytest.approx(b.max_count, rel=1e-10)
            assert a.min_count == pytest.approx(b.min_count, rel=1e-10)

    def test_oracle_table_visibility(self):
        # the oracle keeps every source term up to the cutoff; compare at a converged setting
        det = FIG2.detector(ONE)
        for squash in (False, True):
            ref = table_visibility(evolve_and_measure(build_pdc_state(0.1, 4), AnalyzerAngles(), det), squash)
            assert visibility(FIG2, ONE, n_max=6, squash=squash).visibility == pytest.approx(ref, abs=1e-7)

    def test_squash_agrees_in_ideal_limit(self):
        p = ResourceParams.perfect(1e-3, alpha0=0.0)
        for n in (1, 2):
            a = visibility(p, Topology(n), 3, squash=False).visibility
            b = visibility(p, Topology(n), 3, squash=True).visibility
            assert a == pytest.approx(b, abs=1e-5)

    def test_truncation_bound_reported(self):
        r = visibility(FIG2.with_(chi=0.2), ONE, n_max=3)
        assert 0 < r.truncation_bound < 1e-3
        assert r.truncation_bound > visibility(FIG2.with_(chi=0.2), ONE, n_max=5).truncation_bound

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            visibility(FIG2, ONE, method="magic")

    def test_underflow_raises(self):
        with pytest.raises(ZeroDivisionError):
            visibility(ResourceParams(chi=0.0, eta=0.4, dark=0.0), ONE)

    @settings(max_examples=25)
    @given(st.integers(1, 2), st.floats(0.01, 0.3), st.floats(0.05, 1.0), st.floats(0, 1e-3), st.floats(0, 300), st.booleans())
    def test_ranges(self, n, chi, eta, dark, ell, squash):
        r = visibility(ResourceParams(chi=chi, eta=eta, dark=dark), Topology(n, ell), n_max=2, squash=squash)
        assert r.max_count >= 0 and r.min_count >= 0
        assert r.max_count + r.min_count <= 1.0
        assert -1.0 <= r.visibility <= 1.0


class TestMonotonicity:
    @pytest.mark.parametrize("n", [1, 2])
    def test_qber_rises_with_brightness(self, n):
        chis = np.linspace(0.01, 0.3, 30)
        qs = [qber(FIG2.with_(chi=float(c)), Topology(n), n_max=3) for c in chis]
        assert all(b >= a - 1e-12 for a, b in zip(qs, qs[1:]))

    @pytest.mark.parametrize("n", [1, 2])
    def test_qber_rises_with_distance(self, n):
        ells = np.linspace(0, 300, 16)
        qs = [qber(FIG2.with_(chi=0.05), Topology(n, float(e)), n_max=3) for e in ells]
        assert all(b >= a - 1e-12 for a, b in zip(qs, qs[1:]))
