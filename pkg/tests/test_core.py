import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from cesqkd.core import (
    DARK_A,
    ETA_DARK_LIMIT,
    DetectorModel,
    ResourceParams,
    Topology,
    dark_for_eta,
    effective_efficiency,
    prob_click,
    prob_no_click,
)

unit = st.floats(0.0, 1.0)


class TestEffectiveEfficiency:
    def test_identity(self):
        assert effective_efficiency(1.0, 0, 0.25, 0) == 1.0

    def test_forty_km(self):
        assert effective_efficiency(1.0, 40, 0.25, 0) == pytest.approx(0.1, rel=1e-15)

    def test_fixed_loss(self):
        assert effective_efficiency(0.4, 0, 0.25, 4) == pytest.approx(0.4 * 10**-0.4, rel=1e-14)
        assert effective_efficiency(0.4, 0, 0.25, 4) == pytest.approx(0.15924, abs=5e-6)

    @given(unit, st.floats(0, 500), st.floats(0, 500), st.floats(0, 1), st.floats(0, 10))
    def test_monotone_in_length_and_alpha(self, eta, l1, l2, alpha, alpha0):
        lo, hi = sorted((l1, l2))
        assert effective_efficiency(eta, hi, alpha, alpha0) <= effective_efficiency(eta, lo, alpha, alpha0)
        assert effective_efficiency(eta, lo, alpha + 0.1, alpha0) <= effective_efficiency(eta, lo, alpha, alpha0)

    @given(unit, unit, st.floats(0, 300), st.floats(0, 1), st.floats(0, 10))
    def test_multiplicative_in_eta(self, e1, e2, seg, alpha, alpha0):
        t = effective_efficiency(1.0, seg, alpha, alpha0)
        assert effective_efficiency(e1 * e2, seg, alpha, alpha0) == pytest.approx(e1 * e2 * t, rel=1e-12, abs=1e-300)
        assert 0.0 <= effective_efficiency(e1, seg, alpha, alpha0) <= e1

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            effective_efficiency(0.5, -1, 0.25, 0)


class TestDarkForEta:
    def test_zero_efficiency(self):
        assert dark_for_eta(0.0) == DARK_A == 6.1e-7

    def test_typical(self):
        assert dark_for_eta(0.4) == pytest.approx(6.1e-7 * math.exp(6.8), rel=1e-14)
        assert dark_for_eta(0.4) == pytest.approx(5.47e-4, rel=2e-3)  # quoted to three figures

    def test_monotone_near_limit(self):
        assert dark_for_eta(0.84) < 1.0
        with pytest.raises(ValueError):
            dark_for_eta(0.85)
        assert DARK_A * math.exp(17 * 0.85) > DARK_A * math.exp(17 * 0.84)

    def test_limit_constant(self):
        assert dark_for_eta(ETA_DARK_LIMIT * (1 - 1e-12)) == pytest.approx(1.0, rel=1e-9)

    @given(st.floats(0.0, 0.84))
    def test_against_high_precision(self, eta):
        with mpmath.workdps(40):
            ref = mpmath.mpf("6.1e-7") * mpmath.exp(17 * mpmath.mpf(eta))
        assert dark_for_eta(eta) == pytest.approx(float(ref), rel=1e-12)


class TestClickModel:
    def test_no_photons_no_dark(self):
        assert prob_no_click(0, DetectorModel(0.37, 0.0)) == 1.0

    def test_perfect_detector(self):
        assert prob_no_click(1, DetectorModel(1.0, 0.0)) == 0.0
        assert prob_click(5, DetectorModel(1.0, 0.0)) == 1.0

    def test_two_photons(self):
        assert prob_no_click(2, DetectorModel(0.5, 0.01)) == pytest.approx(0.2475, rel=1e-15)

    def test_dark_only(self):
        assert prob_click(0, DetectorModel(0.5, 0.0)) == 0.0
        assert prob_click(0, DetectorModel(0.5, 0.3)) == pytest.approx(0.3, rel=1e-15)

    @given(st.integers(0, 40), unit, unit)
    def test_complementary(self, i, eta, dark):
        det = DetectorModel(eta, dark)
        assert prob_click(i, det) + prob_no_click(i, det) == pytest.approx(1.0, abs=1e-15)

    @given(st.integers(0, 30), unit, unit)
    def test_decreasing_in_photons(self, i, eta, dark):
        det = DetectorModel(eta, dark)
        assert prob_no_click(i + 1, det) <= prob_no_click(i, det)

    def test_vectorised(self):
        det = DetectorModel(0.5, 0.0)
        np.testing.assert_allclose(prob_no_click(np.arange(4), det), [1, 0.5, 0.25, 0.125])

    def test_negative_count_rejected(self):
        with pytest.raises(ValueError):
            prob_no_click(-1, DetectorModel(0.5, 0.0))


class TestTypes:
    @pytest.mark.parametrize(
        "kw",
        [
            dict(chi=1.0, eta=0.5),
            dict(chi=-0.1, eta=0.5),
            dict(chi=0.1, eta=1.5),
            dict(chi=0.1, eta=0.5, dark=2.0),
            dict(chi=0.1, eta=0.5, alpha=-1),
            dict(chi=0.1, eta=0.5, kappa=0.9),
            dict(chi=0.1, eta=0.9, dark_coupled=True),
        ],
    )
    def test_invalid_params(self, kw):
        with pytest.raises(ValueError):
            ResourceParams(**kw)

    def test_coupled_dark(self):
        p = ResourceParams(chi=0.1, eta=0.4, dark=0.5, dark_coupled=True)
        assert p.dark_probability == dark_for_eta(0.4)
        assert p.detector(Topology(1, 0)).dark == dark_for_eta(0.4)

    def test_perfect_keeps_fixed_loss(self):
        p = ResourceParams.perfect(0.2)
        assert (p.eta, p.dark, p.alpha0) == (1.0, 0.0, 4.0)

    @pytest.mark.parametrize("n", [1, 2, 3, 5])
    def test_geometry(self, n):
        topo = Topology(n, 240.0)
        assert topo.segment_length == pytest.approx(240.0 / (4 * n))
        stations = topo.station_positions()
        sources = topo.source_positions()
        assert len(stations) == topo.n_sites == 2 * n - 1
        assert stations == pytest.approx([z * 240.0 / (2 * n) for z in range(1, 2 * n)])
        # every source sits one segment from its nearest detector site
        sites = [0.0] + stations + [240.0]
        for x in sources:
            assert min(abs(x - s) for s in sites) == pytest.approx(topo.segment_length)

    def test_invalid_topology(self):
        with pytest.raises(ValueError):
            Topology(0, 1.0)
        with pytest.raises(ValueError):
            Topology(1, -1.0)

    def test_detector_model_bounds(self):
        with pytest.raises(ValueError):
            DetectorModel(1.2, 0.0)
        p = ResourceParams(chi=0.1, eta=0.6)
        det = p.detector(Topology(2, 100))
        assert 0.0 <= det.eta_eff <= p.eta
