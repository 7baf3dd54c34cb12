import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eitcnot.hamiltonian import PhysicalParams, mhz
from eitcnot.hilbert import LevelScheme, basis_state

from conftest import make_model, random_vector

DELTA = mhz(1200.0)
GAMMA_P = 1 / 0.0264
GAMMA_R = 1 / 548.0


def times_in(model, rng, k=20):
    return rng.uniform(0.0, model.table.duration, size=k)


def anti_hermitian(h):
    return (h - h.conj().T) / 2j


class TestParams:
    def test_defaults(self):
        p = PhysicalParams()
        assert p.gamma_r == pytest.approx(1 / 548)
        assert p.gamma_p == pytest.approx(1 / 0.0264)
        assert p.c3 == pytest.approx(2 * math.pi * 14250)
        assert p.c6 == pytest.approx(2 * math.pi * 2036e3)
        assert p.r_vdw == 31.0
        assert p.omega_c == pytest.approx(2.5 * p.omega_p_peak)
        assert p.t_p == pytest.approx(0.6531, abs=5e-5)

    @pytest.mark.parametrize("field", ["omega_p_peak", "delta", "c3", "c6", "min_distance"])
    def test_positive_required(self, field):
        with pytest.raises(ValueError):
            PhysicalParams(**{field: 0.0})

    def test_decay_may_vanish(self):
        p = PhysicalParams().without_decay()
        assert p.gamma_r == 0 and p.gamma_p == 0
        with pytest.raises(ValueError):
            PhysicalParams(gamma_r=-1.0)


class TestLocalTerms:
    def test_rydberg_matrix_element(self, model1):
        s = model1.scheme
        h = model1.h_control(model1.table.t_r / 2)
        i1, ir = s.composite_index("g1", "A"), s.composite_index("ryd", "A")
        assert h[ir, i1] == pytest.approx(94.62, abs=0.01)
        assert h[ir, i1] == pytest.approx(0.5 * math.pi / model1.table.t_r)

    def test_rydberg_decay(self, model1):
        s = model1.scheme
        h = model1.h_control(0.5 * model1.table.duration)
        ir = s.composite_index("ryd", "B")
        assert h[ir, ir].imag == pytest.approx(-9.124e-4, abs=1e-7)
        assert h[ir, ir].imag == pytest.approx(-GAMMA_R / 2)

    def test_no_rydberg_coupling_outside_pulses(self, model1):
        h = model1.h_control(model1.table.t_r + 0.3)
        off = h - np.diag(np.diag(h))
        assert not off.any()

    def test_intermediate_diagonal(self, model1):
        s = model1.scheme
        h = model1.h_target(0.2, 1)
        ip = s.composite_index("g0", "P")
        assert h[ip, ip] == pytest.approx(-7539.8 - 18.94j, abs=0.05)
        assert h[ip, ip] == pytest.approx(-DELTA - 0.5j * GAMMA_P)

    def test_symmetric_raman(self, model1):
        s = model1.scheme
        tab = model1.table
        t = tab.t_r + 0.3 * tab.t_p
        h = model1.h_target(t, 1)
        _, om_p, om_c, _ = model1.envelopes(t)
        ia, ib, ip, ir = (s.composite_index("g0", x) for x in "ABPR")
        assert h[ip, ia] == h[ip, ib] == h[ia, ip] == pytest.approx(om_p / 2)
        assert h[ir, ip] == pytest.approx(om_c / 2)

    def test_gap_target_term_only_detuning(self, model2):
        t = sum(model2.table.gaps()[0]) / 2
        h = model2.h_target(t, 1)
        assert not (h - np.diag(np.diag(h))).any()
        s = model2.scheme
        assert h[s.composite_index("g0", "PA"), s.composite_index("g0", "PA")] == pytest.approx(-DELTA - 0.5j * GAMMA_P)

    def test_inactive_target_has_no_couplings(self, model2):
        h = model2.h_target(0.3, 2)  # window 1 gates target 1
        assert not (h - np.diag(np.diag(h))).any()


class TestInteraction:
    def test_ct_strength(self, model1):
        assert model1.v_ct(5.0) == pytest.approx(716.3, abs=0.1)
        assert model1.v_ct(5.0) == pytest.approx(2 * math.pi * 114.0, abs=0.01)

    def test_tt_strength(self, model1):
        assert model1.v_tt(60.0) == pytest.approx(2 * math.pi * 4.364e-5, rel=1e-3)

    def test_distance_floor(self, model1):
        with pytest.raises(ValueError):
            model1.v_ct(0.4)
        with pytest.raises(ValueError):
            model1.v_tt(0.1)

    def test_interaction_diagonal_and_projected(self, model2):
        s = model2.scheme
        h = model2.h_interaction(0.3)
        assert not (h - np.diag(np.diag(h))).any()
        d = np.diag(h)
        assert d[s.composite_index("g1", "RR")] == pytest.approx(model2.v_tt(60.0))
        assert d[s.composite_index("ryd", "RA")] == pytest.approx(model2.v_ct(5.0))
        far = float(np.linalg.norm(model2.geometry.dwell_points[0] - model2.geometry.target_positions[1]))
        assert far == pytest.approx(math.hypot(60 - 5 / math.sqrt(2), 5 / math.sqrt(2)))
        assert d[s.composite_index("ryd", "AR")] == pytest.approx(model2.params.c3 / far**3)
        assert d[s.composite_index("g1", "RA")] == 0

    def test_tt_pairs_counted_once(self, model4):
        s = model4.scheme
        d = np.diag(model4.h_interaction(0.3)).real
        i = s.composite_index("g0", "RRAA")
        assert d[i] == pytest.approx(model4.v_tt(60.0), rel=1e-12)
        j = s.composite_index("g0", "RRRR")
        expected = 4 * model4.v_tt(60.0) + 2 * model4.v_tt(60 * math.sqrt(2))
        assert d[j] == pytest.approx(expected, rel=1e-12)


class TestDenseStructure:
    def test_anti_hermitian_part(self, model2, rng):
        allowed = np.array([0.0, -GAMMA_R / 2, -GAMMA_P / 2])
        for t in times_in(model2, rng, 8):
            h = model2.assemble_dense(t)
            ah = anti_hermitian(h)
            assert not (ah - np.diag(np.diag(ah))).any()
            ev = np.linalg.eigvalsh(ah)
            assert ev.max() <= 1e-15
            # sums of single-atom rates
            combos = {round(a + b + c, 9) for a in allowed for b in allowed[[0, 2]] for c in allowed[[0, 2]]}
            assert {round(x, 9) for x in ev} <= combos

    def test_hermitian_without_decay(self, rng):
        m = make_model(2, decay=False)
        for t in times_in(m, rng, 8):
            h = m.assemble_dense(t)
            assert np.array_equal(h, h.conj().T)

    def test_logical_diagonal_zero(self, model2, rng):
        idx = model2.scheme.logical_indices()
        for t in times_in(model2, rng, 8):
            h = model2.assemble_dense(t)
            assert not h[idx, idx].any()

    def test_couplings_only_on_active_target(self, model2):
        s = model2.scheme
        tab = model2.table
        t = tab.window(2)[0] + tab.t_r + 0.4 * tab.t_p
        h = model2.assemble_dense(t)
        i = s.composite_index("g0", "AA")
        coupled = {s.labels(k) for k in np.flatnonzero(h[:, i]) if k != i}
        assert coupled == {("g0", ("A", "P"))}

    def test_gap_basis_untouched(self, model4):
        t = sum(model4.table.gaps()[1]) / 2
        psi = basis_state(model4.scheme, "g0", "AAAA")
        assert not model4.apply_h(t, psi).any()

    def test_zero_state(self, model2):
        assert not model2.apply_h(0.3, np.zeros(48)).any()


class TestMatrixFree:
    def test_matches_dense_random(self, model2, rng):
        s = model2.scheme
        times = np.concatenate([times_in(model2, rng, 20), model2.table.breakpoints()])
        for t in times:
            h = model2.assemble_dense(t)
            for _ in range(5):
                v = random_vector(s.dim, rng)
                assert np.allclose(model2.apply_h(t, v), h @ v, rtol=0, atol=1e-12 * np.abs(h).max())

    def test_matches_dense_n4(self, model4, rng):
        for t in (0.005, 0.3, model4.table.window(3)[0] + 0.2, 2.0):
            h = model4.assemble_dense(t)
            v = random_vector(model4.scheme.dim, rng)
            assert np.allclose(model4.apply_h(t, v), h @ v, rtol=0, atol=1e-12 * np.abs(h).max())

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31), frac=st.floats(0.0, 1.0))
    def test_matches_dense_property(self, seed, frac):
        m = _MODEL_CACHE.setdefault("m2", make_model(2))
        rng = np.random.default_rng(seed)
        t = frac * m.table.duration
        v = random_vector(m.scheme.dim, rng)
        h = m.assemble_dense(t)
        assert np.allclose(m.apply_h(t, v), h @ v, rtol=0, atol=1e-12 * np.abs(h).max())


_MODEL_CACHE: dict = {}


def test_scheme_matches_geometry(model4):
    assert model4.scheme == LevelScheme(4)
    assert model4.windows_of_target(3) == [2]
