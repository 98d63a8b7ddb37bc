import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from thermomodal.errors import GramNotSPD, UndefinedEntry
from thermomodal.model import (
    BoundaryCase,
    CouplingModel,
    GeneratorMatrix,
    Kind,
    Provenance,
    TrigTerm,
    assemble_gram,
    build_basis,
    build_generator,
    build_generator_assembled,
    build_generator_printed,
    discrepancy_report,
    dissipativity_defect,
    trig_inner,
    trig_inner_quad,
    upper_cholesky_lower,
)

C = math.sqrt(2 / math.pi)
KINDS = ["strong", "weak"]
BCS = ["DD", "DN", "ND", "NN"]
ALL_CASES = [(k, b) for k in KINDS for b in BCS]


class TestCouplingModel:
    def test_defaults(self):
        m = CouplingModel("strong")
        assert m.kind is Kind.STRONG
        assert m.gamma == 0.05

    @pytest.mark.parametrize("gamma", [-0.1, math.inf, math.nan])
    def test_rejects_bad_gamma(self, gamma):
        with pytest.raises(ValueError):
            CouplingModel("weak", gamma)

    def test_zero_gamma_allowed_for_reference_system(self):
        assert CouplingModel("weak", 0.0).gamma == 0.0

    def test_case_insensitive_bc(self):
        from thermomodal.model import as_bc

        assert as_bc("dn") is BoundaryCase.DN


class TestBasis:
    def test_strong_dd_families(self):
        b = build_basis(CouplingModel("strong"), "DD", 3)
        x = np.linspace(0, math.pi, 7)
        np.testing.assert_allclose(b.phi[1](x), C * 0.5 * np.sin(2 * x), atol=1e-15)
        np.testing.assert_allclose(b.psi[1](x), C * np.sin(2 * x), atol=1e-15)
        np.testing.assert_allclose(b.xi[1](x), C * np.sin(2 * x), atol=1e-15)

    def test_weak_dn_temperature_is_cosine(self):
        b = build_basis(CouplingModel("weak"), "DN", 2)
        assert b.xi[0].func == "cos"
        assert b.xi[0](0.3) == pytest.approx(C * math.cos(0.3))

    def test_strong_nn_neumann_displacement(self):
        b = build_basis(CouplingModel("strong"), "NN", 1)
        d = b.evaluate("phi", [0.0, math.pi], derivative=True)
        np.testing.assert_allclose(d, 0.0, atol=1e-15)

    @pytest.mark.parametrize("kind,bc", ALL_CASES)
    def test_boundary_conditions_respected(self, kind, bc):
        b = build_basis(CouplingModel(kind), bc, 5)
        ends = [0.0, math.pi]
        case = BoundaryCase(bc)
        np.testing.assert_allclose(b.evaluate("psi", ends), 0.0, atol=1e-14)
        # displacement: Dirichlet on phi or Neumann on phi'
        disp = b.evaluate("phi", ends, derivative=not case.displacement_dirichlet)
        np.testing.assert_allclose(disp, 0.0, atol=1e-14)
        temp = b.evaluate("xi", ends, derivative=not case.temperature_dirichlet)
        np.testing.assert_allclose(temp, 0.0, atol=1e-14)

    def test_rejects_zero_modes(self):
        with pytest.raises(ValueError):
            build_basis(CouplingModel("weak"), "DD", 0)


class TestTrigInner:
    @given(st.sampled_from(["sin", "cos"]), st.integers(0, 12),
           st.sampled_from(["sin", "cos"]), st.integers(0, 12))
    def test_exact_matches_quadrature(self, f1, i, f2, j):
        t1, t2 = TrigTerm(f1, 1.3, i), TrigTerm(f2, -0.7, j)
        assert trig_inner(t1, t2) == pytest.approx(trig_inner_quad(t1, t2), abs=1e-12)

    def test_sin_cos_known_value(self):
        # int_0^pi sin x cos 2x dx = -2/3
        assert trig_inner(TrigTerm("sin", 1, 1), TrigTerm("cos", 1, 2)) == pytest.approx(-2 / 3)


class TestGram:
    def test_strong_dd_identity_gram(self):
        g = assemble_gram(build_basis(CouplingModel("strong"), "DD", 2), CouplingModel("strong"), "DD")
        for M in (g.M1, g.M2, g.M3):
            np.testing.assert_allclose(M, np.eye(2), atol=1e-14)

    def test_strong_dd_coupling_entry(self):
        m = CouplingModel("strong")
        g = assemble_gram(build_basis(m, "DD", 2), m, "DD")
        assert g.Ft[0, 1] == pytest.approx(8 / (3 * math.pi), rel=1e-14)

    def test_weak_dd_coupling_identity(self):
        m = CouplingModel("weak")
        g = assemble_gram(build_basis(m, "DD", 6), m, "DD")
        np.testing.assert_allclose(g.Ft, np.eye(6), atol=1e-14)

    @pytest.mark.parametrize("kind,bc", ALL_CASES)
    def test_cholesky_reconstructs(self, kind, bc):
        m = CouplingModel(kind)
        g = assemble_gram(build_basis(m, bc, 8), m, bc)
        for M, L in ((g.M1, g.L1), (g.M2, g.L2), (g.M3, g.L3)):
            assert np.allclose(L, np.tril(L))
            assert np.linalg.norm(L.T @ L - M) <= 1e-12 * np.linalg.norm(M)
            assert np.linalg.eigvalsh(M).min() > 0

    @pytest.mark.parametrize("kind,bc", ALL_CASES)
    def test_quadrature_path_agrees(self, kind, bc):
        m = CouplingModel(kind, 0.3)
        a = build_generator_assembled(m, bc, 5).entries
        q = build_generator_assembled(m, bc, 5, quadrature=True).entries
        np.testing.assert_allclose(a, q, atol=1e-11)

    def test_reversed_cholesky_on_random_spd(self):
        rng = np.random.default_rng(3)
        B = rng.standard_normal((6, 6))
        M = B @ B.T + 6 * np.eye(6)
        L = upper_cholesky_lower(M)
        np.testing.assert_allclose(L.T @ L, M, rtol=1e-12)

    def test_rejects_indefinite(self):
        with pytest.raises(GramNotSPD):
            upper_cholesky_lower(np.array([[1.0, 2.0], [2.0, 1.0]]))


class TestPrintedGenerator:
    def test_weak_dd_printed_rows(self):
        A = build_generator_printed(CouplingModel("weak", 0.1), "DD", 2).entries
        expected = np.array([
            [0, 0, 1, 0, 0, 0],
            [0, 0, 0, 2, 0, 0],
            [-1, 0, 0, 0, -0.1, 0],
            [0, -2, 0, 0, 0, -0.1],
            [0, 0, 0.1, 0, -1, 0],
            [0, 0, 0, 0.1, 0, -4],
        ])
        np.testing.assert_allclose(A, expected, atol=1e-15)

    def test_strong_dd_coupling_entry(self):
        A = build_generator_printed(CouplingModel("strong", 1.0), "DD", 2)
        assert A.block(1, 2)[0, 1] == pytest.approx(-8 / (3 * math.pi), rel=1e-14)

    def test_strong_dd_decoupled(self):
        A = build_generator_printed(CouplingModel("strong", 0.0), "DD", 4)
        np.testing.assert_array_equal(A.block(1, 2), 0)
        np.testing.assert_array_equal(A.block(2, 1), 0)
        np.testing.assert_allclose(A.block(2, 2), -np.diag(np.arange(1, 5) ** 2.0))

    @pytest.mark.parametrize("kind,bc", [("strong", "ND"), ("strong", "NN"), ("weak", "ND"), ("weak", "NN")])
    def test_undefined_formulas_rejected(self, kind, bc):
        with pytest.raises(UndefinedEntry) as info:
            build_generator_printed(CouplingModel(kind, 0.5), bc, 4)
        assert info.value.block in ("D", "F")

    @pytest.mark.parametrize("kind,bc,n", [("strong", "DD", 4), ("weak", "DD", 4), ("strong", "DN", 8)])
    def test_consistent_cases_match_assembled(self, kind, bc, n):
        for g in (0.05, 0.5):
            m = CouplingModel(kind, g)
            P = build_generator_printed(m, bc, n).entries
            A = build_generator_assembled(m, bc, n).entries
            np.testing.assert_allclose(P, A, atol=1e-12)


class TestDiscrepancyReport:
    @pytest.mark.parametrize("kind,bc", [("strong", "DD"), ("strong", "DN"), ("weak", "DD")])
    def test_consistent_cases_empty(self, kind, bc):
        assert discrepancy_report(CouplingModel(kind, 0.5), bc) == []

    def test_strong_nd_flags_gradient_block(self):
        rep = discrepancy_report(CouplingModel("strong", 0.5), "ND")
        blocks = {(d.block, d.status) for d in rep}
        assert ("G", "mismatch") in blocks
        assert ("D", "undefined") in blocks

    def test_weak_dn_flags_coupling(self):
        rep = discrepancy_report(CouplingModel("weak", 0.5), "DN")
        assert {d.block for d in rep} == {"F"}
        assert all(d.status == "mismatch" for d in rep)

    def test_as_dict_is_serializable(self):
        import json

        rep = discrepancy_report(CouplingModel("weak", 0.5), "NN")
        json.dumps([d.as_dict() for d in rep if d.status == "mismatch"])


class TestGeneratorProperties:
    @pytest.mark.parametrize("kind,bc", ALL_CASES)
    def test_dissipative(self, kind, bc):
        A = build_generator(CouplingModel(kind, 0.7), bc, 12)
        sym = 0.5 * (A.entries + A.entries.T)
        assert np.linalg.eigvalsh(sym).max() <= 1e-12

    @pytest.mark.parametrize("kind,bc", ALL_CASES)
    def test_symmetric_part_only_in_temperature_block(self, kind, bc):
        A = build_generator(CouplingModel(kind, 0.5), bc, 4)
        sym = 0.5 * (A.entries + A.entries.T)
        sym[8:, 8:] = 0
        np.testing.assert_allclose(sym, 0, atol=1e-13)

    @pytest.mark.parametrize("bc", BCS)
    @pytest.mark.parametrize("n", [2, 8, 32])
    def test_weak_invertible(self, bc, n):
        A = build_generator(CouplingModel("weak", 0.05), bc, n).entries
        X = np.linalg.solve(A, np.eye(3 * n))
        np.testing.assert_allclose(A @ X, np.eye(3 * n), atol=1e-8)

    @pytest.mark.parametrize("kind,bc", ALL_CASES)
    def test_affine_in_gamma(self, kind, bc):
        A = lambda g: build_generator(CouplingModel(kind, g), bc, 6).entries  # noqa: E731
        np.testing.assert_allclose(A(0.6) - 2 * A(0.3) + A(0.0), 0, atol=1e-13)

    def test_read_only_entries(self):
        A = build_generator(CouplingModel("weak"), "DD", 2)
        with pytest.raises(ValueError):
            A.entries[0, 0] = 1.0

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            GeneratorMatrix(CouplingModel("weak"), BoundaryCase.DD, 2, np.zeros((5, 5)), Provenance.ASSEMBLED)


class TestSerialization:
    def test_json_round_trip(self):
        A = build_generator(CouplingModel("strong", 0.3), "NN", 3)
        B = GeneratorMatrix.from_json(A.to_json())
        assert B.model == A.model and B.bc is A.bc and B.provenance is A.provenance
        np.testing.assert_array_equal(A.entries, B.entries)

    def test_csv_lossless(self):
        A = build_generator(CouplingModel("weak", 0.05), "DN", 3)
        rows = [[float(v) for v in line.split(",")] for line in A.to_csv().splitlines()]
        np.testing.assert_array_equal(np.array(rows), A.entries)


class TestDissipativityDefect:
    def test_negative_identity(self):
        res = dissipativity_defect(-np.eye(3), trials=50)
        np.testing.assert_allclose(res.values, -1.0)
        assert res.certified == pytest.approx(-1.0)

    def test_weak_dd_equals_temperature_gradient(self):
        A = build_generator(CouplingModel("weak", 0.1), "DD", 8)
        res = dissipativity_defect(A, trials=200, seed=7)
        theta = res.samples[:, 16:]
        expected = -np.sum((theta * np.arange(1, 9)) ** 2, axis=1)
        np.testing.assert_allclose(res.values, expected, atol=1e-13)
        assert res.sampled <= 0

    def test_uncoupled_wave_block_is_skew(self):
        A = build_generator(CouplingModel("strong", 0.0), "DD", 8)
        assert dissipativity_defect(A).certified == pytest.approx(0.0, abs=1e-13)

    def test_deterministic_for_seed(self):
        A = build_generator(CouplingModel("weak", 0.1), "DN", 4)
        a = dissipativity_defect(A, trials=10, seed=42)
        b = dissipativity_defect(A, trials=10, seed=42)
        np.testing.assert_array_equal(a.values, b.values)
