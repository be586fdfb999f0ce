"""Tests for frame algebras, connections, curvature, and the identity catalog."""

import json

import numpy as np
import pytest

from mcplab.errors import DomainError, ModelValidationError
from mcplab.frame_algebra import (
    build_heisenberg_algebra,
    check_main_hypotheses,
    connection_in_scaled_frame,
    curvature,
    levi_civita,
    model_from_dict,
    model_to_dict,
    rescale_vertical,
    tanaka_webster,
    verify_structure_identities,
)


def _full_stack(n, eps):
    alg, cs = build_heisenberg_algebra(n, eps)
    lc = levi_civita(alg)
    tw = tanaka_webster(alg, cs, lc)
    return alg, cs, lc, tw, curvature(alg, lc), curvature(alg, tw)


def test_build_heisenberg_structure_constants():
    alg, cs = build_heisenberg_algebra(1, 1.0)
    assert alg.dim == 3
    assert np.count_nonzero(alg.bracket) == 2
    assert alg.bracket[1, 2, 0] == 1.0
    assert alg.bracket[2, 1, 0] == -1.0
    assert np.array_equal(alg.metric, np.eye(3))
    assert cs.eta[0] == 1.0 and cs.reeb[0] == 1.0

    alg2, cs2 = build_heisenberg_algebra(1, 2.0)
    assert alg2.bracket[1, 2, 0] == 2.0
    assert cs2.eta[0] == 0.5 and cs2.reeb[0] == 2.0

    alg5, _ = build_heisenberg_algebra(2, 1.0)
    assert alg5.dim == 5
    assert np.count_nonzero(alg5.bracket) == 4
    assert alg5.bracket[1, 3, 0] == 1.0 and alg5.bracket[2, 4, 0] == 1.0


def test_build_heisenberg_rejects_bad_arguments():
    with pytest.raises(DomainError):
        build_heisenberg_algebra(0, 1.0)
    with pytest.raises(DomainError):
        build_heisenberg_algebra(1, 0.0)
    with pytest.raises(DomainError):
        build_heisenberg_algebra(1, -2.0)


def test_algebra_and_contact_validation_pass():
    for n in (1, 2, 3):
        for eps in (0.5, 1.0, 2.0):
            alg, cs = build_heisenberg_algebra(n, eps)
            assert alg.validate() == []
            assert cs.validate(alg) == []


def test_contact_validation_catches_broken_data():
    alg, cs = build_heisenberg_algebra(1, 1.0)
    bad = type(cs)(eta=2.0 * cs.eta, reeb=cs.reeb, J=cs.J, eps=cs.eps)
    assert "eta(V) != 1" in bad.validate(alg)
    bad = type(cs)(eta=cs.eta, reeb=cs.reeb, J=cs.J, eps=3.0)
    assert "|V| != eps" in bad.validate(alg)
    bad = type(cs)(eta=cs.eta, reeb=cs.reeb, J=-cs.J.T @ cs.J, eps=cs.eps)
    assert any("J^2" in v for v in bad.validate(alg))


def test_levi_civita_heisenberg_values():
    # at eps = 1: grad_X1 V = -(1/2) Y1 and grad_X1 Y1 = (1/2) V
    alg, cs = build_heisenberg_algebra(1, 1.0)
    lc = levi_civita(alg)
    v0, x1, y1 = np.eye(3)
    assert np.allclose(lc.apply(x1, cs.reeb), -0.5 * y1)
    assert np.allclose(lc.apply(x1, y1), 0.5 * cs.reeb)
    assert np.allclose(lc.apply(y1, x1), -0.5 * cs.reeb)
    assert np.allclose(lc.apply(v0, x1), -0.5 * y1)
    assert np.allclose(lc.apply(v0, cs.reeb), 0.0)
    # general eps scaling of the same entries
    alg2, cs2 = build_heisenberg_algebra(1, 2.0)
    lc2 = levi_civita(alg2)
    assert np.allclose(lc2.gamma[1, 2], np.array([1.0, 0.0, 0.0]))  # eps/2 v0
    assert np.allclose(lc2.gamma[1, 0], np.array([0.0, 0.0, -1.0]))  # -eps/2 Y1


def _random_two_step_algebra(rng, n_h, n_z):
    """Two-step nilpotent algebra: brackets of the first n_h generators
    land in the last n_z central directions; Jacobi holds automatically."""
    d = n_h + n_z
    c = np.zeros((d, d, d))
    for i in range(n_h):
        for j in range(i + 1, n_h):
            z = rng.normal(size=n_z)
            c[i, j, n_h:] = z
            c[j, i, n_h:] = -z
    a = rng.normal(size=(d, d))
    g = a @ a.T + d * np.eye(d)
    from mcplab.frame_algebra import FrameAlgebra

    return FrameAlgebra(bracket=c, metric=g)


def test_levi_civita_is_metric_and_torsion_free():
    # Koszul output is the unique metric torsion-free connection; check the
    # defining equations directly on random two-step nilpotent algebras.
    rng = np.random.default_rng(7)
    for _ in range(5):
        alg = _random_two_step_algebra(rng, 4, 2)
        assert alg.validate() == []
        lc = levi_civita(alg)
        d = alg.dim
        e = np.eye(d)
        for i in range(d):
            for j in range(d):
                tors = lc.apply(e[i], e[j]) - lc.apply(e[j], e[i])
                assert np.allclose(tors, alg.bracket_of(e[i], e[j]), atol=1e-12)
                for k in range(d):
                    # metric compatibility on constant fields:
                    # 0 = <grad_i e_j, e_k> + <e_j, grad_i e_k>
                    val = alg.inner(lc.apply(e[i], e[j]), e[k]) + alg.inner(
                        e[j], lc.apply(e[i], e[k])
                    )
                    assert abs(val) < 1e-12


def test_tanaka_webster_heisenberg_vanishes_and_matches_lc_on_reeb():
    for eps in (0.5, 1.0, 2.0):
        alg, cs = build_heisenberg_algebra(2, eps)
        lc = levi_civita(alg)
        tw = tanaka_webster(alg, cs, lc)
        assert np.max(np.abs(tw.gamma)) < 1e-14
        v0 = np.eye(5)[0]
        assert np.allclose(tw.apply(v0, v0), lc.apply(v0, v0), atol=1e-14)
        x1, y1 = np.eye(5)[1], np.eye(5)[3]
        assert np.allclose(tw.apply(x1, y1), 0.0, atol=1e-14)


def test_tanaka_webster_eps_independent_across_builds():
    # coefficients agree in the frame {V, X_i, Y_i}, reached from the
    # stored frame {V/eps, X_i, Y_i} by scaling the first vector by eps
    ref = None
    for eps in (0.5, 1.0, 2.0, 4.0):
        alg, cs = build_heisenberg_algebra(2, eps)
        tw = tanaka_webster(alg, cs, levi_civita(alg))
        scales = np.ones(5)
        scales[0] = eps
        scaled = connection_in_scaled_frame(tw, scales)
        if ref is None:
            ref = scaled
        assert np.max(np.abs(scaled - ref)) < 1e-12


def test_rescale_vertical_roundtrip():
    alg, cs = build_heisenberg_algebra(1, 1.0)
    alg2, cs2 = rescale_vertical(alg, cs, 2.0)
    assert cs2.eps == 2.0
    assert alg2.validate() == [] and cs2.validate(alg2) == []
    assert abs(alg2.inner(cs2.reeb, cs2.reeb) - 4.0) < 1e-14
    alg3, _ = rescale_vertical(alg2, cs2, 1.0)
    assert np.allclose(alg3.metric, alg.metric)
    with pytest.raises(DomainError):
        rescale_vertical(alg, cs, 0.0)


def test_curvature_abelian_vanishes():
    from mcplab.frame_algebra import FrameAlgebra

    alg = FrameAlgebra(bracket=np.zeros((3, 3, 3)), metric=np.eye(3))
    curv = curvature(alg, levi_civita(alg))
    assert np.max(np.abs(curv.riem)) == 0.0
    assert np.max(np.abs(curv.ricci)) == 0.0


def test_curvature_heisenberg_values():
    for eps in (1.0, 2.0):
        alg, cs = build_heisenberg_algebra(1, eps)
        lc = levi_civita(alg)
        curv = curvature(alg, lc)
        v0, x1, y1 = np.eye(3)
        # vertical-horizontal plane
        assert curv.sectional_like(v0, x1, x1, v0) == pytest.approx(eps**2 / 4)
        # horizontal plane
        assert curv.sectional_like(x1, y1, y1, x1) == pytest.approx(-3 * eps**2 / 4)
        # canonical connection is flat here
        tw_curv = curvature(alg, tanaka_webster(alg, cs, lc))
        assert np.max(np.abs(tw_curv.riem)) < 1e-14
        assert tw_curv.connection_kind == "tanaka-webster"
        assert curv.connection_kind == "levi-civita"


def test_ricci_values_and_blowup():
    # ric(v0, v0) = n eps^2 / 2; horizontal ricci decreases without bound in eps
    for n in (1, 2):
        for eps in (0.5, 1.0, 2.0):
            alg, _ = build_heisenberg_algebra(n, eps)
            curv = curvature(alg, levi_civita(alg))
            d = 2 * n + 1
            v0 = np.eye(d)[0]
            assert float(v0 @ curv.ricci @ v0) == pytest.approx(n * eps**2 / 2)
            # brute-force trace cross-check
            e = np.eye(d)
            for a in range(d):
                for b in range(d):
                    brute = sum(
                        curv.sectional_like(e[v], e[a], e[b], e[v]) for v in range(d)
                    )
                    assert curv.ricci[a, b] == pytest.approx(brute, abs=1e-12)
    vals = []
    for eps in (1.0, 2.0, 4.0):
        alg, _ = build_heisenberg_algebra(1, eps)
        curv = curvature(alg, levi_civita(alg))
        x1 = np.eye(3)[1]
        ric_h = float(x1 @ curv.ricci @ x1)
        assert ric_h <= -(eps**2) / 4
        vals.append(ric_h)
    assert vals[0] > vals[1] > vals[2]


def test_identity_catalog_passes_for_model_structures():
    for n in (1, 2):
        for eps in (1.0, 0.5):
            report = verify_structure_identities(*_full_stack(n, eps), tol=1e-10)
            assert report.precondition_failures == []
            failed = [r.name for r in report.failed_identities()]
            assert failed == []
            assert report.passed
            assert len(report.identities) >= 20
            worst = max(r.residual for r in report.identities)
            assert worst <= 1e-10


def test_identity_report_ricci_comparison():
    report = verify_structure_identities(*_full_stack(1, 2.0), tol=1e-10)
    cmp = report.ricci_comparison
    # printed reading: -3 eps^2 / 4; direct trace: -eps^2 / 2 (eps = 2)
    assert cmp["printed"] == pytest.approx(-3.0)
    assert cmp["traced"] == pytest.approx(-2.0)
    assert cmp["difference"] == pytest.approx(-1.0)
    assert cmp["flagged"] is True
    # the report is serializable and carries both values
    blob = json.loads(report.to_json())
    assert blob["ricci_comparison"]["printed"] == pytest.approx(-3.0)
    assert blob["passed"] is True


def test_identity_catalog_precondition_failure():
    # an abelian algebra cannot satisfy the compatibility between d eta and
    # the metric, so the catalog must refuse to grade identities
    from mcplab.frame_algebra import ContactStructure, FrameAlgebra

    alg = FrameAlgebra(bracket=np.zeros((3, 3, 3)), metric=np.eye(3))
    _, cs = build_heisenberg_algebra(1, 1.0)
    cs = ContactStructure(eta=cs.eta, reeb=cs.reeb, J=cs.J, eps=1.0)
    lc = levi_civita(alg)
    tw = tanaka_webster(alg, cs, lc)
    report = verify_structure_identities(
        alg, cs, lc, tw, curvature(alg, lc), curvature(alg, tw)
    )
    assert report.precondition_failures != []
    assert report.identities == []
    assert not report.passed


def test_identity_catalog_rejects_mismatched_shapes():
    alg, cs, lc, tw, c1, c2 = _full_stack(1, 1.0)
    _, _, _, tw5, _, _ = _full_stack(2, 1.0)
    with pytest.raises(DomainError):
        verify_structure_identities(alg, cs, lc, tw5, c1, c2)


def test_main_hypotheses_hold_for_model():
    for n in (1, 2, 3):
        alg, cs = build_heisenberg_algebra(n, 1.0)
        lc = levi_civita(alg)
        tw_curv = curvature(alg, tanaka_webster(alg, cs, lc))
        report = check_main_hypotheses(tw_curv, cs, samples=100, seed=3)
        assert report.holds
        assert abs(report.min_sectional) < 1e-12
        assert report.orthogonal_vacuous == (n == 1)
        if n == 1:
            assert report.min_orthogonal_sum == 0.0
        else:
            assert abs(report.min_orthogonal_sum) < 1e-12
        blob = json.loads(report.to_json())
        assert blob["holds"] is True
        assert blob["samples"] == 100


def test_main_hypotheses_sign_against_angle_grid():
    # perturb the vertical structure constant; the canonical-connection
    # curvature picks up a sign somewhere on the circle of horizontal
    # directions, and the sampled minimum must agree with a deterministic
    # angle sweep
    alg, cs = build_heisenberg_algebra(2, 1.0)
    bracket = alg.bracket.copy()
    bracket[1, 3, 0] *= 1.1
    bracket[3, 1, 0] *= 1.1
    from mcplab.frame_algebra import FrameAlgebra

    alg2 = FrameAlgebra(bracket=bracket, metric=alg.metric)
    lc = levi_civita(alg2)
    tw_curv = curvature(alg2, tanaka_webster(alg2, cs, lc))

    angles = np.linspace(0.0, 2 * np.pi, 10_000, endpoint=False)
    d = 5
    best = np.inf
    e = np.eye(d)
    for th in angles:
        v = np.cos(th) * e[1] + np.sin(th) * e[2]
        jv = cs.J @ v
        best = min(best, tw_curv.sectional_like(jv, v, v, jv))
    report = check_main_hypotheses(tw_curv, cs, samples=4000, seed=11)
    assert report.min_sectional >= best - 1e-12
    assert report.min_sectional <= best + 0.05 * abs(best) + 1e-9
    if best < -1e-9:
        assert not report.holds


def test_model_json_roundtrip_and_validation():
    alg, cs = build_heisenberg_algebra(2, 2.0)
    blob = model_to_dict(alg, cs)
    text = json.dumps(blob)
    alg2, cs2 = model_from_dict(json.loads(text))
    assert np.allclose(alg2.bracket, alg.bracket)
    assert np.allclose(alg2.metric, alg.metric)
    assert np.allclose(cs2.J, cs.J)
    assert cs2.eps == cs.eps

    bad = dict(blob)
    bad["eps"] = 3.0
    with pytest.raises(ModelValidationError) as err:
        model_from_dict(bad)
    assert any("|V|" in v for v in err.value.violations)

    with pytest.raises(ModelValidationError):
        model_from_dict({"dim": 3})

    bad = dict(blob)
    bad["bracket"] = blob["bracket"] + [[3, 1, 0, 5.0]]
    with pytest.raises(ModelValidationError) as err:
        model_from_dict(bad)
    assert any("inconsistent" in v for v in err.value.violations)

    bad = dict(blob)
    bad["bracket"] = [[0, 1, 99, 1.0]]
    with pytest.raises(ModelValidationError):
        model_from_dict(bad)
