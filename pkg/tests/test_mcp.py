"""Tests for the contraction density, MCP scans, and set-level estimates."""

import json

import numpy as np
import pytest

from mcplab.errors import DomainError, OutOfRegimeError, VelocitySpecError
from mcplab.heisenberg import HeisenbergModel, jacobi_determinants_from_params
from mcplab.mcp import (
    DensityProfile,
    VelocitySet,
    contraction_bound,
    density,
    density_profile,
    mcp_scan,
    monte_carlo_contraction,
    quadrature_contraction,
    sharpness_scan,
)
from mcplab.riccati import RiccatiParams


def test_density_euclidean_limit():
    for n in (1, 2):
        p = RiccatiParams(b=0.0, c=0.0, n=n)
        t = np.array([0.0, 0.25, 0.5, 0.9])
        assert np.allclose(density(p, t), (1.0 - t) ** (2 * n + 1), rtol=1e-12)
    assert density(RiccatiParams(b=0.0, c=0.0), 0.0) == 1.0


def test_density_quarter_turn_value():
    # b = 0, c = pi/2, n = 1: D(t) = (1-t) sin^2(pi (1-t) / 2)
    p = RiccatiParams(b=0.0, c=np.pi / 2, n=1)
    assert density(p, 0.5) == pytest.approx(0.25, rel=1e-12)
    for t in (0.1, 0.3, 0.7):
        expect = (1 - t) * np.sin(np.pi * (1 - t) / 2) ** 2
        assert density(p, t) == pytest.approx(expect, rel=1e-12)


def test_density_sharp_regime():
    # large b, tiny c: the density approaches the bound (1-t)^5 for n = 1
    p = RiccatiParams(b=1e3, c=1e-3, n=1)
    assert density(p, 0.5) == pytest.approx(0.5**5, rel=1e-2)


def test_density_matches_ode_determinant_ratio():
    for b, c, n in ((-1.0, 1.0, 1), (-0.5, 2.5, 2), (-3.0, -1.5, 1)):
        p = RiccatiParams(b=b, c=c, n=n)
        for t in (0.3, 0.5, 0.9):
            d1, d0 = jacobi_determinants_from_params(b, c, [1.0 - t, 1.0], n=n)
            assert density(p, t) == pytest.approx(d1 / d0, rel=1e-6)


def test_density_even_in_b_and_c():
    t = np.linspace(0.0, 0.9, 7)
    base = density(RiccatiParams(b=-1.2, c=0.7, n=2), t)
    for b, c in ((1.2, 0.7), (-1.2, -0.7), (1.2, -0.7)):
        assert np.allclose(density(RiccatiParams(b=b, c=c, n=2), t), base, rtol=1e-13)


def test_density_monotone_decreasing_up_to_half_turn():
    # D is strictly decreasing whenever |c| <= pi/2 (every closed-form
    # trace term keeps its sign there); past pi/2 this genuinely fails:
    # det A(s) peaks before its first conjugate time, so for larger |c|
    # the ratio D(t) initially rises above 1
    t = np.linspace(0.0, 0.95, 96)
    for b in (0.0, -1.0, -10.0):
        for c in (0.0, 1.0, np.pi / 2):
            d = density(RiccatiParams(b=b, c=c, n=1), t)
            assert np.all(np.diff(d) < 0.0)
    d = density(RiccatiParams(b=0.0, c=2.8, n=1), t)
    assert np.max(d) > 1.0
    assert not np.all(np.diff(d) < 0.0)


def test_density_domain_errors():
    p = RiccatiParams(b=0.0, c=0.0, n=1)
    with pytest.raises(DomainError):
        density(p, 1.0)
    with pytest.raises(DomainError):
        density(p, -0.1)
    with pytest.raises(OutOfRegimeError):
        density(RiccatiParams(b=0.0, c=np.pi, n=1), 0.5)


def test_density_profile_and_csv(tmp_path):
    p = RiccatiParams(b=-2.0, c=1.0, n=1)
    t = np.linspace(0.0, 0.9, 10)
    prof = density_profile(p, t)
    assert isinstance(prof, DensityProfile)
    assert prof.density[0] == 1.0
    assert np.all(prof.ratio >= 1.0 - 1e-9)
    assert np.allclose(prof.bound, contraction_bound(1, t))
    path = tmp_path / "profile.csv"
    prof.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "b,c,t,density,bound,ratio"
    assert len(lines) == 11
    row = lines[1].split(",")
    assert float(row[0]) == -2.0 and float(row[3]) == 1.0
    path2 = tmp_path / "profile2.csv"
    density_profile(p, t).write_csv(path2)
    assert path.read_bytes() == path2.read_bytes()


def test_mcp_scan_holds_on_grid():
    report = mcp_scan(1, resolution=20)
    assert report.ok
    assert report.violations == []
    assert report.min_ratio >= 1.0 - 1e-9
    b, c, t = report.argmin
    assert 0.0 <= b <= 10.0 and abs(c) <= 3.0 and 0.05 <= t <= 0.95
    blob = json.loads(report.to_json())
    assert blob["ok"] is True
    assert blob["exponent"] == 5
    # both readings of the two-block display are recorded; the sum reading
    # exceeds 1 at the reference point and is clearly not a density
    readings = blob["density_readings"]
    assert readings["implemented"] == "product"
    assert readings["sum_reading"] > 1.0
    assert 0.0 < readings["product_reading"] < 1.0


def test_mcp_scan_higher_n():
    for n in (2, 3):
        report = mcp_scan(n, resolution=12)
        assert report.violations == []
        assert json.loads(report.to_json())["exponent"] == 2 * n + 3


def test_mcp_scan_validation():
    with pytest.raises(DomainError):
        mcp_scan(0)
    with pytest.raises(DomainError):
        mcp_scan(1, c_range=(-np.pi, 1.0))
    with pytest.raises(DomainError):
        mcp_scan(1, t_range=(0.5, 1.0))
    with pytest.raises(DomainError):
        mcp_scan(1, resolution=1)
    with pytest.raises(DomainError):
        mcp_scan(1, t_range=(0.9, 0.1))


def test_ratio_at_small_scalars():
    # b = 0, c -> 0: ratio = (1-t)^(-2) exactly in the limit
    p = RiccatiParams(b=0.0, c=1e-9, n=1)
    for t in (0.3, 0.5):
        ratio = density(p, t) / contraction_bound(1, t)
        assert ratio == pytest.approx((1.0 - t) ** -2, rel=1e-9)


def test_b_zero_slice_not_sharp():
    # on the b = 0 slice the ratio never drops below (1-t)^(-2) > 1
    t = 0.5
    c = np.linspace(1e-6, np.pi - 1e-6, 500)[None, :]
    from mcplab.mcp import _det_blocks

    for n in (1, 2):
        dens = _det_blocks(0.0, c, n, 1.0 - t) / _det_blocks(0.0, c, n, 1.0)
        ratio = dens / (1.0 - t) ** (2 * n + 3)
        assert np.min(ratio) >= (1.0 - t) ** -2 - 1e-9
        assert np.min(ratio) == pytest.approx((1.0 - t) ** -2, rel=1e-3)


def test_sharpness_scan():
    for t, cap in ((0.3, 1.02), (0.5, 1.02), (0.9, 1.05)):
        inf_est = sharpness_scan(1, t)
        assert 1.0 - 1e-9 <= inf_est <= cap
    with pytest.raises(DomainError):
        sharpness_scan(1, 1.0)


def test_velocity_set_validation():
    with pytest.raises(VelocitySpecError):
        VelocitySet(horizontal_radius=0.0, vertical_momentum=1.0)
    with pytest.raises(VelocitySpecError):
        VelocitySet(horizontal_radius=1.0, vertical_momentum=-1.0)
    assert VelocitySet(2.0, 5.0).c_max == 2.5


def test_monte_carlo_tiny_ball_is_euclidean():
    for n in (1, 2):
        model = HeisenbergModel(n=n, eps=1.0)
        spec = VelocitySet(horizontal_radius=1e-3, vertical_momentum=1e-3)
        res = monte_carlo_contraction(
            model, np.zeros(model.dim), spec, t=0.5, samples=2000, steps=96
        )
        expect = 0.5 ** (2 * n + 1)
        # deviation from the Euclidean value is quadratic in the ball size
        assert res.ratio == pytest.approx(expect, abs=3 * res.std_error + 1e-6)
        assert res.std_error < 1e-3
        assert res.rejected_fraction == 0.0


def test_monte_carlo_satisfies_contraction_bound():
    model = HeisenbergModel(n=1, eps=1.0)
    spec = VelocitySet(horizontal_radius=2.0, vertical_momentum=5.0)
    res = monte_carlo_contraction(
        model, np.zeros(3), spec, t=0.3, samples=4000, steps=128, seed=7
    )
    assert res.passes
    assert res.ratio >= 0.7**5 * (1.0 - 3.0 * res.std_error)
    ratio, se = res  # tuple unpacking contract
    assert ratio == res.ratio and se == res.std_error
    blob = res.to_dict()
    assert blob["seed"] == 7 and blob["passes"] is True


def test_monte_carlo_matches_quadrature():
    model = HeisenbergModel(n=1, eps=2.0)
    spec = VelocitySet(horizontal_radius=1.5, vertical_momentum=4.0)
    res = monte_carlo_contraction(
        model, np.zeros(3), spec, t=0.4, samples=20_000, steps=128, seed=3
    )
    ref = quadrature_contraction(model, spec, t=0.4)
    assert abs(res.ratio - ref) <= 3.0 * res.std_error
    assert ref >= (1.0 - 0.4) ** 5 - 1e-12


def test_monte_carlo_deterministic_and_seed_sensitive():
    model = HeisenbergModel(n=1, eps=1.0)
    spec = VelocitySet(horizontal_radius=1.0, vertical_momentum=2.0)
    a = monte_carlo_contraction(model, np.zeros(3), spec, 0.5, samples=2000, steps=64)
    b = monte_carlo_contraction(model, np.zeros(3), spec, 0.5, samples=2000, steps=64)
    assert (a.ratio, a.std_error) == (b.ratio, b.std_error)
    c = monte_carlo_contraction(
        model, np.zeros(3), spec, 0.5, samples=2000, steps=64, seed=1
    )
    assert c.ratio != a.ratio


def test_monte_carlo_rejection_paths():
    model = HeisenbergModel(n=1, eps=1.0)
    # vertical momentum far past the conjugate threshold 2 pi
    spec = VelocitySet(horizontal_radius=1.0, vertical_momentum=2 * np.pi + 1.0)
    with pytest.raises(VelocitySpecError):
        monte_carlo_contraction(model, np.zeros(3), spec, 0.5, samples=2000, steps=64)
    with pytest.raises(DomainError):
        monte_carlo_contraction(
            model, np.zeros(3), VelocitySet(1.0, 1.0), 0.5, samples=10
        )
    with pytest.raises(DomainError):
        monte_carlo_contraction(
            model, np.zeros(4), VelocitySet(1.0, 1.0), 0.5, samples=2000
        )
    with pytest.raises(DomainError):
        monte_carlo_contraction(
            model, np.zeros(3), VelocitySet(1.0, 1.0), 1.5, samples=2000
        )


def test_quadrature_pure_horizontal_set():
    model = HeisenbergModel(n=1, eps=1.0)
    spec = VelocitySet(horizontal_radius=2.0, vertical_momentum=0.0)
    ref = quadrature_contraction(model, spec, t=0.5)
    assert ref >= 0.5**5
    res = monte_carlo_contraction(model, np.zeros(3), spec, 0.5, samples=4000, steps=96)
    assert abs(res.ratio - ref) <= 3.0 * res.std_error + 1e-9
    with pytest.raises(VelocitySpecError):
        quadrature_contraction(model, VelocitySet(1.0, 7.0), t=0.5)
