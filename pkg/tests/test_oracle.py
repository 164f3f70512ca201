import numpy as np
import pytest

from dampedns import oracle
from dampedns import spectral as sp
from dampedns.oracle import OracleBudget, OracleBudgetError
from dampedns.spectral import Grid, PhysicalVectorField, SpectralVectorField


def test_delta_impulse_flat_spectrum(grid8):
    s = np.zeros((3,) + grid8.shape)
    s[0, 0, 0, 0] = 1.0
    c = oracle.naive_dft(PhysicalVectorField(grid8, s)).coeffs[0]
    expected = np.sqrt(grid8.volume) / grid8.size
    np.testing.assert_allclose(np.abs(c), expected, rtol=1e-12)


def test_constant_dc_only(grid8):
    s = np.full((3,) + grid8.shape, 2.0)
    c = oracle.naive_dft(PhysicalVectorField(grid8, s)).coeffs.copy()
    assert np.allclose(c[:, 0, 0, 0], 2.0 * np.sqrt(grid8.volume))
    c[:, 0, 0, 0] = 0
    assert np.abs(c).max() < 1e-11


def test_naive_round_trip():
    g = Grid((8, 4, 6), (1.0, 2.0, 3.0))
    rng = np.random.default_rng(0)
    f = PhysicalVectorField(g, rng.standard_normal((3,) + g.shape))
    back = oracle.naive_idft(oracle.naive_dft(f)).samples
    assert np.max(np.abs(back - f.samples)) <= 1e-12 * np.abs(f.samples).max()


def test_budget_is_a_hard_error():
    big = Grid.cube(16)
    with pytest.raises(OracleBudgetError):
        oracle.naive_dft(PhysicalVectorField(big, np.zeros((3,) + big.shape)))
    with pytest.raises(OracleBudgetError):
        oracle.convolution_nonlinear(SpectralVectorField.zeros(big))
    with pytest.raises(OracleBudgetError):
        oracle.refined_quadrature_norm(lambda a, b, c: (a, b, c), Grid.cube(64), 2.0, refine_factor=4)
    # a larger budget admits the same call
    OracleBudget(max_modes=16**3).check_modes(big)


def test_single_mode_convolution_on_doubled_wavevector(grid8):
    # u = (0, sin x1 ... ) is self-advection free; use a pair of modes whose triads land on 2k
    c = np.zeros((3,) + grid8.shape, complex)
    # u = (cos(x2), 0, 0) + (0, 0, cos(x2)) projected: wavevector (0,1,0), amplitude _|_ to it
    c[0, 0, 1, 0] = c[0, 0, -1, 0] = 1.0
    c[2, 0, 1, 0] = c[2, 0, -1, 0] = 1.0
    out = oracle.convolution_nonlinear(SpectralVectorField(grid8, c)).coeffs
    # u . grad u = 0 here since u has no x2 component
    assert np.abs(out).max() == 0.0
    # now a mode with an advecting component: u1 = cos(x1 + x2), u2 = -cos(x1 + x2)
    c = np.zeros((3,) + grid8.shape, complex)
    c[0, 1, 1, 0] = c[0, -1, -1, 0] = 1.0
    c[1, 1, 1, 0] = c[1, -1, -1, 0] = -1.0
    out = oracle.convolution_nonlinear(SpectralVectorField(grid8, c)).coeffs
    nz = {tuple(i[1:]) for i in np.argwhere(np.abs(out) > 1e-13)}
    assert nz <= {(0, 0, 0), (2, 2, 0), (6, 6, 0)}


def test_convolution_orthogonal_to_u(grid8):
    for seed in range(5):
        u = sp.random_divergence_free(grid8, seed)
        out = oracle.convolution_nonlinear(u).coeffs
        ud = u.coeffs * grid8.dealias_mask
        inner = np.sum(out * np.conj(ud))
        assert abs(inner) <= 1e-13 * np.sum(np.abs(ud) ** 2) ** 1.5


def test_refined_quadrature_constant_exact():
    g = Grid((4, 4, 4), (1.0, 2.0, 3.0))
    for r in (1, 2, 3):
        val = oracle.refined_quadrature_norm(lambda a, b, c: (2.0, 0.0, 0.0), g, 3.0, refine_factor=r)
        assert val == pytest.approx(2.0 * 6.0 ** (1 / 3), rel=1e-14)


def test_refined_quadrature_single_mode_parseval(grid8):
    def func(a, b, c):
        return (np.cos(a + 2 * c), 0 * a, 0 * a)

    val = oracle.refined_quadrature_norm(func, grid8, 2.0)
    assert val == pytest.approx(np.sqrt(grid8.volume / 2), rel=1e-13)


def test_refined_quadrature_inf(grid8):
    val = oracle.refined_quadrature_norm(lambda a, b, c: (np.sin(a), 0 * a, 0 * a), grid8, np.inf)
    assert val == pytest.approx(1.0, rel=1e-12)


def test_oracle_does_not_import_fast_kernels():
    import inspect

    src = inspect.getsource(oracle)
    for name in ("fft_forward", "fft_inverse", "leray_array", "scipy", "xi_odd", ".xi", "dealias_mask"):
        assert name not in src
