import numpy as np
import pytest

from tfouter import build_generators, xi_lattice, GeometryParams
from tfouter.wavepackets import packet_spectrum, truncated_packet


def test_xi_lattice_matches_fftfreq():
    n, dz = 32, 0.125
    assert np.allclose(xi_lattice(n, dz), 2 * np.pi * np.fft.fftfreq(n, d=dz))


def test_phi_hat_even_and_supported(gen, geom):
    v = np.linspace(-6, 6, 2001)
    assert np.max(np.abs(gen.phi_hat(v) - gen.phi_hat(-v))) == 0.0
    outside = (v <= geom.beta_minus) | (v >= geom.beta_plus)
    assert np.max(np.abs(gen.phi_hat(v[outside]))) < 1e-12


def test_psi_hat_unit_center_and_supported(gen, geom):
    assert abs(gen.psi_hat(0.0) - 1.0) < 1e-12
    v = np.linspace(-6, 6, 2001)
    outside = (v <= geom.beta_minus) | (v >= geom.beta_plus)
    assert np.max(np.abs(gen.psi_hat(v[outside]))) < 1e-12


def test_chi_window(gen, geom):
    v = np.linspace(-2, 2, 4001)
    chi = gen.chi(v)
    assert chi.min() >= 0.0
    outside = (v < geom.d - geom.eps) | (v > geom.d + geom.eps)
    assert np.max(np.abs(chi[outside])) == 0.0
    # numeric quadrature of the window mass matches the stored constant
    fine = np.linspace(geom.d - geom.eps, geom.d + geom.eps, 200001)
    mass = np.trapezoid(gen.chi(fine), fine)
    assert mass == pytest.approx(gen.chi_mass, abs=1e-9)


def test_cum_chi_against_quadrature(gen, geom):
    lo = geom.d - geom.eps
    assert gen.cum_chi(lo - 0.5) == 0.0
    assert gen.cum_chi(geom.d + geom.eps + 0.5) == pytest.approx(gen.chi_mass)
    for x in geom.d + geom.eps * np.array([-0.7, -0.3, 0.0, 0.4, 0.9]):
        seg = np.linspace(lo, x, 40001)
        want = np.trapezoid(gen.chi(seg), seg)
        assert gen.cum_chi(x) == pytest.approx(want, abs=1e-6)


def test_cum_uchi_against_quadrature(gen, geom):
    lo = geom.d - geom.eps
    for x in geom.d + geom.eps * np.array([-0.4, 0.2, 0.8]):
        seg = np.linspace(lo, x, 40001)
        want = np.trapezoid(seg * gen.chi(seg), seg)
        assert gen.cum_uchi(x) == pytest.approx(want, abs=1e-6)


def test_beta_shape(gen):
    v = np.linspace(-6, 6, 2001)
    b = gen.beta(v)
    assert b.min() >= 0.0 and b.max() <= 1.0
    assert np.min(np.diff(b)) >= -1e-15
    assert gen.beta(6.0) == pytest.approx(1.0, abs=1e-12)
    assert gen.beta(-6.0) == pytest.approx(0.0, abs=1e-12)


def test_time_profiles_roundtrip(gen):
    """fft of the sampled time profile reproduces the spectral table."""
    n, dz = 256, 0.125
    xi = xi_lattice(n, dz)
    for hat, time in ((gen.psi_hat, gen.psi_time), (gen.phi_hat, gen.phi_time)):
        for t in (1.0, 0.45):
            samples = time(t, n, dz)
            back = np.fft.fft(samples) * dz
            assert np.max(np.abs(back - hat(t * xi))) < 1e-10


def test_packet_spectrum_sides(gen, geom):
    n, dz = 128, 0.125
    xi = xi_lattice(n, dz)
    t, eta = 0.45, 2.0
    # chi argument t (eta - c-) must land inside the window [d-eps, d+eps]
    c_minus = eta - geom.d / t
    spec = packet_spectrum(gen, 0.0, eta, t, c_minus, np.inf, "left", xi)
    assert np.max(np.abs(spec)) > 0
    # infinite boundary under chi kills the packet
    assert np.max(np.abs(packet_spectrum(gen, 0.0, eta, t, -np.inf, np.inf, "left", xi))) == 0.0
    # the right packet mirrors the left one under frequency reflection
    c_plus = -eta + geom.d / t
    left = packet_spectrum(gen, 0.0, eta, t, c_minus, np.inf, "left", xi)
    right = packet_spectrum(gen, 0.0, -eta, t, -np.inf, c_plus, "right", -xi)
    assert np.max(np.abs(left - right)) < 1e-12


def test_packet_translation_phase(gen, geom):
    n, dz = 128, 0.125
    xi = xi_lattice(n, dz)
    t, eta = 0.45, 2.0
    c_minus = eta - geom.d / t
    base = packet_spectrum(gen, 0.0, eta, t, c_minus, np.inf, "left", xi)
    moved = packet_spectrum(gen, 0.75, eta, t, c_minus, np.inf, "left", xi)
    assert np.max(np.abs(moved - base * np.exp(-1j * xi * 0.75))) < 1e-12


def test_packet_spectrum_validation(gen):
    xi = np.linspace(-1, 1, 8)
    with pytest.raises(ValueError):
        packet_spectrum(gen, 0.0, 0.0, -1.0, 0.0, 1.0, "left", xi)
    with pytest.raises(ValueError):
        packet_spectrum(gen, 0.0, 0.0, 1.0, 2.0, 1.0, "left", xi)
    with pytest.raises(ValueError):
        packet_spectrum(gen, 0.0, 0.0, 1.0, 0.0, 1.0, "middle", xi)


def test_truncated_packet_band_limited(gen, geom):
    n, period = 128, 16.0
    t, eta = 0.45, 2.0
    c_minus = eta - geom.d / t
    samples = truncated_packet(gen, 0.0, eta, t, c_minus, np.inf, "left", period, n)
    dz = period / n
    xi = xi_lattice(n, dz)
    spec = np.fft.fft(samples) * dz
    want = packet_spectrum(gen, 0.0, eta, t, c_minus, np.inf, "left", xi)
    assert np.max(np.abs(spec - want)) < 1e-10


def test_generators_cache_tables(geom):
    g1 = build_generators(geom)
    # the builder enforces its own invariants; a rebuilt generator agrees
    g2 = build_generators(geom)
    v = np.linspace(-2, 2, 101)
    assert np.allclose(g1.phi_hat(v), g2.phi_hat(v))
    assert g1.chi_mass == g2.chi_mass
