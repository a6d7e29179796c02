"""Acceptance suite: one test per criterion, tolerances pinned here.

Run on its own with ``pytest tests/test_acceptance.py -v``; a PASS/FAIL line
per criterion is printed in the terminal summary.
"""
import math
import time

import numpy as np
import pytest

import oracles
from models import random_model, truth
from nvstrain import cli
from nvstrain.fit import fit_dual_lorentzian, fit_jacobian, invert_to_strain, FitParams
from nvstrain.geometry import TABLE_ANGLES_DEG, TABLE_VECTORS, dipoles, nv_axis, readout_fidelity
from nvstrain.spectrum import SpectrumModel, SpectrumSamples, dip_weights, metrics, synthesize, transition_amplitudes
from nvstrain.spin import StrainAmplitudes, analytic_levels, build_hamiltonian, eigensystem
from nvstrain.strain import amplitudes_from_tensor, default_couplings, shear_xy, shear_yz, volumetric

# pinned tolerances
EIGEN_ATOL = 1e-10
EIGEN_SECONDS = 5.0
ALPHA_SUM_ATOL = 1e-15
ALPHA_SECONDS = 1.0
METRIC_RTOL = 1e-14
SCENARIO_SECONDS = 1.0
IMBALANCE_SYMMETRIC_ATOL = 1e-12
SWAP_ATOL = 1e-12
NOISELESS_RTOL = 1e-6
NOISELESS_INVERT_ATOL = 1e-6
NOISELESS_SECONDS = 30.0
NOISY_SIGMA = 0.01
NOISY_NU_GAMMAS = 0.2
NOISY_IMBALANCE = 0.1
NOISY_SECONDS = 60.0
JACOBIAN_RTOL = 1e-5
TABLE_ATOL = 2e-3
ORTHO_ATOL = 1e-3
FIDELITY_ATOL = 1e-4
FIDELITY_LIMIT_ATOL = 1e-3


def _dips(samples: SpectrumSamples):
    """Indices of local minima of the synthesized PL lying below the baseline."""
    y = samples.pl
    i = np.arange(1, len(y) - 1)
    mins = i[(y[i] < y[i - 1]) & (y[i] < y[i + 1])]
    return [int(k) for k in mins if y[k] < y.max() - 1e-9]


def test_c01_eigensolver_matches_closed_form():
    rng = np.random.default_rng(101)
    amps = rng.uniform(-0.1, 0.1, size=(10_000, 3))
    t0 = time.perf_counter()
    worst = 0.0
    for mz, mx, my in amps:
        a = StrainAmplitudes(mz, mx, my)
        e = eigensystem(build_hamiltonian(2.87, a)).energies
        worst = max(worst, float(np.max(np.abs(e - np.array(analytic_levels(2.87, a))))))
    elapsed = time.perf_counter() - t0
    assert worst <= EIGEN_ATOL, worst
    assert elapsed < EIGEN_SECONDS, elapsed


def test_c02_transition_weights_sum_to_one():
    rng = np.random.default_rng(102)
    pairs = rng.uniform(-4 * math.pi, 4 * math.pi, size=(100_000, 2)).tolist()
    t0 = time.perf_counter()
    worst = max(abs(sum(transition_amplitudes(a, b)) - 1.0) for a, b in pairs)
    elapsed = time.perf_counter() - t0
    assert worst <= ALPHA_SUM_ATOL
    assert elapsed < ALPHA_SECONDS, elapsed


def test_c03_metric_identities():
    rng = np.random.default_rng(103)
    for _ in range(10_000):
        mz, mx, my = rng.uniform(-0.05, 0.05, 3)
        m = metrics(SpectrumModel(StrainAmplitudes(mz, mx, my), phi_mw=rng.uniform(-math.pi, math.pi)))
        assert abs(m.shift - mz) <= METRIC_RTOL * abs(mz)
        split = 2 * math.sqrt(mx * mx + my * my)
        assert abs(m.splitting - split) <= METRIC_RTOL * split


def test_c04a_volumetric_strain_shifts_single_dip():
    t0 = time.perf_counter()
    for eps, above in ((-3e-4, True), (3e-4, False)):
        s = synthesize(SpectrumModel(amplitudes_from_tensor(volumetric(eps))))
        dips = _dips(s)
        assert len(dips) == 1
        centre = s.nu[dips[0]]
        assert (centre > 2.87) if above else (centre < 2.87)
    assert time.perf_counter() - t0 < SCENARIO_SECONDS


def test_c04b_yz_shear_at_45_degrees_gives_symmetric_pair():
    t0 = time.perf_counter()
    model = SpectrumModel(amplitudes_from_tensor(shear_yz(2e-4)), phi_mw=math.pi / 4)
    s = synthesize(model)
    imbalance = metrics(model).imbalance
    dips = _dips(s)
    elapsed = time.perf_counter() - t0
    assert len(dips) == 2, f"{len(dips)} dip(s) visible; imbalance {imbalance}"
    assert abs(imbalance) < IMBALANCE_SYMMETRIC_ATOL, imbalance
    assert elapsed < SCENARIO_SECONDS


def test_c04c_in_plane_strain_shifts_and_unbalances():
    t0 = time.perf_counter()
    model = SpectrumModel.from_depth(0.2, 2e-3, amps=amplitudes_from_tensor(shear_xy(2e-4, -1e-4, 1e-4)))
    s = synthesize(model)
    est = invert_to_strain(fit_dual_lorentzian(s), model.d)
    assert est.m_z_hat != 0 and abs(est.m_z_hat) > 1e-6
    assert abs(est.imbalance_hat) > 0
    assert time.perf_counter() - t0 < SCENARIO_SECONDS


def test_c05_drive_quarter_turn_swaps_imbalance():
    rng = np.random.default_rng(105)
    cases = [amplitudes_from_tensor(shear_xy(2e-4, -1e-4, 1e-4))]
    cases += [StrainAmplitudes(*rng.uniform(-0.01, 0.01, 3)) for _ in range(100)]
    for a in cases:
        m0, m1 = SpectrumModel(a, phi_mw=0.0), SpectrumModel(a, phi_mw=math.pi / 2)
        nm0, np0, *_ = dip_weights(m0)
        nm1, np1, *_ = dip_weights(m1)
        assert abs(np0 - np1) <= SWAP_ATOL and abs(nm0 - nm1) <= SWAP_ATOL
        assert abs(metrics(m0).imbalance + metrics(m1).imbalance) <= SWAP_ATOL


def test_c06_noiseless_fit_round_trip():
    rng = np.random.default_rng(106)
    t0 = time.perf_counter()
    names = ("nu_plus", "nu_minus", "depth_plus", "depth_minus", "gamma", "baseline")
    for _ in range(100):
        model = random_model(rng)
        t = truth(model)
        r = fit_dual_lorentzian(synthesize(model))
        for n in names:
            assert abs(getattr(r.params, n) - t[n]) <= NOISELESS_RTOL * abs(t[n]), n
        est = invert_to_strain(r, model.d)
        assert abs(est.m_z_hat - t["m_z"]) <= NOISELESS_INVERT_ATOL
        assert abs(est.m_perp_hat - t["m_perp"]) <= NOISELESS_INVERT_ATOL
        assert abs(est.imbalance_hat - t["imbalance"]) <= NOISELESS_INVERT_ATOL
    assert time.perf_counter() - t0 < NOISELESS_SECONDS


def test_c07_noisy_fit_round_trip():
    rng = np.random.default_rng(107)
    t0 = time.perf_counter()
    nu_err, imb_err = [], []
    for _ in range(100):
        model = random_model(rng)
        t = truth(model)
        clean = synthesize(model)
        s = SpectrumSamples(clean.nu, clean.pl + rng.normal(scale=NOISY_SIGMA, size=len(clean)))
        r = fit_dual_lorentzian(s)
        p = r.params
        nu_err.append(max(abs(p.nu_plus - t["nu_plus"]), abs(p.nu_minus - t["nu_minus"])) / model.gamma)
        imb_err.append(abs(invert_to_strain(r, model.d, require_converged=False).imbalance_hat - t["imbalance"]))
    elapsed = time.perf_counter() - t0
    assert np.percentile(nu_err, 90) <= NOISY_NU_GAMMAS
    assert np.percentile(imb_err, 90) <= NOISY_IMBALANCE
    assert elapsed < NOISY_SECONDS


def test_c08_jacobian_matches_finite_differences():
    rng = np.random.default_rng(108)
    nu = np.linspace(2.84, 2.90, 601)
    for _ in range(20):
        p = FitParams(2.87 + rng.uniform(0, 0.015), 2.87 - rng.uniform(0, 0.015), rng.uniform(0.02, 0.3),
                      rng.uniform(0.02, 0.3), rng.uniform(5e-4, 5e-3), rng.uniform(0.8, 1.2))
        jac = fit_jacobian(nu, p)
        fd = oracles.finite_difference_jacobian(nu, p.free())
        scale = np.max(np.abs(fd), axis=0)
        assert np.all(np.max(np.abs(jac - fd), axis=0) <= JACOBIAN_RTOL * scale)


def test_c09_coupling_constants():
    c = default_couplings()
    assert (c.h43, c.h41, c.h25, c.h26, c.h15, c.h16) == (2.3, -6.42, -2.6, -2.83, 5.7, 19.66)


def test_c10_orientation_table():
    rad = math.radians
    for idx, (axis, a1, a2) in TABLE_ANGLES_DEG.items():
        e_tab, d1_tab, d2_tab = (np.array(v) for v in TABLE_VECTORS[idx])
        # each tabulated vector from its own spherical angles
        for ang, tab in zip((axis, a1, a2), (e_tab, d1_tab, d2_tab)):
            assert np.max(np.abs(nv_axis(rad(ang[0]), rad(ang[1])) - tab)) <= TABLE_ATOL
        # dipoles from the axis angles: d2 signed, d1 as an axis (its sign is a convention)
        d1, d2 = dipoles(rad(axis[0]), rad(axis[1]))
        assert np.max(np.abs(d2 - d2_tab)) <= TABLE_ATOL
        assert min(np.max(np.abs(d1 - d1_tab)), np.max(np.abs(d1 + d1_tab))) <= TABLE_ATOL
        assert abs(d1_tab @ d2_tab) <= ORTHO_ATOL
        assert abs(d1_tab @ e_tab) <= ORTHO_ATOL
        assert abs(d2_tab @ e_tab) <= ORTHO_ATOL


def test_c11_readout_fidelity():
    assert abs(readout_fidelity(0.3, 10) - 0.6882) <= FIDELITY_ATOL
    f = readout_fidelity(0.3, np.arange(0, 10_001))
    assert np.all(np.diff(f) > 0)
    assert abs(readout_fidelity(1.0, 1e6) - 1.0) <= FIDELITY_LIMIT_ATOL


def _pipeline(workdir):
    cfg = workdir / "model.json"
    cfg.write_text('{"m_z_ghz": 0.001, "m_x_ghz": 0.006, "m_y_ghz": 0.002, "phi_mw_rad": 0.3}\n')
    assert cli.main(["simulate", "--config", str(cfg), "-o", str(workdir / "s.csv")]) == 0
    assert cli.main(["fit", str(workdir / "s.csv"), "-o", str(workdir / "s.fit.json")]) == 0
    assert cli.main(["metrics", "--fit-json", str(workdir / "s.fit.json"), "-o", str(workdir / "m.json")]) == 0
    return [(workdir / n).read_bytes() for n in ("s.csv", "s.json", "s.fit.json", "m.json")]


def test_c12_pipeline_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    assert _pipeline(a) == _pipeline(b)
