import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from nvstrain.geometry import nv_rotation
from nvstrain.strain import (
    COMPONENTS,
    CouplingConstants,
    NvFrame,
    StrainTensor,
    amplitudes_from_tensor,
    default_couplings,
    rotate_to_nv_frame,
    scenario,
    shear_xy,
    shear_yz,
    volumetric,
)

small = st.floats(-1e-4, 1e-4, allow_nan=False)
tensors = st.builds(StrainTensor, small, small, small, small, small, small)


def test_default_couplings_values():
    c = default_couplings()
    assert c.h16 == 19.66
    assert c.h25 == -2.6
    assert c.h41 == -6.42
    assert (c.h43, c.h15, c.h26) == (2.3, 5.7, -2.83)


def test_zero_tensor_gives_zero_amplitudes():
    a = amplitudes_from_tensor(StrainTensor())
    assert a.as_array().tolist() == [0.0] * 5


def test_isotropic_axial_amplitude():
    a = amplitudes_from_tensor(StrainTensor(1e-6, 1e-6, 1e-6))
    assert a.m_z == pytest.approx(-1.054e-5, rel=1e-12)
    assert (a.m_x, a.m_y, a.n_x, a.n_y) == (0, 0, 0, 0)


def test_xy_shear_amplitudes():
    a = amplitudes_from_tensor(StrainTensor(e_xy=1e-6))
    assert a.m_y == pytest.approx(2.85e-6, rel=1e-12)
    assert a.n_y == pytest.approx(-1.3e-6, rel=1e-12)
    assert (a.m_z, a.m_x, a.n_x) == (0, 0, 0)


def test_anisotropy_enters_with_quarter_factor():
    c = default_couplings()
    a = amplitudes_from_tensor(StrainTensor(e_xx=1e-6, e_yy=-1e-6))
    assert a.m_x == pytest.approx(-0.25 * c.h15 * 2e-6, rel=1e-12)
    assert a.n_x == pytest.approx(-0.25 * c.h25 * 2e-6, rel=1e-12)


def test_custom_couplings():
    c = CouplingConstants(h41=1.0, h43=0.0)
    assert amplitudes_from_tensor(StrainTensor(1e-6, 0, 0), c).m_z == pytest.approx(1e-6)


def test_amplitudes_reject_lab_frame():
    with pytest.raises(ValueError, match="NV frame"):
        amplitudes_from_tensor(StrainTensor(e_zz=1e-6, frame="LAB"))


@settings(max_examples=100, deadline=None)
@given(tensors, tensors, st.floats(-3, 3))
def test_amplitudes_are_linear(a, b, k):
    lhs = amplitudes_from_tensor(a + b.scaled(k)).as_array()
    rhs = amplitudes_from_tensor(a).as_array() + k * amplitudes_from_tensor(b).as_array()
    np.testing.assert_allclose(lhs, rhs, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-9, 1e-4))
def test_volumetric_sign(s):
    # compression raises the transition frequencies, tension lowers them
    assert amplitudes_from_tensor(volumetric(-s)).m_z > 0
    assert amplitudes_from_tensor(volumetric(s)).m_z < 0


def test_volumetric_equipartition():
    t = volumetric(3e-6)
    for v in (t.e_xx, t.e_yy, t.e_zz):
        assert v == pytest.approx(1e-6, rel=1e-15)
    assert t.e_xy == t.e_xz == t.e_yz == 0


def test_shear_yz_gives_pure_splitting():
    a = amplitudes_from_tensor(shear_yz(1e-6))
    assert a.m_x == 0 and a.m_z == 0
    assert a.m_y == pytest.approx(9.83e-6, rel=1e-12)


def test_shear_xy_with_anisotropy():
    a = amplitudes_from_tensor(shear_xy(2e-4, -1e-4, 1e-4))
    assert a.m_z != 0 and a.m_x != 0 and a.m_y != 0


def test_shear_xy_traceless_in_plane_has_no_shift():
    # equal and opposite in-plane normal strain cancels the axial term
    a = amplitudes_from_tensor(shear_xy(1e-6, -1e-6, 1e-6))
    assert a.m_z == 0
    assert a.m_x != 0 and a.m_y != 0


def test_scenario_dispatch():
    assert scenario("volumetric", 3e-6) == volumetric(3e-6)
    assert scenario("shear_yz", 1e-6) == shear_yz(1e-6)
    with pytest.raises(ValueError, match="unknown scenario"):
        scenario("twist", 1.0)
    with pytest.raises(ValueError):
        scenario("shear_yz", float("nan"))


def test_tensor_validation():
    with pytest.raises(ValueError):
        StrainTensor(e_xx=float("nan"))
    with pytest.raises(ValueError):
        StrainTensor(frame="CRYSTAL")
    with pytest.warns(RuntimeWarning):
        StrainTensor(e_zz=0.02)


def test_tensor_dict_round_trip():
    t = StrainTensor(1e-6, 2e-6, 3e-6, 4e-6, 5e-6, 6e-6, frame="LAB")
    assert StrainTensor.from_dict(t.to_dict()) == t
    with pytest.raises(ValueError):
        StrainTensor.from_dict({"e_xx": 1e-6, "e_qq": 0})


def test_tensor_matrix_symmetric():
    m = StrainTensor(*np.arange(1, 7) * 1e-6).matrix()
    np.testing.assert_array_equal(m, m.T)
    assert StrainTensor.from_matrix(m) == StrainTensor(*np.arange(1, 7) * 1e-6)


def test_uniaxial_lab_strain_into_frame_one():
    eps = StrainTensor(e_zz=1e-6, frame="LAB")
    out = rotate_to_nv_frame(eps, 1)
    assert out.frame == "NV"
    # frozen from oracles.rotate_tensor with the frame-one rotation rebuilt from its angles
    expect = np.array([
        [7.011336893516167e-07, 0.0, 4.577611156572906e-07],
        [0.0, 0.0, 0.0],
        [4.577611156572906e-07, 0.0, 2.988663106483834e-07],
    ])
    np.testing.assert_allclose(out.matrix(), expect, atol=1e-15)


@pytest.mark.parametrize("index", [1, 2, 3, 4])
def test_rotation_matches_explicit_product(index):
    rng = np.random.default_rng(index)
    m = rng.normal(scale=1e-6, size=(3, 3))
    eps = StrainTensor.from_matrix(m + m.T, frame="LAB")
    r = nv_rotation(index)
    got = rotate_to_nv_frame(eps, NvFrame.standard(index)).matrix()
    np.testing.assert_allclose(got, oracles.rotate_tensor(r.tolist(), eps.matrix().tolist()), atol=1e-18)


@settings(max_examples=50, deadline=None)
@given(tensors, st.sampled_from([1, 2, 3, 4]))
def test_rotation_invariants(t, index):
    lab = StrainTensor(*(getattr(t, c) for c in COMPONENTS), frame="LAB")
    nv = rotate_to_nv_frame(lab, index)
    assert nv.trace() == pytest.approx(lab.trace(), abs=1e-12)
    np.testing.assert_allclose(np.linalg.eigvalsh(nv.matrix()), np.linalg.eigvalsh(lab.matrix()), atol=1e-16)


@given(st.floats(-1e-4, 1e-4), st.sampled_from([1, 2, 3, 4]))
def test_isotropic_strain_unchanged_by_rotation(s, index):
    lab = StrainTensor(s, s, s, frame="LAB")
    np.testing.assert_allclose(rotate_to_nv_frame(lab, index).matrix(), np.eye(3) * s, atol=1e-18)


def test_rotation_requires_lab_frame():
    with pytest.raises(ValueError, match="LAB"):
        rotate_to_nv_frame(StrainTensor(e_zz=1e-6), 1)


@given(st.floats(-1e-3, 1e-3))
def test_volumetric_has_no_transverse_amplitudes(s):
    a = amplitudes_from_tensor(volumetric(s))
    assert (a.m_x, a.m_y, a.n_x, a.n_y) == (0, 0, 0, 0)
