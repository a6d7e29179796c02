"""Strain tensors, spin-strain couplings and the canonical strain scenarios."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import nv_rotation
from .spin import StrainAmplitudes

COMPONENTS = ("e_xx", "e_yy", "e_zz", "e_xy", "e_xz", "e_yz")
FRAMES = ("NV", "LAB")
STRAIN_WARN = 1e-2


@dataclass(frozen=True)
class StrainTensor:
    """Symmetric strain (tensor shears, not engineering shears)."""

    e_xx: float = 0.0
    e_yy: float = 0.0
    e_zz: float = 0.0
    e_xy: float = 0.0
    e_xz: float = 0.0
    e_yz: float = 0.0
    frame: str = "NV"

    def __post_init__(self):
        if self.frame not in FRAMES:
            raise ValueError(f"frame must be one of {FRAMES}, got {self.frame!r}")
        vals = np.array([getattr(self, c) for c in COMPONENTS], dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError("strain components must be finite")
        if np.max(np.abs(vals)) > STRAIN_WARN:
            warnings.warn("strain component above 1e-2; diamond fractures well below this",
                          RuntimeWarning, stacklevel=3)

    @classmethod
    def from_matrix(cls, m, frame="NV") -> StrainTensor:
        m = np.asarray(m, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got {m.shape}")
        s = (m + m.T) / 2
        return cls(s[0, 0], s[1, 1], s[2, 2], s[0, 1], s[0, 2], s[1, 2], frame=frame)

    def matrix(self) -> np.ndarray:
        return np.array([
            [self.e_xx, self.e_xy, self.e_xz],
            [self.e_xy, self.e_yy, self.e_yz],
            [self.e_xz, self.e_yz, self.e_zz],
        ])

    def trace(self) -> float:
        return self.e_xx + self.e_yy + self.e_zz

    def __add__(self, other):
        if not isinstance(other, StrainTensor) or other.frame != self.frame:
            return NotImplemented
        return StrainTensor(*(getattr(self, c) + getattr(other, c) for c in COMPONENTS), frame=self.frame)

    def scaled(self, k: float) -> StrainTensor:
        return StrainTensor(*(k * getattr(self, c) for c in COMPONENTS), frame=self.frame)

    def to_dict(self) -> dict:
        d = {c: float(getattr(self, c)) for c in COMPONENTS}
        d["frame"] = self.frame
        return d

    @classmethod
    def from_dict(cls, d: dict) -> StrainTensor:
        unknown = set(d) - set(COMPONENTS) - {"frame"}
        if unknown:
            raise ValueError(f"unknown strain tensor key: {sorted(unknown)[0]}")
        return cls(**{c: float(d.get(c, 0.0)) for c in COMPONENTS}, frame=d.get("frame", "NV"))


@dataclass(frozen=True)
class CouplingConstants:
    """Spin-strain couplings in GHz per unit strain.

    ``uncertainty`` holds the quoted one-sigma errors; only the central
    values enter any computation.
    """

    h41: float = -6.42
    h43: float = 2.3
    h15: float = 5.7
    h16: float = 19.66
    h25: float = -2.6
    h26: float = -2.83
    uncertainty: dict = field(
        default_factory=lambda: {
            "h41": 0.09, "h43": 0.2, "h15": 0.2, "h16": 0.09, "h25": 0.08, "h26": 0.07,
        },
        compare=False,
    )


@dataclass(frozen=True)
class NvFrame:
    index: int
    rotation: np.ndarray

    @classmethod
    def standard(cls, index: int) -> NvFrame:
        return cls(index, nv_rotation(index))


def default_couplings() -> CouplingConstants:
    return CouplingConstants()


def amplitudes_from_tensor(eps: StrainTensor, c: CouplingConstants | None = None) -> StrainAmplitudes:
    """Contract an NV-frame strain tensor with the spin-strain couplings.

    The ``(e_xx - e_yy)`` anisotropy enters ``m_x`` and ``n_x`` with a net
    factor 1/4 (a half inside the half-bracket).
    """
    if eps.frame != "NV":
        raise ValueError("strain tensor must be in the NV frame; rotate it with rotate_to_nv_frame first")
    c = c or default_couplings()
    aniso = eps.e_xx - eps.e_yy
    m_z = c.h41 * (eps.e_xx + eps.e_yy) + c.h43 * eps.e_zz
    m_x = 0.5 * (c.h16 * eps.e_xz - 0.5 * c.h15 * aniso)
    m_y = 0.5 * (c.h16 * eps.e_yz + c.h15 * eps.e_xy)
    n_x = 0.5 * (c.h26 * eps.e_xz - 0.5 * c.h25 * aniso)
    n_y = 0.5 * (c.h26 * eps.e_yz + c.h25 * eps.e_xy)
    return StrainAmplitudes(m_z=m_z, m_x=m_x, m_y=m_y, n_x=n_x, n_y=n_y)


def rotate_to_nv_frame(eps: StrainTensor, frame: NvFrame | int) -> StrainTensor:
    """``R eps R^T`` with ``R`` the lab-to-NV rotation."""
    if eps.frame != "LAB":
        raise ValueError("expected a LAB-frame strain tensor")
    if isinstance(frame, int):
        frame = NvFrame.standard(frame)
    r = frame.rotation
    return StrainTensor.from_matrix(r @ eps.matrix() @ r.T, frame="NV")


def volumetric(eps: float) -> StrainTensor:
    """Isotropic strain with trace ``eps`` shared equally by the diagonal."""
    return StrainTensor(eps / 3, eps / 3, eps / 3)


def shear_yz(e_yz: float) -> StrainTensor:
    return StrainTensor(e_yz=e_yz)


def shear_xy(e_xx: float, e_yy: float, e_xy: float) -> StrainTensor:
    return StrainTensor(e_xx=e_xx, e_yy=e_yy, e_xy=e_xy)


SCENARIOS = {"volumetric": volumetric, "shear_yz": shear_yz, "shear_xy": shear_xy}


def scenario(kind: str, *args: float) -> StrainTensor:
    """Build one of the canonical NV-frame strain scenarios by name."""
    try:
        fn = SCENARIOS[kind]
    except KeyError:
        raise ValueError(f"unknown scenario {kind!r}; expected one of {sorted(SCENARIOS)}") from None
    if not all(math.isfinite(a) for a in args):
        raise ValueError("scenario arguments must be finite")
    return fn(*args)
