"""NV axis / optical dipole geometry and single-shot readout fidelity."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# (theta, phi) in degrees for e_nv, d1, d2 of the four NV orientations
# under a [100] surface, as tabulated alongside their Cartesian components.
TABLE_ANGLES_DEG = {
    1: ((123.14, 254.14), (90.00, 164.14), (146.86, 74.14)),
    2: ((53.98, 162.81), (90.00, 72.81), (143.98, 162.81)),
    3: ((126.64, 72.75), (90.00, 342.75), (143.36, 252.75)),
    4: ((57.80, 343.79), (90.00, 253.79), (147.8, 343.79)),
}

TABLE_VECTORS = {
    1: ((-0.229, -0.805, -0.547), (-0.962, 0.273, 0.0), (0.149, 0.526, -0.837)),
    2: ((-0.773, 0.239, 0.588), (0.296, 0.955, -0.0), (-0.562, 0.174, -0.809)),
    3: ((0.238, 0.766, -0.597), (0.955, -0.297, 0.0), (-0.177, -0.57, -0.802)),
    4: ((0.813, -0.236, 0.533), (-0.279, -0.96, 0.0), (0.512, -0.149, -0.846)),
}


@dataclass(frozen=True)
class NvOrientation:
    index: int
    e_nv: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    theta: float  # degrees
    phi: float  # degrees

    def to_dict(self) -> dict:
        angles = TABLE_ANGLES_DEG.get(self.index)
        out = {
            "index": self.index,
            "theta_deg": self.theta,
            "phi_deg": self.phi,
            "e_nv": [float(v) for v in self.e_nv],
            "d1": [float(v) for v in self.d1],
            "d2": [float(v) for v in self.d2],
        }
        if angles is not None:
            out["d1_angles_deg"] = list(angles[1])
            out["d2_angles_deg"] = list(angles[2])
        return out


@dataclass(frozen=True)
class FidelityPoint:
    n_avg: float
    contrast: float
    fidelity: float


def nv_axis(theta: float, phi: float) -> np.ndarray:
    """Unit vector at polar angle ``theta`` and azimuth ``phi`` (radians)."""
    st = math.sin(theta)
    return np.array([st * math.cos(phi), st * math.sin(phi), math.cos(theta)])


def dipoles(theta: float, phi: float) -> tuple[np.ndarray, np.ndarray]:
    """The two optical dipole directions perpendicular to the NV axis.

    ``d1`` lies in the lab xy-plane; ``d2 = -(e_nv x d1)``. At the poles
    (theta = 0 or pi) ``d1`` is still fixed by the supplied ``phi``.
    """
    sp, cp = math.sin(phi), math.cos(phi)
    ct, st = math.cos(theta), math.sin(theta)
    d1 = np.array([-sp, cp, 0.0])
    d2 = np.array([ct * cp, ct * sp, -st])
    return d1, d2


def standard_orientations() -> list[NvOrientation]:
    """The four NV orientations of a [100]-cut diamond.

    Every vector is rebuilt from its own tabulated spherical angles. The
    in-plane dipole ``d1`` therefore carries the tabulated sign, which is
    opposite to ``dipoles(theta, phi)[0]`` for the axis angles; a dipole
    axis has no intrinsic sign, so both describe the same orientation.
    """
    out = []
    for idx, (axis, a1, a2) in TABLE_ANGLES_DEG.items():
        th, ph = (math.radians(v) for v in axis)
        out.append(
            NvOrientation(
                index=idx,
                e_nv=nv_axis(th, ph),
                d1=nv_axis(*map(math.radians, a1)),
                d2=nv_axis(*map(math.radians, a2)),
                theta=axis[0],
                phi=axis[1],
            )
        )
    return out


def nv_rotation(index: int) -> np.ndarray:
    """Rotation taking lab-frame vectors into the frame of NV ``index``.

    Rows are the NV-frame axes expressed in the lab frame: x along the
    ``d2`` dipole, z along ``e_nv``, y completing a right-handed triad.
    Built from the exact axis angles so the result is orthogonal to
    rounding error.
    """
    if index not in TABLE_ANGLES_DEG:
        raise ValueError(f"NV orientation index must be 1..4, got {index}")
    th, ph = (math.radians(v) for v in TABLE_ANGLES_DEG[index][0])
    z = nv_axis(th, ph)
    _, x = dipoles(th, ph)
    y = np.cross(z, x)
    return np.vstack([x, y, z])


def readout_fidelity(contrast: float, n_avg) -> float | np.ndarray:
    """``C sqrt(n) / sqrt(C^2 n + 1)`` for photon count ``n`` and contrast ``C``."""
    if not 0.0 <= contrast <= 1.0:
        raise ValueError(f"contrast must lie in [0, 1], got {contrast}")
    n = np.asarray(n_avg, dtype=float)
    if np.any(n < 0):
        raise ValueError("n_avg must be non-negative")
    f = contrast * np.sqrt(n) / np.sqrt(contrast * contrast * n + 1.0)
    return float(f) if f.ndim == 0 else f


def fidelity_curve(contrast: float, n_grid) -> list[FidelityPoint]:
    n = np.asarray(n_grid, dtype=float)
    if n.ndim != 1 or np.any(n < 0) or np.any(np.diff(n) < 0):
        raise ValueError("n_grid must be a non-negative ascending sequence")
    f = readout_fidelity(contrast, n)
    return [FidelityPoint(float(a), float(contrast), float(b)) for a, b in zip(n, np.atleast_1d(f))]
