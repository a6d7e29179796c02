"""Spin-1 algebra and the zero-field ground-state Hamiltonian under strain.

All matrices use the basis order ``|+1>, |0>, |-1>`` and all energies are
frequencies in GHz (the Hamiltonian divided by Planck's constant).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

D_GS = 2.87  # GHz, ground-state zero-field splitting
AMPLITUDE_WARN_GHZ = 0.5
TIE_RTOL = 1e-9
HERMITIAN_ATOL = 1e-9


class DegeneratePhaseError(ValueError):
    """Transverse strain vanishes, so the in-plane strain phase is undefined."""


@dataclass(frozen=True)
class SpinOperatorSet:
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray

    def __iter__(self):
        return iter((self.sx, self.sy, self.sz))


@dataclass(frozen=True)
class StrainAmplitudes:
    """Spin-strain frequencies in GHz.

    ``m_z`` shifts both ``|+-1>`` levels, ``m_x``/``m_y`` mix ``|+1>`` and
    ``|-1>``, and ``n_x``/``n_y`` couple ``|0>`` to ``|+-1>``.
    """

    m_z: float = 0.0
    m_x: float = 0.0
    m_y: float = 0.0
    n_x: float = 0.0
    n_y: float = 0.0

    def __post_init__(self):
        vals = self.as_array()
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"strain amplitudes must be finite, got {tuple(vals)}")
        if np.max(np.abs(vals)) > AMPLITUDE_WARN_GHZ:
            warnings.warn(
                "strain amplitude above 0.5 GHz; far outside the perturbative regime",
                RuntimeWarning,
                stacklevel=3,
            )

    def as_array(self) -> np.ndarray:
        return np.array([self.m_z, self.m_x, self.m_y, self.n_x, self.n_y], dtype=float)

    @property
    def m_perp(self) -> float:
        """Transverse amplitude ``sqrt(m_x**2 + m_y**2)``."""
        return math.hypot(self.m_x, self.m_y)

    def to_dict(self) -> dict:
        return {"m_z": self.m_z, "m_x": self.m_x, "m_y": self.m_y, "n_x": self.n_x, "n_y": self.n_y}


@dataclass(frozen=True)
class Hamiltonian:
    matrix: np.ndarray


@dataclass(frozen=True)
class EigenSystem:
    energies: np.ndarray  # (3,) ascending, GHz
    states: np.ndarray  # (3, 3); column k pairs with energies[k]

    def state(self, k: int) -> np.ndarray:
        return self.states[:, k]


@lru_cache(maxsize=None)
def _spin1():
    s2 = math.sqrt(2.0)
    splus = np.array([[0, s2, 0], [0, 0, s2], [0, 0, 0]], dtype=complex)
    sminus = splus.conj().T
    sx = (splus + sminus) / 2
    sy = (splus - sminus) / 2j
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    for m in (sx, sy, sz):
        m.setflags(write=False)
    return sx, sy, sz


def spin1_matrices() -> SpinOperatorSet:
    """Spin-1 matrices in the ``|+1>, |0>, |-1>`` basis."""
    sx, sy, sz = _spin1()
    return SpinOperatorSet(sx.copy(), sy.copy(), sz.copy())


def _anti(a, b):
    return a @ b + b @ a


def strain_operator_basis():
    """The five Hermitian operators multiplying ``m_z, m_x, m_y, n_x, n_y``."""
    sx, sy, sz = _spin1()
    return (
        sz @ sz,
        sy @ sy - sx @ sx,
        _anti(sx, sy),
        _anti(sx, sz),
        _anti(sy, sz),
    )


def build_hamiltonian(d: float, amps: StrainAmplitudes) -> Hamiltonian:
    """``d*Sz^2`` plus the five-term strain expansion, in GHz.

    Basis order ``|+1>, |0>, |-1>``.
    """
    if not math.isfinite(d):
        raise ValueError(f"zero-field splitting must be finite, got {d}")
    ops = strain_operator_basis()
    h = d * ops[0]
    for coeff, op in zip(amps.as_array(), ops):
        h = h + coeff * op
    return Hamiltonian(h)


def _fix_phase(vecs: np.ndarray) -> np.ndarray:
    # make the largest-magnitude component of each column real and positive;
    # near-ties (the usual case for |+1>/|-1> mixtures) go to the first index
    mag = np.abs(vecs)
    near = mag >= mag.max(axis=-2, keepdims=True) * (1 - TIE_RTOL)
    idx = np.argmax(near, axis=-2)
    pivot = np.take_along_axis(vecs, idx[..., None, :], axis=-2)
    return vecs * (np.abs(pivot) / pivot)


def eigensystem(h: Hamiltonian | np.ndarray) -> EigenSystem:
    """Full eigen-decomposition with ascending energies.

    Each eigenvector is normalised and rotated so that its largest-magnitude
    component is real and positive (the lowest index wins among components
    equal in magnitude to within 1e-9). Degenerate subspaces get whatever
    orthonormal pair LAPACK returns, under the same phase rule.
    """
    m = np.asarray(getattr(h, "matrix", h), dtype=complex)
    if m.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
    dev = np.max(np.abs(m - m.conj().T))
    if dev > HERMITIAN_ATOL * max(1.0, np.max(np.abs(m))):
        raise ValueError(f"matrix is not Hermitian (max deviation {dev:.3g})")
    m = (m + m.conj().T) / 2
    w, v = np.linalg.eigh(m)
    return EigenSystem(w, _fix_phase(v))


def batch_levels(d, amps_array) -> np.ndarray:
    """Eigenvalues for many amplitude sets at once.

    ``amps_array`` has shape (n, 5) ordered like ``StrainAmplitudes.as_array``.
    Returns ascending energies with shape (n, 3).
    """
    a = np.atleast_2d(np.asarray(amps_array, dtype=float))
    ops = np.stack(strain_operator_basis())
    h = d * ops[0] + np.einsum("nk,kij->nij", a, ops)
    return np.linalg.eigvalsh(h)


def analytic_levels(d: float, amps: StrainAmplitudes) -> tuple[float, float, float]:
    """Closed-form ``(e0, e_minus, e_plus)`` with ``n_x, n_y`` neglected."""
    centre = d + amps.m_z
    split = amps.m_perp
    return 0.0, centre - split, centre + split


def strain_phase(amps: StrainAmplitudes) -> float:
    """In-plane strain angle ``atan2(m_y, m_x)`` in (-pi, pi].

    Raises DegeneratePhaseError when both transverse amplitudes are zero.
    """
    if amps.m_x == 0.0 and amps.m_y == 0.0:
        raise DegeneratePhaseError("m_x = m_y = 0: no splitting, strain phase undefined")
    phi = math.atan2(amps.m_y, amps.m_x)
    return math.pi if phi == -math.pi else phi


def zero_field_e(amps: StrainAmplitudes) -> float:
    """Transverse zero-field parameter ``E`` implied by the strain amplitudes.

    At zero bias the transitions sit at ``D +- E``; with strain the splitting
    half-width is ``sqrt(m_x**2 + m_y**2)``, which plays the role of ``E``
    (the axial ``m_z`` shift has no counterpart in the ``D +- E`` form).
    """
    return amps.m_perp
