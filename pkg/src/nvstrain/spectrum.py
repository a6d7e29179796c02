"""Forward model of the zero-field CW-ODMR spectrum of a strained NV center."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spin import D_GS, DegeneratePhaseError, StrainAmplitudes, strain_phase

DEFAULT_SPAN_GHZ = 0.03
DEFAULT_POINTS = 601


@dataclass(frozen=True)
class SpectrumSamples:
    """Frequencies (GHz, strictly increasing) with normalised PL values."""

    nu: np.ndarray
    pl: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        nu = np.asarray(self.nu, dtype=float)
        pl = np.asarray(self.pl, dtype=float)
        if nu.ndim != 1 or nu.shape != pl.shape:
            raise ValueError("nu and pl must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(nu)) and np.all(np.isfinite(pl))):
            raise ValueError("samples must be finite")
        if np.any(np.diff(nu) <= 0):
            bad = int(np.argmax(np.diff(nu) <= 0)) + 1
            raise ValueError(f"frequencies must be strictly increasing (sample {bad})")
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "pl", pl)
        if self.sigma is not None:
            s = np.asarray(self.sigma, dtype=float)
            if s.shape != nu.shape or np.any(~np.isfinite(s)) or np.any(s <= 0):
                raise ValueError("sigma must be positive and match the samples")
            object.__setattr__(self, "sigma", s)

    def __len__(self):
        return self.nu.shape[0]


@dataclass(frozen=True)
class SpectrumModel:
    """Parameters of ``f(nu) = baseline - a [alpha_+ L(nu - nu_+) + alpha_- L(nu - nu_-)]``.

    ``L`` is the un-normalised Lorentzian ``gamma / (x**2 + gamma**2)`` with
    half-width ``gamma``, so ``a / gamma`` is the depth a lone dip of full
    weight would have. ``phase_sign`` selects ``2 phi_mw + phase_sign * phi_str``
    in the transition weights; +1 is the default convention.
    """

    amps: StrainAmplitudes = field(default_factory=StrainAmplitudes)
    d: float = D_GS
    phi_mw: float = 0.0
    gamma: float = 2e-3
    a: float = 4e-4
    baseline: float = 1.0
    phase_sign: int = 1

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not (self.a > 0 and math.isfinite(self.a)):
            raise ValueError(f"amplitude a must be positive, got {self.a}")
        if self.a / self.gamma > self.baseline:
            raise ValueError("a / gamma exceeds the baseline; the spectrum would go negative")
        if self.phase_sign not in (1, -1):
            raise ValueError("phase_sign must be +1 or -1")

    @classmethod
    def from_depth(cls, depth: float, gamma: float, **kw) -> SpectrumModel:
        """Build with the dimensionless full-weight dip depth ``a / gamma``."""
        return cls(gamma=gamma, a=depth * gamma, **kw)

    @property
    def depth(self) -> float:
        return self.a / self.gamma

    def to_dict(self) -> dict:
        return {
            "d_ghz": self.d,
            "amplitudes_ghz": self.amps.to_dict(),
            "phi_mw_rad": self.phi_mw,
            "gamma_ghz": self.gamma,
            "a": self.a,
            "depth": self.depth,
            "baseline": self.baseline,
            "phase_sign": self.phase_sign,
        }


@dataclass(frozen=True)
class StrainMetrics:
    shift: float  # GHz
    splitting: float  # GHz
    imbalance: float | None
    degenerate: bool = False


def transition_frequencies(d: float, amps: StrainAmplitudes) -> tuple[float, float]:
    """``(nu_minus, nu_plus)`` in GHz."""
    centre = d + amps.m_z
    half = amps.m_perp
    return centre - half, centre + half


def transition_amplitudes(phi_mw: float, phi_str: float, phase_sign: int = 1) -> tuple[float, float]:
    """Relative weights ``(alpha_plus, alpha_minus)``; they sum to one."""
    c = math.cos(2.0 * phi_mw + phase_sign * phi_str)
    # alpha_minus as 1 - alpha_plus keeps the sum exact in floating point
    ap = (1.0 + c) / 2.0
    return ap, 1.0 - ap


def lorentzian(nu, gamma):
    """``gamma / (nu**2 + gamma**2)``; peak ``1/gamma``, half maximum at ``+-gamma``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    nu = np.asarray(nu, dtype=float)
    out = gamma / (nu * nu + gamma * gamma)
    return float(out) if out.ndim == 0 else out


def default_grid(center: float = D_GS, span: float = DEFAULT_SPAN_GHZ, points: int = DEFAULT_POINTS) -> np.ndarray:
    """Uniform grid over ``center +- span``."""
    if points < 2 or span <= 0:
        raise ValueError("grid needs at least two points and a positive span")
    return np.linspace(center - span, center + span, points)


def dip_weights(model: SpectrumModel):
    """Return ``(nu_minus, nu_plus, alpha_plus, alpha_minus, degenerate)``."""
    nu_m, nu_p = transition_frequencies(model.d, model.amps)
    try:
        phi_str = strain_phase(model.amps)
    except DegeneratePhaseError:
        return nu_m, nu_p, 1.0, 0.0, True
    ap, am = transition_amplitudes(model.phi_mw, phi_str, model.phase_sign)
    return nu_m, nu_p, ap, am, False


def synthesize(model: SpectrumModel, grid=None) -> SpectrumSamples:
    """Evaluate the model spectrum on ``grid`` (default: 601 points over D +- 30 MHz).

    With no transverse strain the two transitions coincide and a single dip of
    full weight is emitted at ``d + m_z``.
    """
    nu = default_grid(model.d) if grid is None else np.asarray(grid, dtype=float)
    if nu.ndim != 1 or np.any(np.diff(nu) <= 0):
        raise ValueError("grid must be strictly increasing")
    nu_m, nu_p, ap, am, degenerate = dip_weights(model)
    if degenerate:
        dip = lorentzian(nu - nu_p, model.gamma)
    else:
        dip = ap * lorentzian(nu - nu_p, model.gamma) + am * lorentzian(nu - nu_m, model.gamma)
    return SpectrumSamples(nu, model.baseline - model.a * dip)


def metrics(model: SpectrumModel) -> StrainMetrics:
    """Shift, splitting and dip imbalance of the model.

    These are identities of the forward model, so they are evaluated from the
    amplitudes directly rather than by differencing the transition frequencies
    (which would lose ~1e-13 relative to cancellation against ``d``).
    """
    shift = model.amps.m_z
    splitting = 2.0 * model.amps.m_perp
    try:
        phi_str = strain_phase(model.amps)
    except DegeneratePhaseError:
        return StrainMetrics(shift, splitting, None, degenerate=True)
    ap, am = transition_amplitudes(model.phi_mw, phi_str, model.phase_sign)
    return StrainMetrics(shift, splitting, (ap - am) / (ap + am))
