"""Dual-Lorentzian fitting of zero-field ODMR spectra and strain inversion.

The fit model is::

    pl(nu) = baseline - sum_k depth_k * gamma**2 / ((nu - nu_k)**2 + gamma**2)

with ``k`` in ``{+, -}``. ``depth_k`` is the peak depth of each dip, which for
a shared width equals ``a * alpha_k / gamma`` of the forward model.

Minimisation is a damped Gauss-Newton (Levenberg-Marquardt) iteration on the
normal equations, with bounds handled by projecting every trial point.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels as _default_kernels
from .spectrum import SpectrumSamples

log = logging.getLogger(__name__)

PARAM_NAMES = ("nu_plus", "nu_minus", "depth_plus", "depth_minus", "gamma", "baseline")

MIN_SAMPLES = 20
SMOOTH_WINDOW = 5
LAMBDA0 = 1e-3
LAMBDA_UP = 2.0
LAMBDA_DOWN = 3.0
LAMBDA_MAX = 1e20
FTOL = 1e-10
GTOL = 1e-12
# scale-free gradient test: cosine between residual and each Jacobian column
GCOS = 1e-4
ROUNDOFF_FACTOR = 64.0
XTOL = 1e-14
MAX_ITER = 500


class FitError(ValueError):
    """Input spectrum cannot be fitted (too short, flat, zero depth...)."""


@dataclass(frozen=True)
class FitParams:
    """Dual-Lorentzian parameters.

    ``gamma`` is the width (HWHM) of the ``+`` dip and, unless
    ``gamma_minus`` is given, of both dips.
    """

    nu_plus: float
    nu_minus: float
    depth_plus: float
    depth_minus: float
    gamma: float
    baseline: float
    gamma_minus: float | None = None

    def __post_init__(self):
        vals = self.raw()
        if not np.all(np.isfinite(vals)):
            raise ValueError("fit parameters must be finite")

    @property
    def shared_width(self) -> bool:
        return self.gamma_minus is None

    @property
    def gamma_m(self) -> float:
        return self.gamma if self.gamma_minus is None else self.gamma_minus

    def raw(self) -> np.ndarray:
        """Seven-element kernel vector ``[nu+, nu-, d+, d-, g+, g-, base]``."""
        return np.array([
            self.nu_plus, self.nu_minus, self.depth_plus, self.depth_minus,
            self.gamma, self.gamma_m, self.baseline,
        ], dtype=float)

    def free(self, shared: bool | None = None) -> np.ndarray:
        shared = self.shared_width if shared is None else shared
        p = self.raw()
        return np.delete(p, 5) if shared else p

    @classmethod
    def from_free(cls, theta, shared: bool) -> FitParams:
        t = [float(v) for v in theta]
        if shared:
            return cls(*t)
        return cls(t[0], t[1], t[2], t[3], t[4], t[6], gamma_minus=t[5])

    def is_valid(self) -> bool:
        return (self.gamma > 0 and self.gamma_m > 0 and self.depth_plus >= 0
                and self.depth_minus >= 0 and self.nu_plus >= self.nu_minus)

    def to_dict(self) -> dict:
        d = {
            "nu_plus_ghz": self.nu_plus,
            "nu_minus_ghz": self.nu_minus,
            "depth_plus": self.depth_plus,
            "depth_minus": self.depth_minus,
            "gamma_ghz": self.gamma,
            "baseline": self.baseline,
        }
        if self.gamma_minus is not None:
            d["gamma_minus_ghz"] = self.gamma_minus
        return d

    @classmethod
    def from_dict(cls, d: dict) -> FitParams:
        return cls(
            d["nu_plus_ghz"], d["nu_minus_ghz"], d["depth_plus"], d["depth_minus"],
            d["gamma_ghz"], d["baseline"], gamma_minus=d.get("gamma_minus_ghz"),
        )


@dataclass(frozen=True)
class FitResult:
    """Outcome of one fit.

    ``converged`` is only set when the projected gradient is small: its
    max-norm is below the absolute tolerance, or its largest cosine with the
    residual vector (``gradient_cosine``, unit-free) is at most 1e-4, or the
    residual itself is at the rounding level of its evaluation. A run
    whose cost or step stopped changing short of that is marked ``stalled``.
    """

    params: FitParams
    param_uncertainties: FitParams
    residual_rms: float
    iterations: int
    converged: bool
    status: str = ""
    cost: float = math.nan
    gradient_norm: float = math.nan
    gradient_cosine: float = math.nan
    covariance: np.ndarray | None = None
    correlation: np.ndarray | None = None
    jacobian_rank: int = 0
    n_points: int = 0
    cost_history: tuple = ()
    warnings: tuple = field(default=())


@dataclass(frozen=True)
class StrainEstimate:
    """Strain observables recovered from a fit.

    ``phase_sum_hat`` is ``arccos(imbalance_hat)`` in [0, pi]; the data only
    fix ``2 phi_mw + phi_str`` up to sign, so both candidates are listed and
    ``ambiguity_flag`` is set whenever they differ. ``phi_str_hat`` holds the
    matching pair of strain angles when ``phi_mw`` was supplied.
    """

    m_z_hat: float
    m_perp_hat: float
    imbalance_hat: float
    phase_sum_hat: float
    phase_sum_candidates: tuple[float, float]
    ambiguity_flag: bool
    phi_str_hat: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        d = {
            "m_z_hat_ghz": self.m_z_hat,
            "m_perp_hat_ghz": self.m_perp_hat,
            "imbalance_hat": self.imbalance_hat,
            "phase_sum_hat_rad": self.phase_sum_hat,
            "phase_sum_candidates_rad": list(self.phase_sum_candidates),
            "ambiguity_flag": self.ambiguity_flag,
        }
        if self.phi_str_hat is not None:
            d["phi_str_hat_rad"] = list(self.phi_str_hat)
        return d


# -- initial guess ------------------------------------------------------------

def _smooth(y, window=SMOOTH_WINDOW):
    half = window // 2
    padded = np.pad(y, half, mode="edge")
    return np.convolve(padded, np.ones(window) / window, mode="valid")


def noise_estimate(pl) -> float:
    """Robust point-to-point noise level from the MAD of first differences."""
    diff = np.diff(np.asarray(pl, dtype=float))
    mad = np.median(np.abs(diff - np.median(diff)))
    return float(1.4826 * mad / math.sqrt(2.0))


def _local_minima(s):
    i = np.arange(1, len(s) - 1)
    return i[(s[i] < s[i - 1]) & (s[i] <= s[i + 1])]


def _half_width(nu, s, i, level):
    """Distance from ``nu[i]`` to where ``s`` first climbs back above ``level``, per side."""
    widths = []
    for direction in (-1, 1):
        j = i
        while 0 <= j + direction < len(s) and s[j + direction] <= level:
            j += direction
        k = j + direction
        if not 0 <= k < len(s):
            continue
        # linear interpolation between the last point below and the first above
        frac = (level - s[j]) / (s[k] - s[j]) if s[k] != s[j] else 0.0
        widths.append(abs(nu[j] + frac * (nu[k] - nu[j]) - nu[i]))
    return min(widths) if widths else None


def initial_guess(samples: SpectrumSamples) -> FitParams:
    """Heuristic seed for the dual-Lorentzian fit.

    Baseline is the median of the upper quartile of the data. Dips are the
    two deepest local minima (at least two samples apart) of a 5-point
    moving average; a lone minimum seeds both dips one grid step either side.
    The width comes from the half-depth crossing of the deeper dip.
    """
    n = len(samples)
    if n < MIN_SAMPLES:
        raise FitError(f"too few samples: need at least {MIN_SAMPLES}, got {n}")
    nu, pl = samples.nu, samples.pl
    step = float(np.median(np.diff(nu)))
    baseline = float(np.median(pl[pl >= np.percentile(pl, 75)]))
    s = _smooth(pl)
    noise = noise_estimate(pl)

    mins = [int(i) for i in _local_minima(s) if s[i] < baseline - 3.0 * noise]
    if not mins:
        raise FitError("flat spectrum: no minimum below baseline - 3 x noise")
    mins.sort(key=lambda i: (s[i], i))
    first = mins[0]
    # a second minimum only counts as a separate dip if the smoothed curve
    # climbs back out of the noise between the two
    rise = 3.0 * noise / math.sqrt(SMOOTH_WINDOW)
    second = None
    for j in mins[1:]:
        a, b = sorted((first, j))
        if b - a >= 2 and s[a:b + 1].max() - max(s[a], s[b]) > rise:
            second = j
            break

    depth1 = baseline - s[first]
    hw = _half_width(nu, s, first, baseline - depth1 / 2)
    gamma = max(hw if hw else 2 * step, step)
    if nu[-1] - nu[0] < 4 * gamma:
        raise FitError("sample span covers fewer than four linewidths")

    if second is None:
        lo, hi = nu[first] - step, nu[first] + step
        dlo = dhi = depth1 / 2
    else:
        a, b = sorted((first, second))
        lo, hi = nu[a], nu[b]
        dlo, dhi = baseline - s[a], baseline - s[b]
    return FitParams(float(hi), float(lo), float(dhi), float(dlo), float(gamma), baseline)


# -- least squares ------------------------------------------------------------

def _width_map(shared: bool) -> np.ndarray:
    """Matrix taking free-parameter derivatives to the seven kernel columns."""
    if not shared:
        return np.eye(7)
    m = np.zeros((7, 6))
    for raw_i, free_i in enumerate((0, 1, 2, 3, 4, 4, 5)):
        m[raw_i, free_i] = 1.0
    return m


def _to_raw(theta, shared):
    return np.insert(theta, 5, theta[4]) if shared else theta


def _bounds(shared, gamma_min, window):
    lo = np.array([window[0], window[0], 0.0, 0.0, gamma_min, gamma_min, -np.inf])
    hi = np.array([window[1], window[1], np.inf, np.inf, np.inf, np.inf, np.inf])
    if shared:
        lo, hi = np.delete(lo, 5), np.delete(hi, 5)
    return lo, hi


def _project(theta, shared, gamma_min, window):
    t = np.array(theta, dtype=float)
    t[:2] = np.clip(t[:2], window[0], window[1])
    t[2] = max(t[2], 0.0)
    t[3] = max(t[3], 0.0)
    t[4] = max(t[4], gamma_min)
    if not shared:
        t[5] = max(t[5], gamma_min)
    if t[0] < t[1]:
        t[[0, 1]] = t[[1, 0]]
        t[[2, 3]] = t[[3, 2]]
        if not shared:
            t[[4, 5]] = t[[5, 4]]
    return t


def model_curve(nu, params: FitParams, kernels=None) -> np.ndarray:
    k = kernels or _default_kernels
    return k.dual_lorentzian(np.asarray(nu, dtype=float), params.raw())


def fit_jacobian(nu, params: FitParams, weights=None, kernels=None) -> np.ndarray:
    """Analytic Jacobian of the model with respect to the free parameters."""
    k = kernels or _default_kernels
    nu = np.asarray(nu, dtype=float)
    w = np.ones_like(nu) if weights is None else np.asarray(weights, dtype=float)
    return k.jacobian(nu, w, params.raw()) @ _width_map(params.shared_width)


def _levenberg_marquardt(evaluate, theta, bounds, project, max_iter, ftol, gtol, xtol, floor_scale, y_norm2):
    """Projected LM. Parameters sitting on a bound with the gradient pointing
    outward are frozen for the step; the convergence test uses the projected
    gradient."""
    lo, hi = bounds
    cost, A, g = evaluate(theta)
    lam = LAMBDA0
    history = [cost]
    status, converged = "max_iter", False
    it = 0
    pg = g
    for it in range(1, max_iter + 1):
        active = ((theta <= lo) & (g < 0)) | ((theta >= hi) & (g > 0))
        pg = np.where(active, 0.0, g)
        if np.max(np.abs(pg)) < gtol:
            status, converged = "gradient", True
            break
        free = ~active
        Af = A[np.ix_(free, free)]
        diag = np.diag(Af).copy()
        floor = 1e-12 * max(diag.max(), 1e-300)
        diag[diag < floor] = floor
        delta = np.zeros_like(theta)
        try:
            delta[free] = np.linalg.solve(Af + lam * np.diag(diag), g[free])
        except np.linalg.LinAlgError:
            lam *= LAMBDA_UP
            continue
        trial = project(theta + delta)
        moved = np.abs(trial - theta)
        if np.all(moved <= xtol * np.maximum(np.abs(theta), floor_scale)):
            status, converged = "step", True
            break
        c_new, A_new, g_new = evaluate(trial)
        if np.isfinite(c_new) and c_new <= cost:
            rel = (cost - c_new) / cost if cost > 0 else 0.0
            theta, cost, A, g = trial, c_new, A_new, g_new
            history.append(cost)
            lam /= LAMBDA_DOWN
            if rel < ftol:
                status, converged = "cost", True
                break
        else:
            lam *= LAMBDA_UP
            if lam > LAMBDA_MAX:
                status = "damping"
                break
    active = ((theta <= lo) & (g < 0)) | ((theta >= hi) & (g > 0))
    pg = np.where(active, 0.0, g)
    cos, stationary = _stationarity(A, pg, cost, y_norm2)
    if converged and status != "gradient" and not (np.max(np.abs(pg)) < gtol or stationary):
        # the cost or the step stopped moving away from a stationary point
        status, converged = "stalled", False
    return theta, cost, pg, it, status, converged, history, cos


def _stationarity(A, g, cost, y_norm2):
    """Unit-free gradient test.

    Returns the largest cosine between the residual vector and a Jacobian
    column, ``|g_j| / sqrt(A_jj cost)``, and whether it is small enough:
    at most ``GCOS`` plus the rounding floor of evaluating the residual,
    ``ROUNDOFF_FACTOR * eps * |y| / |r|``. Without that floor a fit to exact
    data, whose residual is pure rounding error, could never pass.
    """
    diag = np.clip(np.diag(A), 0.0, None)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where(diag * cost > 0, np.abs(g) / np.sqrt(diag * max(cost, 0.0)), 0.0)
    floor = ROUNDOFF_FACTOR * np.finfo(float).eps * math.sqrt(y_norm2 / cost) if cost > 0 else np.inf
    worst = float(np.max(cos))
    return worst, worst <= GCOS + floor


def _residual_seed(nu, y, theta, shared, k):
    """Re-seed from a previous optimum: keep its stronger dip, add one at the residual minimum."""
    raw = _to_raw(theta, shared)
    r = y - k.dual_lorentzian(nu, raw)
    resid = _smooth(r)
    j = int(np.argmin(resid))
    # nothing left to explain once the first optimum matches the data to roundoff
    if resid[j] >= -1e-9 * abs(raw[6]):
        return None
    main = 0 if raw[2] >= raw[3] else 1
    centre = raw[main]
    depth = raw[6] - float(k.dual_lorentzian(np.array([centre]), raw)[0])
    seed = np.array([centre, nu[j], depth, -resid[j], raw[4 + main], raw[4 + main], raw[6]])
    return np.delete(seed, 5) if shared else seed


def fit_dual_lorentzian(
    samples: SpectrumSamples,
    guess: FitParams | None = None,
    *,
    shared_width: bool = True,
    max_iter: int = MAX_ITER,
    ftol: float = FTOL,
    gtol: float = GTOL,
    xtol: float = XTOL,
    kernels=None,
) -> FitResult:
    """Least-squares fit of two Lorentzian dips to ``samples``.

    Parameters
    ----------
    samples
        Spectrum to fit. When ``samples.sigma`` is present, residuals are
        weighted by ``1/sigma`` and uncertainties are absolute.
    guess
        Starting point. When omitted the fit starts from
        :func:`initial_guess` and is then restarted once with the weaker dip
        re-seeded at the largest remaining residual dip; the lower-cost
        optimum is kept.
    shared_width
        Fit one width for both dips (default) or one per dip.
    kernels
        Kernel backend module; defaults to the one chosen at import.

    Returns
    -------
    FitResult
        Best parameters found. ``converged`` is False when the iteration cap
        was reached or the damping ran away; the parameters are then the
        best-so-far.
    """
    k = kernels or _default_kernels
    nu, y = samples.nu, samples.pl
    w = np.ones_like(nu) if samples.sigma is None else 1.0 / samples.sigma
    step = float(np.median(np.diff(nu)))
    gamma_min = step / 10.0
    y_norm2 = float(np.sum((w * y) ** 2))

    restart = guess is None
    if guess is None:
        guess = initial_guess(samples)
    if shared_width and not guess.shared_width:
        guess = FitParams(*guess.free(shared=True))
    elif not shared_width and guess.shared_width:
        g = guess
        guess = FitParams(g.nu_plus, g.nu_minus, g.depth_plus, g.depth_minus, g.gamma, g.baseline,
                          gamma_minus=g.gamma)
    shared = shared_width
    wmap = _width_map(shared)

    def evaluate(theta):
        cost, a, g = k.normal_equations(nu, y, w, _to_raw(theta, shared))
        return cost, wmap.T @ a @ wmap, wmap.T @ g

    def project(theta):
        return _project(theta, shared, gamma_min, (nu[0], nu[-1]))

    bounds = _bounds(shared, gamma_min, (nu[0], nu[-1]))

    def run(theta0):
        return _levenberg_marquardt(evaluate, project(theta0), bounds, project,
                                    max_iter, ftol, gtol, xtol, gamma_min, y_norm2)

    best = run(guess.free(shared))
    if restart:
        seed = _residual_seed(nu, y, best[0], shared, k)
        if seed is not None:
            alt = run(seed)
            # prefer converged runs, then lower cost
            if (alt[5], -alt[1]) > (best[5], -best[1]):
                best = alt
    theta, cost, g, it, status, converged, history, cos = best

    params = FitParams.from_free(theta, shared)
    jac = k.jacobian(nu, w, params.raw()) @ wmap
    n, p = jac.shape
    rank = int(np.linalg.matrix_rank(jac))
    notes = []
    if rank < p:
        notes.append(f"rank-deficient Jacobian (rank {rank} of {p})")
    jtj = jac.T @ jac
    scale = 1.0 if samples.sigma is not None else cost / max(n - p, 1)
    cov = scale * np.linalg.pinv(jtj)
    cov = (cov + cov.T) / 2
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = cov / np.outer(sig, sig)
    corr[~np.isfinite(corr)] = 0.0
    resid = y - k.dual_lorentzian(nu, params.raw())
    if not converged:
        notes.append(f"fit did not converge ({status})")
        log.warning("dual-Lorentzian fit did not converge after %d iterations (%s)", it, status)
    return FitResult(
        params=params,
        param_uncertainties=FitParams.from_free(sig, shared),
        residual_rms=float(np.sqrt(np.mean(resid * resid))),
        iterations=it,
        converged=converged,
        status=status,
        cost=float(cost),
        gradient_norm=float(np.max(np.abs(g))),
        gradient_cosine=cos,
        covariance=cov,
        correlation=corr,
        jacobian_rank=rank,
        n_points=n,
        cost_history=tuple(history),
        warnings=tuple(notes),
    )


def _fit_one(args):
    samples, kw = args
    return fit_dual_lorentzian(samples, **kw)


def fit_batch(spectra, jobs: int | None = None, **kw) -> list[FitResult]:
    """Fit many spectra, in parallel when ``jobs != 1``; results keep input order."""
    spectra = list(spectra)
    if jobs == 1 or len(spectra) < 2:
        return [fit_dual_lorentzian(s, **kw) for s in spectra]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_fit_one, [(s, kw) for s in spectra]))


# -- inversion ----------------------------------------------------------------

def _wrap(angle):
    a = math.remainder(angle, 2 * math.pi)
    return math.pi if a == -math.pi else a


def invert_to_strain(
    fit: FitResult | FitParams,
    d: float,
    phi_mw: float | None = None,
    *,
    require_converged: bool = True,
) -> StrainEstimate:
    """Convert fitted dip positions and depths into strain observables.

    Only the shift, the transverse magnitude and the dip imbalance are
    recoverable; the six tensor components are not determined by three
    observables and no reconstruction is attempted.
    """
    if isinstance(fit, FitResult):
        if require_converged and not fit.converged:
            raise FitError("fit did not converge; pass require_converged=False to invert anyway")
        p = fit.params
    else:
        p = fit
    if p.shared_width:
        wp, wm = p.depth_plus, p.depth_minus
    else:
        # spectral weight of each dip is depth * width
        wp, wm = p.depth_plus * p.gamma, p.depth_minus * p.gamma_m
    total = wp + wm
    if total <= 0:
        raise FitError("zero total dip depth; imbalance undefined")
    imbalance = min(1.0, max(-1.0, (wp - wm) / total))
    phase = math.acos(imbalance)
    candidates = (phase, _wrap(-phase))
    ambiguous = not (phase == 0.0 or phase == math.pi)
    phi_str = None
    if phi_mw is not None:
        phi_str = tuple(_wrap(c - 2.0 * phi_mw) for c in candidates)
    return StrainEstimate(
        m_z_hat=(p.nu_plus + p.nu_minus) / 2.0 - d,
        m_perp_hat=(p.nu_plus - p.nu_minus) / 2.0,
        imbalance_hat=imbalance,
        phase_sum_hat=phase,
        phase_sum_candidates=candidates,
        ambiguity_flag=ambiguous,
        phi_str_hat=phi_str,
    )
