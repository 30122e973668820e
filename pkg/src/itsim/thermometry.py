"""Rabi-flopping thermometry on carrier and motional sidebands.

Conventions: the ion starts in the lower internal state, ``P(t)`` is the
probability of having left it, and a single Fock component flops as
``sin^2(Omega_n t / 2)`` (a pi pulse lasts pi / Omega_n).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special, stats

from .constants import DomainError

TRANSITIONS = {"carrier": 0, "blue": 1, "red": -1}
TAIL_TOL = 1e-9
DEFAULT_ETA = 0.24


class TruncationError(ValueError):
    """Fock-space cutoff too small for the requested distribution."""


class FitError(RuntimeError):
    """Least-squares fit failed to converge."""


def _delta(transition):
    try:
        return TRANSITIONS[transition]
    except KeyError:
        raise DomainError(f"unknown transition {transition!r}; use carrier, blue or red") from None


def laguerre_table(n_max, alpha, x):
    """Generalised Laguerre values L_0^alpha(x) .. L_{n_max}^alpha(x) for scalar ``x``.

    Upward three-term recurrence
    ``(k+1) L_{k+1} = (2k + 1 + alpha - x) L_k - (k + alpha) L_{k-1}``,
    stable for the small arguments (x = eta^2) met here.
    """
    out = np.empty(n_max + 1)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = 1.0 + alpha - x
    for k in range(1, n_max):
        out[k + 1] = ((2 * k + 1 + alpha - x) * out[k] - (k + alpha) * out[k - 1]) / (k + 1)
    return out


def genlaguerre(n, alpha, x):
    """Single value L_n^alpha(x) from :func:`laguerre_table`."""
    return float(laguerre_table(int(n), alpha, float(x))[-1])


def genlaguerre_sum(n, alpha, x):
    """Explicit sum  sum_k (-1)^k C(n+alpha, n-k) x^k / k!  (cross-check for the recurrence)."""
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    for k in range(n + 1):
        total = total + (-1) ** k * special.binom(n + alpha, n - k) * x**k / math.factorial(k)
    return total


def fock_rabi_rate(n, transition, eta, omega0):
    """Rabi rate (rad/s) coupling |n> to |n + delta> for delta = 0, +1, -1.

    Omega0 e^{-eta^2/2} eta^|d| sqrt(n_<! / n_>!) L_{n_<}^{|d|}(eta^2). The sign
    of the Laguerre factor is kept; red-sideband rates from n = 0 are 0.
    Accepts an integer array for ``n``.
    """
    d = _delta(transition)
    if not 0 < eta < 1:
        raise DomainError(f"Lamb-Dicke parameter must lie in (0, 1), got {eta!r}")
    n_arr = np.asarray(n)
    if np.any(n_arr < 0):
        raise DomainError("Fock number must be non-negative")
    n_arr = n_arr.astype(np.int64)
    ad = abs(d)
    # n_< is the lower Fock number of the coupled pair
    n_lo = n_arr - 1 if d < 0 else n_arr
    top = int(np.max(n_lo, initial=0))
    lag = laguerre_table(max(top, 0), ad, eta**2)
    k = np.maximum(n_lo, 0)
    ratio = np.exp(0.5 * (special.gammaln(k + 1) - special.gammaln(k + ad + 1)))
    out = omega0 * math.exp(-0.5 * eta**2) * eta**ad * ratio * lag[k]
    out = np.where(n_lo < 0, 0.0, out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FockDistribution:
    probs: np.ndarray
    kind: str
    nbar: float
    meta: dict = field(default_factory=dict)

    @property
    def n_max(self):
        return self.probs.size - 1

    @property
    def mean(self):
        return float(np.dot(np.arange(self.probs.size), self.probs))


def _tail(kind, nbar, n_max):
    if nbar == 0:
        return 0.0
    if kind == "thermal":
        return (nbar / (nbar + 1.0)) ** (n_max + 1)
    return float(stats.poisson.sf(n_max, nbar))


def _auto_nmax(kind, nbar):
    if nbar == 0:
        return 0
    if kind == "thermal":
        return int(math.ceil(math.log(TAIL_TOL) / math.log(nbar / (nbar + 1.0))))
    return int(stats.poisson.isf(TAIL_TOL, nbar)) + 1


def make_distribution(kind, nbar, n_max=None):
    """Thermal or coherent Fock distribution, renormalised after truncation.

    With ``n_max`` omitted the smallest cutoff with tail mass below 1e-9 is
    used; an explicit ``n_max`` with a larger tail raises
    :class:`TruncationError`. The discarded mass is kept in ``meta``.
    """
    if kind not in ("thermal", "coherent"):
        raise DomainError(f"kind must be 'thermal' or 'coherent', got {kind!r}")
    if not nbar >= 0:
        raise DomainError(f"nbar must be non-negative, got {nbar!r}")
    if n_max is None:
        n_max = _auto_nmax(kind, nbar)
    tail = _tail(kind, nbar, n_max)
    if tail > TAIL_TOL:
        raise TruncationError(f"tail mass {tail:.3g} beyond n_max={n_max} exceeds {TAIL_TOL}; raise n_max")
    n = np.arange(n_max + 1)
    if nbar == 0:
        p = (n == 0).astype(float)
    elif kind == "thermal":
        p = np.exp(n * math.log(nbar) - (n + 1) * math.log1p(nbar))
    else:
        p = stats.poisson.pmf(n, nbar)
    raw = p.sum()
    return FockDistribution(p / raw, kind, float(nbar), {"truncated_mass": float(tail), "raw_sum": float(raw)})


def arbitrary_distribution(probs):
    p = np.asarray(probs, dtype=float)
    if np.any(p < 0) or not abs(p.sum() - 1.0) <= 1e-9:
        raise DomainError("populations must be non-negative and sum to 1")
    return FockDistribution(p, "arbitrary", float(np.dot(np.arange(p.size), p)))


@dataclass(frozen=True)
class FloppingCurve:
    times: np.ndarray
    populations: np.ndarray
    transition: str
    eta: float
    omega0: float


def _design(times, transition, eta, omega0, n_max):
    rates = fock_rabi_rate(np.arange(n_max + 1), transition, eta, omega0)
    return np.sin(0.5 * np.outer(np.asarray(times, dtype=float), rates)) ** 2


def flopping_curve(dist, times, transition="blue", eta=DEFAULT_ETA, omega0=1.0):
    """Population transferred after driving ``transition`` for each time in ``times``."""
    times = np.asarray(times, dtype=float)
    pop = _design(times, transition, eta, omega0, dist.n_max) @ dist.probs
    return FloppingCurve(times, np.clip(pop, 0.0, 1.0), transition, eta, omega0)


@dataclass(frozen=True)
class NbarFit:
    nbar: float
    residual: float
    assumption: str
    probs: np.ndarray | None = None
    ill_conditioned: bool = False


def _fit_parametric(t, p, kind, transition, eta, omega0, nbar_max):
    # one design matrix wide enough for every candidate nbar in range
    a = _design(t, transition, eta, omega0, _auto_nmax(kind, nbar_max))

    def sse(nb):
        d = make_distribution(kind, nb)
        model = np.clip(a[:, : d.n_max + 1] @ d.probs, 0.0, 1.0)
        return float(np.sum((model - p) ** 2))

    # coarse grid brackets the global minimum, bounded Brent polishes it
    grid = np.concatenate([[0.0], np.geomspace(1e-3, nbar_max, 160)])
    vals = np.array([sse(g) for g in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    if hi == lo:
        return float(grid[i]), vals[i]
    res = optimize.minimize_scalar(sse, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10, "maxiter": 500})
    if not res.success:
        raise FitError(f"{kind} fit did not converge: {res.message}")
    if vals[i] < res.fun:
        return float(grid[i]), vals[i]
    return float(res.x), float(res.fun)


def _fit_arbitrary(t, p, transition, eta, omega0, n_max):
    a = _design(t, transition, eta, omega0, n_max)
    # simplex constraint: non-negativity via NNLS, normalisation via a heavily weighted row
    w = 1e3 * max(np.linalg.norm(a, 2), 1.0)
    aa = np.vstack([a, w * np.ones(n_max + 1)])
    bb = np.concatenate([p, [w]])
    probs, _ = optimize.nnls(aa, bb, maxiter=50 * (n_max + 1))
    probs = probs / probs.sum()
    cond = np.linalg.cond(a)
    ill = bool(not np.isfinite(cond) or cond > 1e8)
    if ill:
        warnings.warn(f"arbitrary-state fit is ill-conditioned (cond = {cond:.3g})", RuntimeWarning)
    return probs, ill


def fit_nbar(times, populations, assumption="thermal", eta=DEFAULT_ETA, omega0=1.0, transition="blue",
             n_max=30, nbar_max=150.0):
    """Least-squares estimate of nbar from a flopping curve.

    Parameters
    ----------
    assumption : {'thermal', 'coherent', 'arbitrary'}
        Thermal and coherent fits are 1-D searches over nbar. The arbitrary fit
        solves for populations p_0..p_n_max on the probability simplex and
        reports sum n p_n.

    Returns
    -------
    NbarFit
        Estimate, RMS residual and, for 'arbitrary', the fitted populations.
    """
    t = np.asarray(times, dtype=float)
    p = np.asarray(populations, dtype=float)
    if t.shape != p.shape or t.size < 20:
        raise DomainError("need at least 20 (t, P) samples")
    if assumption in ("thermal", "coherent"):
        nb, sse = _fit_parametric(t, p, assumption, transition, eta, omega0, nbar_max)
        return NbarFit(nb, math.sqrt(sse / t.size), assumption)
    if assumption == "arbitrary":
        if not 0 <= n_max <= 30:
            raise DomainError("arbitrary fit supports n_max <= 30")
        probs, ill = _fit_arbitrary(t, p, transition, eta, omega0, n_max)
        model = _design(t, transition, eta, omega0, n_max) @ probs
        rms = math.sqrt(float(np.mean((model - p) ** 2)))
        return NbarFit(float(np.dot(np.arange(n_max + 1), probs)), rms, assumption, probs, ill)
    raise DomainError(f"unknown assumption {assumption!r}")
