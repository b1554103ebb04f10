"""Double-well potentials, the shifted monotone graph beta and its Yosida layer.

``beta(r) = Psi'(r) + c_psi * r`` is monotone; ``beta_hat`` is its antiderivative
with ``beta_hat(0) = 0``.  For a regularisation parameter ``lam > 0`` the
resolvent ``J = (I + lam*beta)^{-1}`` gives

    beta_lam(r)     = (r - J r) / lam
    beta_hat_lam(r) = beta_hat(J r) + |r - J r|^2 / (2 lam)
    Psi_lam(r)      = Psi(0) + beta_hat_lam(r) - c_psi/2 r^2

All array functions broadcast over numpy inputs.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import xlogy

from .errors import DomainViolation, NoConvergence

_LN2 = np.log(2.0)


class PotentialKind(Enum):
    Polynomial = "polynomial"
    Logarithmic = "logarithmic"


@dataclass(frozen=True)
class PotentialModel:
    kind: PotentialKind = PotentialKind.Polynomial
    theta: float = 0.0
    theta0: float = 0.0
    c_psi: float = 1.0
    gamma: float = 2.0

    def __post_init__(self):
        if self.kind is PotentialKind.Polynomial:
            if self.c_psi != 1.0 or self.gamma != 2.0:
                raise ValueError("polynomial potential requires c_psi = 1 and gamma = 2")
        elif self.kind is PotentialKind.Logarithmic:
            if not (0 < self.theta < self.theta0):
                raise ValueError("psi_log requires 0 < theta < theta0")
            if not np.isclose(self.c_psi, self.theta0 - self.theta, rtol=0, atol=1e-15):
                raise ValueError("logarithmic potential requires c_psi = theta0 - theta")
            if not (1 <= self.gamma <= 2):
                raise ValueError("gamma must lie in [1, 2]")
        else:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        r = np.linspace(-0.999, 0.999, 201) if self.is_log else np.linspace(-5, 5, 201)
        if np.any(_eval(self, 2, r) < -self.c_psi - 1e-12):
            raise ValueError("semiconvexity Psi'' >= -c_psi violated on sample grid")

    @classmethod
    def polynomial(cls):
        return cls(PotentialKind.Polynomial)

    @classmethod
    def logarithmic(cls, theta, theta0, gamma=2.0):
        return cls(PotentialKind.Logarithmic, float(theta), float(theta0), float(theta0 - theta), gamma)

    @property
    def is_log(self):
        return self.kind is PotentialKind.Logarithmic

    @property
    def psi0(self):
        return 0.25 if self.kind is PotentialKind.Polynomial else 0.0


def _eval(model, order, r):
    r = np.asarray(r, dtype=float)
    if model.kind is PotentialKind.Polynomial:
        if order == 0:
            return 0.25 * (r * r - 1.0) ** 2
        if order == 1:
            return r ** 3 - r
        if order == 2:
            return 3.0 * r * r - 1.0
        return 6.0 * r
    th, th0 = model.theta, model.theta0
    if order == 0:
        return 0.5 * th * (xlogy(1 + r, 1 + r) + xlogy(1 - r, 1 - r)) - 0.5 * th0 * r * r
    if order == 1:
        return th * np.arctanh(r) - th0 * r
    if order == 2:
        return th / (1 - r * r) - th0
    return 2.0 * th * r / (1 - r * r) ** 2


def potential_eval(model, order, r):
    """Psi^(order)(r) in closed form, ``order`` in 0..3."""
    if order not in (0, 1, 2, 3):
        raise ValueError("order must be 0, 1, 2 or 3")
    if model.is_log:
        a = np.abs(np.asarray(r, dtype=float))
        if (order == 0 and np.any(a > 1)) or (order > 0 and np.any(a >= 1)):
            raise DomainViolation("logarithmic potential evaluated outside (-1, 1)")
    out = _eval(model, order, r)
    return float(out) if np.ndim(out) == 0 else out


def beta(model, r):
    """Monotone part Psi'(r) + c_psi r."""
    if model.is_log:
        r = np.asarray(r, dtype=float)
        return model.theta * (np.arctanh(r) - r)
    return np.asarray(r, dtype=float) ** 3


def beta_hat(model, r):
    """Antiderivative of beta vanishing at 0."""
    r = np.asarray(r, dtype=float)
    if model.is_log:
        return 0.5 * model.theta * (xlogy(1 + r, 1 + r) + xlogy(1 - r, 1 - r) - r * r)
    return 0.25 * r ** 4


# -- resolvent -------------------------------------------------------------

_MAX_ITER = 200


def _newton_bisect(f, df, r, lo, hi, x0):
    """Vectorised safeguarded Newton for increasing f(x) = 0 on [lo, hi]."""
    x = np.clip(x0, lo, hi)
    tol = 1e-13 * (1.0 + np.abs(r))
    active = np.ones(x.shape, dtype=bool)
    for _ in range(_MAX_ITER):
        fx = f(x)
        active = np.abs(fx) > tol
        if not active.any():
            return x
        lo = np.where(fx < 0, x, lo)
        hi = np.where(fx > 0, x, hi)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            xn = x - fx / df(x)
        bad = ~np.isfinite(xn) | (xn <= lo) | (xn >= hi)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        # bracket collapsed to adjacent floats: accept
        stuck = (hi - lo) <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(x))
        x = np.where(active & ~stuck, xn, x)
        if not (active & ~stuck).any():
            return x
    raise NoConvergence(f"resolvent did not converge in {_MAX_ITER} iterations")


def _resolvent_poly(lam, r):
    f = lambda x: x + lam * x ** 3 - r
    df = lambda x: 1.0 + 3.0 * lam * x * x
    lo, hi = np.minimum(0.0, r), np.maximum(0.0, r)
    x0 = np.sign(r) * np.minimum(np.abs(r), np.cbrt(np.abs(r) / lam))
    return _newton_bisect(f, df, r, lo, hi, x0)


def _resolvent_log_t(model, lam, r):
    """Root in t = atanh(x) of tanh t + lam*theta*(t - tanh t) = r."""
    a = lam * model.theta
    f = lambda t: (1.0 - a) * np.tanh(t) + a * t - r
    df = lambda t: (1.0 - a) / np.cosh(t) ** 2 + a
    slack = abs(1.0 - a)
    lo, hi = (r - slack) / a, (r + slack) / a
    lo, hi = np.minimum(lo, 0.0), np.maximum(hi, 0.0)
    # the root has the sign of r
    lo = np.where(r >= 0, 0.0, lo)
    hi = np.where(r <= 0, 0.0, hi)
    x0 = np.arctanh(np.clip(r, -0.9, 0.9))
    return _newton_bisect(f, df, r, lo, hi, x0)


def _check_lam(lam):
    if not lam > 0:
        raise ValueError("lambda must be positive")


def resolvent_solve(model, lam, r):
    """Unique x with x + lam*beta(x) = r."""
    _check_lam(lam)
    r_arr = np.asarray(r, dtype=float)
    if model.is_log:
        # roots within one ulp of +-1 round onto the boundary; keep them interior
        edge = np.nextafter(1.0, 0.0)
        x = np.clip(np.tanh(_resolvent_log_t(model, lam, r_arr)), -edge, edge)
    else:
        x = _resolvent_poly(lam, r_arr)
    return float(x) if np.ndim(x) == 0 else x


def _log_entropy_from_t(t):
    """(1+x)ln(1+x) + (1-x)ln(1-x) for x = tanh t, stable for large |t|."""
    a = np.abs(t)
    x = np.tanh(a)
    e = np.exp(-2.0 * a)
    lp = _LN2 - np.log1p(e)
    lm = _LN2 - 2.0 * a - np.log1p(e)
    return (1 + x) * lp + (1 - x) * lm


def _yosida_parts(model, lam, r):
    """Return (J, beta_lam, beta_hat_lam, dbeta_lam) for array r."""
    r = np.asarray(r, dtype=float)
    if model.is_log:
        t = _resolvent_log_t(model, lam, r)
        x = np.tanh(t)
        # beta_lam(r) = beta(J r) by the resolvent equation; avoids r - x cancellation
        bl = model.theta * (t - x)
        b = bl
        bh = 0.5 * model.theta * (_log_entropy_from_t(t) - x * x) + 0.5 * lam * b * b
        with np.errstate(over="ignore", divide="ignore"):
            dbeta = model.theta * np.sinh(t) ** 2
            dbl = 1.0 / (lam + 1.0 / dbeta)
        dbl = np.where(dbeta == 0, 0.0, dbl)
        return x, bl, bh, dbl
    x = _resolvent_poly(lam, r)
    b = x ** 3
    bh = 0.25 * x ** 4 + 0.5 * lam * b * b
    dbeta = 3.0 * x * x
    return x, b, bh, dbeta / (1.0 + lam * dbeta)


def regularized_eval(model, lam, r):
    """(beta_lam, beta_hat_lam, Psi_lam, Psi_lam') at r."""
    _check_lam(lam)
    r_arr = np.asarray(r, dtype=float)
    _, bl, bh, _ = _yosida_parts(model, lam, r_arr)
    c = model.c_psi
    out = (bl, bh, model.psi0 + bh - 0.5 * c * r_arr * r_arr, bl - c * r_arr)
    if np.ndim(r_arr) == 0:
        return tuple(float(v) for v in out)
    return out


def yosida_derivative(model, lam, r):
    """d/dr beta_lam(r) = beta'(J r) / (1 + lam beta'(J r))."""
    _check_lam(lam)
    return _yosida_parts(model, lam, r)[3]


@dataclass(frozen=True)
class Nonlinearity:
    """Pointwise Psi, Psi', Psi'' used by the solvers, exact or regularised."""

    model: PotentialModel
    lam: float | None = None

    def psi(self, r):
        if self.lam is None:
            return _eval(self.model, 0, r)
        return regularized_eval(self.model, self.lam, r)[2]

    def d1(self, r):
        if self.lam is None:
            return _eval(self.model, 1, r)
        return _yosida_parts(self.model, self.lam, r)[1] - self.model.c_psi * np.asarray(r)

    def d2(self, r):
        if self.lam is None:
            return _eval(self.model, 2, r)
        return _yosida_parts(self.model, self.lam, r)[3] - self.model.c_psi
