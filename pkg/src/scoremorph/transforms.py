"""Attribute-dependent monotone transformations of squared-residual scores.

Each family maps a base score A = (f(x) - y)^2 to B = phi_x(A) where the
attribute dependence enters through a scalar localization value (usually
the output of a trainable network). Every trainable family is strictly
increasing in A with an x-independent codomain, so the transformed scores
can be calibrated and mapped back to label-space intervals at any test
attribute. Fixture families that break the shared-codomain requirement are
provided for negative testing and are excluded from the trainable set.
"""

from __future__ import annotations

import numpy as np

from .network import LocalizerNet

TRAINABLE_KINDS = ("erc", "linear", "exp", "sigma")

DEFAULT_GAMMA = 1e-2
DEFAULT_EPSILON_FLOOR = 1e-12


class CodomainError(ValueError):
    """A transformed score lies outside the family codomain at this x."""


class NoRootError(ValueError):
    """Bracket expansion failed to enclose a root."""


def _sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


def _maybe_float(value):
    """Collapse 0-d numpy results to plain floats."""
    value = np.asarray(value)
    return float(value) if value.ndim == 0 else value


def _expand(value, *operands):
    """Broadcast a (possibly constant) value to the joint operand shape."""
    shape = np.broadcast_shapes(*(np.shape(o) for o in operands))
    out = np.broadcast_to(np.asarray(value, dtype=float), shape)
    return float(out) if out.ndim == 0 else out


class TransformFamily:
    """Base class: core maps are expressed in terms of the localization value.

    Subclasses implement ``phi``/``phi_inv``/derivatives as numpy-vectorized
    functions of (loc, score); the public API resolves loc from x.
    """

    kind = "base"
    trainable = False
    has_analytic_inverse = True

    def __init__(self, epsilon_floor: float = DEFAULT_EPSILON_FLOOR):
        self.epsilon_floor = float(epsilon_floor)

    # ---- localization ----

    def loc(self, x) -> float:
        return 0.0

    def loc_batch(self, xs) -> np.ndarray:
        return np.zeros(np.asarray(xs).shape[0])

    # ---- core maps (subclasses) ----

    def phi(self, loc, a):
        raise NotImplementedError

    def phi_inv(self, loc, b):
        raise NotImplementedError

    def dphi_da(self, loc, a):
        raise NotImplementedError

    def dphi_dloc(self, loc, a):
        raise NotImplementedError

    def dphi_inv_dloc(self, loc, b):
        raise NotImplementedError

    def dphi_inv_db(self, loc, b):
        raise NotImplementedError

    # ---- public API ----

    def forward(self, x, a):
        """Transformed score B = phi_x(A)."""
        a = self._check_base_score(a)
        loc = self._checked_loc(x)
        return self.phi(loc, a)

    def forward_batch(self, xs, a):
        a = self._check_base_score(a)
        locs = self.loc_batch(xs)
        if not np.all(np.isfinite(locs)):
            raise ValueError("non-finite localization value")
        return self.phi(locs, a)

    def inverse(self, x, b):
        """Base score A = phi_x^{-1}(B); raises CodomainError outside B_x."""
        return self.phi_inv(self._checked_loc(x), b)

    def inverse_batch(self, xs, b):
        locs = self.loc_batch(xs)
        if not np.all(np.isfinite(locs)):
            raise ValueError("non-finite localization value")
        return self.phi_inv(locs, b)

    def deriv_A(self, x, a):
        """d phi_x / dA, strictly positive for a > 0."""
        a = np.asarray(a, dtype=float)
        if np.any(a <= 0):
            raise ValueError("derivative requires A > 0")
        return self.dphi_da(self._checked_loc(x), a)

    def grad_inverse_params(self, x, b, numeric=False, bracket=(1e-12, 1.0),
                            tol=1e-12):
        """Gradient of phi_x^{-1}(B) w.r.t. the localizer parameters.

        Uses the implicit relations: at A* = phi_x^{-1}(B),
        grad phi^{-1} = -grad phi / phi' and d phi^{-1}/dB = 1 / phi'.
        With ``numeric=True`` A* is obtained by bisection instead of the
        closed-form inverse. Families without parameters return ([], .).
        """
        loc = self._checked_loc(x)
        if numeric or not self.has_analytic_inverse:
            a_star = self.phi_inv_numeric(loc, b, bracket=bracket, tol=tol)
        else:
            a_star = self.phi_inv(loc, b)
        phi_p = self.dphi_da(loc, a_star)
        if phi_p <= 0:
            raise RuntimeError("monotonicity violated: phi' <= 0")
        dinv_db = 1.0 / phi_p
        dinv_dloc = -self.dphi_dloc(loc, a_star) / phi_p
        return self._loc_grad(x, dinv_dloc), dinv_db

    def phi_inv_numeric(self, loc, b, bracket=(1e-12, 1.0), tol=1e-12):
        """Invert phi(loc, .) = b by bisection with geometric bracket growth."""
        lo, hi = float(bracket[0]), float(bracket[1])
        if not 0 < lo < hi:
            raise ValueError(f"invalid bracket {bracket}")
        b = float(b)
        doublings = 0
        while self.phi(loc, hi) < b:
            lo, hi = hi, hi * 2.0
            doublings += 1
            if doublings > 200:
                raise NoRootError(f"no root above the bracket for B={b}")
        while self.phi(loc, lo) > b:
            lo, hi = lo * 0.5, lo
            doublings += 1
            if doublings > 200:
                raise NoRootError(f"no root below the bracket for B={b}")
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:  # float resolution reached
                break
            if self.phi(loc, mid) <= b:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    # ---- helpers ----

    def _checked_loc(self, x) -> float:
        loc = self.loc(x)
        if not np.isfinite(loc):
            raise ValueError(f"non-finite localization value at x={x!r}")
        return loc

    @staticmethod
    def _check_base_score(a):
        a = np.asarray(a, dtype=float)
        if np.any(a < 0):
            raise ValueError("base scores must be nonnegative")
        if a.ndim == 0:
            return float(a)
        return a

    def _loc_grad(self, x, upstream: float):
        """Parameter gradients of upstream * loc(x); [] when parameter-free."""
        return []

    def _clamped(self, a):
        return np.maximum(a, self.epsilon_floor)

    def config_dict(self) -> dict:
        return {"kind": self.kind, "epsilon_floor": self.epsilon_floor}


class _LocalizedFamily(TransformFamily):
    """Family whose localization value is a trainable network output."""

    trainable = True

    def __init__(self, localizer: LocalizerNet,
                 epsilon_floor: float = DEFAULT_EPSILON_FLOOR):
        super().__init__(epsilon_floor)
        self.localizer = localizer

    def loc(self, x) -> float:
        return self.localizer.value(np.asarray(x, dtype=float))

    def loc_batch(self, xs) -> np.ndarray:
        return self.localizer.values(np.asarray(xs, dtype=float))

    def _loc_grad(self, x, upstream: float):
        _, tape = self.localizer.forward(np.asarray(x, dtype=float))
        return self.localizer.backward(tape, upstream)


class FixedTransform(TransformFamily):
    """Identity map: the non-adaptive baseline."""

    kind = "fixed"

    def phi(self, loc, a):
        return _expand(a, loc, a)

    def phi_inv(self, loc, b):
        if np.any(np.asarray(b) < 0):
            raise CodomainError("fixed family: B must be >= 0")
        return _expand(b, loc, b)

    def dphi_da(self, loc, a):
        return _expand(1.0, loc, a)

    def dphi_dloc(self, loc, a):
        return _expand(0.0, loc, a)

    def dphi_inv_dloc(self, loc, b):
        return _expand(0.0, loc, b)

    def dphi_inv_db(self, loc, b):
        return _expand(1.0, loc, b)


class ErcTransform(_LocalizedFamily):
    """Residual re-weighting: B = A / (g(x)^2 + gamma)."""

    kind = "erc"

    def __init__(self, localizer, gamma: float = DEFAULT_GAMMA,
                 epsilon_floor: float = DEFAULT_EPSILON_FLOOR):
        super().__init__(localizer, epsilon_floor)
        if gamma <= 0:
            raise ValueError(f"gamma must be positive, got {gamma}")
        self.gamma = float(gamma)

    def phi(self, loc, a):
        return _maybe_float(a / (loc * loc + self.gamma))

    def phi_inv(self, loc, b):
        if np.any(np.asarray(b) < 0):
            raise CodomainError("erc family: B must be >= 0")
        return _maybe_float(b * (loc * loc + self.gamma))

    def dphi_da(self, loc, a):
        return _expand(1.0 / (loc * loc + self.gamma), loc, a)

    def dphi_dloc(self, loc, a):
        w = loc * loc + self.gamma
        return _maybe_float(-2.0 * loc * a / (w * w))

    def dphi_inv_dloc(self, loc, b):
        return _maybe_float(2.0 * loc * b)

    def dphi_inv_db(self, loc, b):
        return _expand(loc * loc + self.gamma, loc, b)

    def config_dict(self):
        return {"kind": self.kind, "gamma": self.gamma,
                "epsilon_floor": self.epsilon_floor}


class LinearTransform(_LocalizedFamily):
    """Shifted log score: B = log A + g(x), codomain all of R."""

    kind = "linear"

    def phi(self, loc, a):
        return _maybe_float(np.log(self._clamped(a)) + loc)

    def phi_inv(self, loc, b):
        return _maybe_float(np.exp(np.asarray(b, dtype=float) - loc))

    def dphi_da(self, loc, a):
        return _expand(1.0 / self._clamped(a), loc, a)

    def dphi_dloc(self, loc, a):
        return _expand(1.0, loc, a)

    def dphi_inv_dloc(self, loc, b):
        return _maybe_float(-np.asarray(self.phi_inv(loc, b)))

    def dphi_inv_db(self, loc, b):
        return self.phi_inv(loc, b)


class ExpTransform(_LocalizedFamily):
    """Exponentially re-scaled score: B = A * exp(g(x))."""

    kind = "exp"

    def phi(self, loc, a):
        return _maybe_float(a * np.exp(loc))

    def phi_inv(self, loc, b):
        if np.any(np.asarray(b) <= 0):
            raise CodomainError("exp family: B must be > 0")
        return _maybe_float(b * np.exp(-loc))

    def dphi_da(self, loc, a):
        return _expand(np.exp(loc), loc, a)

    def dphi_dloc(self, loc, a):
        return _maybe_float(a * np.exp(loc))

    def dphi_inv_dloc(self, loc, b):
        return _maybe_float(-b * np.exp(-loc))

    def dphi_inv_db(self, loc, b):
        return _expand(np.exp(-loc), loc, b)


class SigmaTransform(_LocalizedFamily):
    """Logistic-squashed log score: B = sigma(log A + g(x)), codomain (0, 1)."""

    kind = "sigma"

    _B_CLIP = 1e-15

    def phi(self, loc, a):
        return _maybe_float(_sigmoid(np.log(self._clamped(a)) + loc))

    def _logit(self, b):
        bc = np.clip(np.asarray(b, dtype=float), self._B_CLIP, 1.0 - self._B_CLIP)
        return np.log(bc) - np.log1p(-bc), bc

    def phi_inv(self, loc, b):
        barr = np.asarray(b, dtype=float)
        if np.any(barr <= 0) or np.any(barr >= 1):
            raise CodomainError("sigma family: B must lie in (0, 1)")
        z, _ = self._logit(b)
        return _maybe_float(np.exp(z - loc))

    def dphi_da(self, loc, a):
        s = np.asarray(self.phi(loc, a))
        return _maybe_float(s * (1.0 - s) / self._clamped(a))

    def dphi_dloc(self, loc, a):
        s = np.asarray(self.phi(loc, a))
        return _maybe_float(s * (1.0 - s))

    def dphi_inv_dloc(self, loc, b):
        return _maybe_float(-np.asarray(self.phi_inv(loc, b)))

    def dphi_inv_db(self, loc, b):
        _, bc = self._logit(b)
        return _maybe_float(self.phi_inv(loc, b) / (bc * (1.0 - bc)))


class LogShiftTransform(TransformFamily):
    """Non-adaptive log score with a constant offset; width is x-independent."""

    kind = "log-shift"

    def __init__(self, offset: float = 0.0,
                 epsilon_floor: float = DEFAULT_EPSILON_FLOOR):
        super().__init__(epsilon_floor)
        self.offset = float(offset)

    def phi(self, loc, a):
        return _expand(np.log(self._clamped(a)) + self.offset, loc, a)

    def phi_inv(self, loc, b):
        return _expand(np.exp(np.asarray(b, dtype=float) - self.offset), loc, b)

    def dphi_da(self, loc, a):
        return _expand(1.0 / self._clamped(a), loc, a)

    def dphi_dloc(self, loc, a):
        return _expand(0.0, loc, a)

    def dphi_inv_dloc(self, loc, b):
        return _expand(0.0, loc, b)

    def dphi_inv_db(self, loc, b):
        return self.phi_inv(loc, b)

    def config_dict(self):
        return {"kind": self.kind, "offset": self.offset,
                "epsilon_floor": self.epsilon_floor}


class SqrtShiftFixture(TransformFamily):
    """Test-only family B = sqrt(A) + theta * x for scalar attributes.

    The codomain depends on x, so calibrated intervals are not invariant in
    theta; the inverse is the algebraic square, applied without a codomain
    check to expose exactly that behaviour.
    """

    kind = "sqrt-shift-fixture"
    trainable = False

    def __init__(self, theta: float):
        super().__init__()
        self.theta = float(theta)

    def loc(self, x) -> float:
        return self.theta * float(np.asarray(x, dtype=float).ravel()[0])

    def loc_batch(self, xs) -> np.ndarray:
        return self.theta * np.asarray(xs, dtype=float).reshape(len(xs), -1)[:, 0]

    def phi(self, loc, a):
        return _maybe_float(np.sqrt(a) + loc)

    def phi_inv(self, loc, b):
        diff = np.asarray(b, dtype=float) - loc
        return _maybe_float(diff * diff)

    def dphi_da(self, loc, a):
        return _expand(0.5 / np.sqrt(a), loc, a)

    def dphi_dloc(self, loc, a):
        return _expand(1.0, loc, a)


class AdditiveFixture(TransformFamily):
    """Test-only family B = A + g(x)^2 with per-x codomain [g(x)^2, inf).

    Inversion at a test attribute can ask for a negative base score, which
    raises CodomainError; this is the failure the shared-codomain rule of
    the trainable families prevents.
    """

    kind = "additive-fixture"
    trainable = False

    def __init__(self, g_fn):
        super().__init__()
        self.g_fn = g_fn

    def loc(self, x) -> float:
        return float(self.g_fn(np.asarray(x, dtype=float)))

    def loc_batch(self, xs) -> np.ndarray:
        return np.asarray([self.loc(row) for row in np.asarray(xs, dtype=float)])

    def phi(self, loc, a):
        return _maybe_float(a + loc * loc)

    def phi_inv(self, loc, b):
        out = np.asarray(b, dtype=float) - loc * loc
        if np.any(out < 0):
            raise CodomainError(
                "additive fixture: B below g(x)^2 has no nonnegative base score")
        return _maybe_float(out)

    def dphi_da(self, loc, a):
        return _expand(1.0, loc, a)

    def dphi_dloc(self, loc, a):
        return _expand(2.0 * loc, loc, a)


class AdditiveLogRepairFixture(AdditiveFixture):
    """Log-composed repair of the additive fixture: (1+eps) log A + g(x)^2."""

    kind = "additive-log-repair-fixture"

    def __init__(self, g_fn, eps: float = 0.1):
        super().__init__(g_fn)
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.eps = float(eps)

    def phi(self, loc, a):
        return _maybe_float((1.0 + self.eps) * np.log(self._clamped(a))
                            + loc * loc)

    def phi_inv(self, loc, b):
        out = np.exp((np.asarray(b, dtype=float) - loc * loc) / (1.0 + self.eps))
        return _maybe_float(out)

    def dphi_da(self, loc, a):
        return _expand((1.0 + self.eps) / self._clamped(a), loc, a)

    def dphi_dloc(self, loc, a):
        return _expand(2.0 * loc, loc, a)


def numeric_inverse(fam: TransformFamily, x, b, bracket=(1e-12, 1.0),
                    tol: float = 1e-12) -> float:
    """Bisection inverse of fam at x: find A with phi_x(A) = b within tol."""
    return fam.phi_inv_numeric(fam._checked_loc(x), b, bracket=bracket, tol=tol)


def make_family(kind: str, localizer: LocalizerNet | None = None,
                gamma: float = DEFAULT_GAMMA,
                epsilon_floor: float = DEFAULT_EPSILON_FLOOR,
                offset: float = 0.0) -> TransformFamily:
    """Construct one of the supported families by name."""
    if kind == "fixed":
        return FixedTransform(epsilon_floor)
    if kind == "log":
        return LogShiftTransform(offset, epsilon_floor)
    if kind in TRAINABLE_KINDS:
        if localizer is None:
            raise ValueError(f"family '{kind}' needs a localizer network")
        if kind == "erc":
            return ErcTransform(localizer, gamma, epsilon_floor)
        cls = {"linear": LinearTransform, "exp": ExpTransform,
               "sigma": SigmaTransform}[kind]
        return cls(localizer, epsilon_floor)
    raise ValueError(f"unknown family kind '{kind}'")
