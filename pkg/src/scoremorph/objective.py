"""Averaged interval-size objective and its total-derivative gradient.

Within a batch every element plays the test role against the others as
calibration, so the loss is the mean over ordered pairs (i, n), i != n, of
sqrt(phi_{x_i}^{-1}(phi_{x_n}(A_n))). Because the inverse depends on the
parameters both directly and through its argument, the gradient combines
the implicit-inverse term with the chain through the forward map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import LocalizerNet
from .transforms import TransformFamily


@dataclass(frozen=True)
class LossBatch:
    """Attribute rows with their base scores; needs m >= 2 for pair terms."""

    x: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        a = np.asarray(self.a, dtype=float)
        if x.ndim != 2 or a.shape != (x.shape[0],):
            raise ValueError("batch needs (m, d) attributes and (m,) scores")
        if x.shape[0] < 2:
            raise ValueError("pairwise loss needs at least 2 samples")
        if np.any(a < 0):
            raise ValueError("base scores must be nonnegative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "a", a)

    @property
    def m(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class LossValue:
    value: float
    grads: list  # per-layer (dW, db); empty for parameter-free families


def loss_pair_term(fam: TransformFamily, x_test, x_n, a_n: float) -> float:
    """sqrt(phi_{x_test}^{-1}(phi_{x_n}(A_n))): one ordered-pair size term."""
    a_eff = max(float(a_n), fam.epsilon_floor)
    b = fam.forward(x_n, a_eff)
    if fam.has_analytic_inverse:
        inv = fam.inverse(x_test, b)
    else:
        from .transforms import numeric_inverse
        inv = numeric_inverse(fam, x_test, b)
    return float(np.sqrt(inv))


def _pair_matrices(fam, g, a_eff, inverse_mode):
    """U[i, n] = phi^{-1}(g_i, B_n) plus its two partials, as (m, m) arrays."""
    m = g.shape[0]
    b = fam.phi(g, a_eff)
    g_test = g[:, None]
    b_cal = np.broadcast_to(b[None, :], (m, m))
    if inverse_mode == "analytic":
        u = np.broadcast_to(fam.phi_inv(g_test, b_cal), (m, m))
        du_dloc = np.broadcast_to(fam.dphi_inv_dloc(g_test, b_cal), (m, m))
        du_db = np.broadcast_to(fam.dphi_inv_db(g_test, b_cal), (m, m))
    elif inverse_mode == "implicit":
        u = np.empty((m, m))
        du_dloc = np.empty((m, m))
        du_db = np.empty((m, m))
        for i in range(m):
            for n in range(m):
                a_star = fam.phi_inv_numeric(g[i], b[n])
                phi_p = fam.dphi_da(g[i], a_star)
                u[i, n] = a_star
                du_dloc[i, n] = -fam.dphi_dloc(g[i], a_star) / phi_p
                du_db[i, n] = 1.0 / phi_p
    else:
        raise ValueError(f"unknown inverse mode '{inverse_mode}'")
    return b, u, du_dloc, du_db


def loss_batch(fam: TransformFamily, batch: LossBatch,
               inverse_mode: str = "analytic") -> LossValue:
    """Pairwise mean interval-size loss with parameter gradients.

    ``inverse_mode='implicit'`` replaces the closed-form inverse by
    bisection plus the implicit-function gradient relations; the two modes
    agree for families with analytic inverses.
    """
    m = batch.m
    a_eff = np.maximum(batch.a, fam.epsilon_floor)
    if fam.trainable:
        g, tape = fam.localizer.forward_batch(batch.x)
    else:
        g, tape = fam.loc_batch(batch.x), None
    if not np.all(np.isfinite(g)):
        raise ValueError("non-finite localization value in batch")

    _, u, du_dloc, du_db = _pair_matrices(fam, g, a_eff, inverse_mode)
    t = np.sqrt(u)
    off_diag = ~np.eye(m, dtype=bool)
    norm = 1.0 / (m * (m - 1))
    value = float(t[off_diag].sum() * norm)
    if not np.isfinite(value):
        bad = np.argwhere(~np.isfinite(t) & off_diag)
        raise ValueError(f"non-finite loss at pair indices {bad[:5].tolist()}")

    if not fam.trainable:
        return LossValue(value, [])

    weight = np.where(off_diag, norm * 0.5 / t, 0.0)
    db_dloc = fam.dphi_dloc(g, a_eff)
    dg = (weight * du_dloc).sum(axis=1) + (weight * du_db).sum(axis=0) * db_dloc
    grads = fam.localizer.backward_batch(tape, dg)
    return LossValue(value, grads)


def pairwise_size_loss(fam: TransformFamily, xs, a) -> float:
    """Loss value only, over all ordered pairs of the given set."""
    m = np.asarray(xs).shape[0]
    a_eff = np.maximum(np.asarray(a, dtype=float), fam.epsilon_floor)
    g = fam.loc_batch(xs)
    _, u, _, _ = _pair_matrices(fam, np.asarray(g, dtype=float), a_eff,
                                "analytic")
    t = np.sqrt(u)
    off_diag = ~np.eye(m, dtype=bool)
    return float(t[off_diag].sum() / (m * (m - 1)))


def erc_error_fit_loss(net: LocalizerNet, batch: LossBatch) -> LossValue:
    """Residual-fitting loss mean((g(x) - A)^2) with its gradient."""
    g, tape = net.forward_batch(batch.x)
    resid = g - batch.a
    value = float((resid ** 2).mean())
    grads = net.backward_batch(tape, 2.0 * resid / batch.m)
    return LossValue(value, grads)
