"""Generalized eigendecomposition and approximate joint diagonalization.

Both routines return a separating matrix ``W`` whose columns are spatial
filters; components are obtained as ``y(t) = W.T @ x(t)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DimensionMismatch, SingularB, ValidationError
from .signal import MultichannelSignal

COND_LIMIT = 1e12
REG_EPS = 1e-10


@dataclass(frozen=True)
class GevdResult:
    eigenvalues: np.ndarray
    eigenmatrix: np.ndarray
    regularized: bool = False


@dataclass(frozen=True)
class AjdResult:
    demixing: np.ndarray
    offdiag_score: np.ndarray
    iterations: int
    converged: bool
    condition_number: float
    regularized: bool = False


def _check_symmetric(m, name):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} has non-finite entries")
    scale = np.max(np.abs(m)) if m.size else 0.0
    if np.max(np.abs(m - m.T), initial=0.0) > 1e-12 * max(scale, 1e-300) and scale > 0:
        raise ValidationError(f"{name} is not symmetric")
    return 0.5 * (m + m.T)


def _regularized_cholesky(b):
    """Lower Cholesky factor of ``b``, adding a diagonal load if ill-conditioned."""
    n = b.shape[0]
    tr = np.trace(b)
    if not tr > 0:
        raise SingularB("B has nonpositive trace")
    ev = np.linalg.eigvalsh(b)
    reg = REG_EPS * tr / n
    regularized = False
    if ev[0] <= 0 or ev[-1] / ev[0] > COND_LIMIT:
        b = b + reg * np.eye(n)
        ev = ev + reg
        regularized = True
        # an exactly singular PSD matrix lands at reg; anything well below
        # means B had a genuinely negative direction
        if ev[0] < 0.5 * reg:
            raise SingularB(f"B is indefinite (smallest eigenvalue {ev[0] - reg:.3g})")
    try:
        chol = linalg.cholesky(b, lower=True)
    except linalg.LinAlgError as exc:
        raise SingularB(str(exc)) from exc
    return chol, regularized


def _fix_signs(w):
    idx = np.argmax(np.abs(w), axis=0)
    signs = np.sign(w[idx, np.arange(w.shape[1])])
    signs[signs == 0] = 1.0
    return w * signs


def gevd(a, b) -> GevdResult:
    """Solve ``W.T A W = diag(lam)``, ``W.T B W = I`` with ``lam`` ascending.

    Uses the Cholesky reduction ``B = L L.T`` followed by a symmetric
    eigensolve of ``L^-1 A L^-T``. The last column of ``W`` therefore
    maximizes the Rayleigh quotient ``w.T A w / w.T B w``.
    """
    a = _check_symmetric(a, "A")
    b = _check_symmetric(b, "B")
    if a.shape != b.shape:
        raise DimensionMismatch(f"A is {a.shape} but B is {b.shape}")
    chol, regularized = _regularized_cholesky(b)
    tmp = linalg.solve_triangular(chol, a, lower=True)
    c = linalg.solve_triangular(chol, tmp.T, lower=True)
    c = 0.5 * (c + c.T)
    lam, v = np.linalg.eigh(c)
    order = np.argsort(lam, kind="stable")
    lam, v = lam[order], v[:, order]
    w = linalg.solve_triangular(chol.T, v, lower=False)
    return GevdResult(lam, _fix_signs(w), regularized)


def offdiag_energy(mats) -> float:
    total = 0.0
    for m in mats:
        off = m - np.diag(np.diag(m))
        total += float(np.sum(off * off))
    return total


def _jacobi_joint(mats, max_sweeps, tol):
    """Orthogonal joint diagonalization by Givens rotations.

    ``mats`` has shape (K, n, n) and is modified in place. Returns the
    accumulated rotation, the off-diagonal energy after every sweep
    (including the initial value) and the sweep count.
    """
    k, n, _ = mats.shape
    v = np.eye(n)
    scores = [offdiag_energy(mats)]
    converged = n < 2
    sweeps = 0
    while not converged and sweeps < max_sweeps:
        sweeps += 1
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                g1 = mats[:, p, p] - mats[:, q, q]
                g2 = mats[:, p, q] + mats[:, q, p]
                ton = g1 @ g1 - g2 @ g2
                toff = 2.0 * (g1 @ g2)
                theta = 0.5 * np.arctan2(toff, ton + np.hypot(ton, toff))
                if abs(theta) < tol:
                    continue
                rotated = True
                c, s = np.cos(theta), np.sin(theta)
                mp = mats[:, :, p].copy()
                mats[:, :, p] = c * mp + s * mats[:, :, q]
                mats[:, :, q] = c * mats[:, :, q] - s * mp
                mp = mats[:, p, :].copy()
                mats[:, p, :] = c * mp + s * mats[:, q, :]
                mats[:, q, :] = c * mats[:, q, :] - s * mp
                vp = v[:, p].copy()
                v[:, p] = c * vp + s * v[:, q]
                v[:, q] = c * v[:, q] - s * vp
        scores.append(offdiag_energy(mats))
        converged = not rotated
    return v, np.array(scores), sweeps, converged


def ajd(cs, b, max_sweeps=200, tol=1e-9) -> AjdResult:
    """Whiten by ``b`` then jointly diagonalize ``cs`` with Jacobi rotations.

    The returned demixing matrix satisfies ``W.T b W = I`` and makes every
    ``W.T C W`` as diagonal as an orthogonal post-rotation allows.
    ``converged`` is False when ``max_sweeps`` ran out before every rotation
    angle fell below ``tol``.
    """
    b = _check_symmetric(b, "B")
    cs = [_check_symmetric(c, f"C[{i}]") for i, c in enumerate(cs)]
    if len(cs) < 2:
        raise ValidationError("ajd needs at least two matrices")
    for c in cs:
        if c.shape != b.shape:
            raise DimensionMismatch(f"matrix of shape {c.shape} vs B of shape {b.shape}")
    chol, regularized = _regularized_cholesky(b)
    whitened = []
    for c in cs:
        tmp = linalg.solve_triangular(chol, c, lower=True)
        cw = linalg.solve_triangular(chol, tmp.T, lower=True)
        whitened.append(0.5 * (cw + cw.T))
    mats = np.array(whitened)
    v, scores, sweeps, converged = _jacobi_joint(mats, max_sweeps, tol)
    w = _fix_signs(linalg.solve_triangular(chol.T, v, lower=False))
    return AjdResult(w, scores, sweeps, converged, float(np.linalg.cond(w)), regularized)


def apply_transform(w, x: MultichannelSignal) -> MultichannelSignal:
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] != x.n_channels:
        raise DimensionMismatch(
            f"transform of shape {w.shape} for {x.n_channels}-channel signal")
    return MultichannelSignal(w.T @ x.data, x.fs)


def amari_index(estimated, true_mixing) -> float:
    """Amari performance index of ``G = estimated.T @ true_mixing``, in [0, 1].

    Zero exactly when ``G`` is a scaled permutation.
    """
    e = np.asarray(estimated, dtype=float)
    m = np.asarray(true_mixing, dtype=float)
    if e.ndim != 2 or e.shape != m.shape or e.shape[0] != e.shape[1]:
        raise DimensionMismatch(f"shapes {e.shape} and {m.shape} differ or are not square")
    g = np.abs(e.T @ m)
    n = g.shape[0]
    if n < 2:
        return 0.0
    rows = np.sum(g / g.max(axis=1, keepdims=True), axis=1) - 1.0
    cols = np.sum(g / g.max(axis=0, keepdims=True), axis=0) - 1.0
    return float((rows.sum() + cols.sum()) / (2.0 * n * (n - 1)))
