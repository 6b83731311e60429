"""Soft-margin SVM trained by sequential minimal optimisation.

The dual problem is solved pairwise: each step picks a KKT-violating
multiplier and a partner maximising the error gap, optimises the pair
analytically, and keeps the margin vector incrementally updated.  Labels are
mapped to {-1, +1} internally.  Probabilities come from a logistic link
fitted on the training decision values (Platt-style calibration with
regularised targets).
"""

from __future__ import annotations

import numpy as np

from ..dataset import DesignMatrix
from .base import ModelSpec, TrainedModel, design_xy, require_both_classes

__all__ = ["SvmModel", "train_svm"]

KERNELS = ("linear", "poly", "rbf", "sigmoid")


def _kernel_matrix(kind: str, A: np.ndarray, B: np.ndarray, gamma: float, degree: int, coef0: float) -> np.ndarray:
    if kind == "linear":
        return A @ B.T
    if kind == "poly":
        return (gamma * (A @ B.T) + coef0) ** degree
    if kind == "rbf":
        sa = np.sum(A * A, axis=1)[:, None]
        sb = np.sum(B * B, axis=1)[None, :]
        d2 = np.maximum(sa + sb - 2.0 * (A @ B.T), 0.0)
        return np.exp(-gamma * d2)
    if kind == "sigmoid":
        return np.tanh(gamma * (A @ B.T) + coef0)
    raise ValueError(f"unknown kernel {kind!r}")


def _smo(K: np.ndarray, y: np.ndarray, c: float, tol: float, max_iter: int):
    """Pairwise dual ascent with maximal-violating-pair selection.

    Each step picks the pair that most violates the KKT conditions, solves
    the two-variable subproblem analytically, and updates the margin vector
    F_i = sum_j alpha_j y_j K_ij incrementally.  Converged when the KKT gap
    falls below `tol`; the bias is the midpoint of the final gap interval.
    """
    n = len(y)
    alpha = np.zeros(n)
    F = np.zeros(n)
    for it in range(max_iter):
        grad = y - F  # -y_i * dual gradient
        up = np.where(y > 0, alpha < c, alpha > 0)
        low = np.where(y > 0, alpha > 0, alpha < c)
        if not up.any() or not low.any():
            break
        up_idx = np.flatnonzero(up)
        low_idx = np.flatnonzero(low)
        i = up_idx[int(np.argmax(grad[up_idx]))]
        j = low_idx[int(np.argmin(grad[low_idx]))]
        gap = grad[i] - grad[j]
        if gap <= tol:
            break
        yi, yj = y[i], y[j]
        s = yi * yj
        ai_old, aj_old = alpha[i], alpha[j]
        if s > 0:
            lo_b = max(0.0, ai_old + aj_old - c)
            hi_b = min(c, ai_old + aj_old)
        else:
            lo_b = max(0.0, aj_old - ai_old)
            hi_b = min(c, c + aj_old - ai_old)
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta <= 1e-12:
            eta = 1e-12  # indefinite kernel direction: take a clipped step
        # minimise along the pair; equivalent forms of the Platt update
        aj = aj_old - yj * gap / eta
        aj = min(max(aj, lo_b), hi_b)
        if aj == aj_old:
            break  # the violating pair is pinned by its box; no progress possible
        ai = ai_old + s * (aj_old - aj)
        ai = min(max(ai, 0.0), c)
        dai = ai - ai_old
        daj = aj - aj_old
        alpha[i] = ai
        alpha[j] = aj
        F += dai * yi * K[:, i] + daj * yj * K[:, j]
    else:
        raise RuntimeError(f"SMO did not converge within {max_iter} pair updates")
    grad = y - F
    up = np.where(y > 0, alpha < c, alpha > 0)
    low = np.where(y > 0, alpha > 0, alpha < c)
    hi = grad[up].max() if up.any() else 0.0
    lo = grad[low].min() if low.any() else 0.0
    b = 0.5 * (hi + lo)
    return alpha, b


def _fit_platt(decision: np.ndarray, y01: np.ndarray, max_iter: int = 100):
    """Sigmoid calibration P(y=1|f) = 1/(1+exp(A f + B)) with regularised
    targets, solved by damped Newton."""
    n1 = int(y01.sum())
    n0 = len(y01) - n1
    t = np.where(y01 == 1, (n1 + 1.0) / (n1 + 2.0), 1.0 / (n0 + 2.0))
    A, B = 0.0, np.log((n0 + 1.0) / (n1 + 1.0))
    f = decision

    def obj(a, b):
        # NLL of p = 1/(1+exp(z)) against target t, stable form
        z = a * f + b
        return float(np.sum(np.logaddexp(0.0, z) - (1.0 - t) * z))

    best = obj(A, B)
    for _ in range(max_iter):
        z = A * f + B
        p = 1.0 / (1.0 + np.exp(np.clip(z, -500, 500)))
        d1 = t - p  # d NLL / dz
        g_a = float(np.sum(f * d1))
        g_b = float(np.sum(d1))
        w = p * (1.0 - p) + 1e-12
        h_aa = float(np.sum(f * f * w)) + 1e-12
        h_ab = float(np.sum(f * w))
        h_bb = float(np.sum(w)) + 1e-12
        det = h_aa * h_bb - h_ab * h_ab
        if abs(det) < 1e-18:
            break
        dA = -(h_bb * g_a - h_ab * g_b) / det
        dB = -(-h_ab * g_a + h_aa * g_b) / det
        step = 1.0
        improved = False
        while step > 1e-10:
            cand = obj(A + step * dA, B + step * dB)
            if cand < best - 1e-12:
                A += step * dA
                B += step * dB
                best = cand
                improved = True
                break
            step *= 0.5
        if not improved or (abs(g_a) < 1e-10 and abs(g_b) < 1e-10):
            break
    return A, B


class SvmModel(TrainedModel):
    kind = "svm"

    def __init__(self, spec, n_features, sv_x, sv_coef, b, gamma, platt_ab):
        super().__init__(spec, n_features)
        self.sv_x = sv_x  # support vectors
        self.sv_coef = sv_coef  # alpha_i * y_i for support vectors
        self.b = b
        self.gamma = gamma
        self.platt_ab = platt_ab

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        p = self.spec.params
        K = _kernel_matrix(
            p["kernel"], X, self.sv_x, self.gamma, p["degree"], p.get("coef0", 0.0)
        )
        return K @ self.sv_coef + self.b

    def _proba1(self, X: np.ndarray) -> np.ndarray:
        f = self.decision_function(X)
        A, B = self.platt_ab
        z = np.clip(A * f + B, -500, 500)
        return 1.0 / (1.0 + np.exp(z))

    def state_dict(self) -> dict:
        return {
            "sv_x": self.sv_x.tolist(),
            "sv_coef": self.sv_coef.tolist(),
            "b": self.b,
            "gamma": self.gamma,
            "platt_ab": list(self.platt_ab),
        }

    @classmethod
    def from_state(cls, spec: ModelSpec, n_features: int, state: dict) -> "SvmModel":
        return cls(
            spec,
            n_features,
            np.array(state["sv_x"], dtype=np.float64),
            np.array(state["sv_coef"], dtype=np.float64),
            float(state["b"]),
            float(state["gamma"]),
            tuple(state["platt_ab"]),
        )


def train_svm(
    m: DesignMatrix,
    c: float = 1.0,
    kernel: str = "linear",
    degree: int = 3,
    coef0: float = 0.0,
    tol: float = 1e-3,
    max_iter: int = 2_000_000,
) -> SvmModel:
    if c <= 0:
        raise ValueError("C must be positive")
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}")
    X, y01 = design_xy(m)
    require_both_classes(y01, "svm")
    y = np.where(y01 == 1, 1.0, -1.0)
    var = float(X.var())
    gamma = 1.0 / (X.shape[1] * var) if var > 0 else 1.0 / max(X.shape[1], 1)
    K = _kernel_matrix(kernel, X, X, gamma, degree, coef0)
    alpha, b = _smo(K, y, float(c), tol, max_iter)
    coef = alpha * y
    sv = np.flatnonzero(alpha > 1e-10)
    sv_x = X[sv].copy()
    sv_coef = coef[sv]
    spec = ModelSpec(
        "svm",
        {"c": float(c), "kernel": kernel, "degree": int(degree), "coef0": float(coef0)},
    )
    model = SvmModel(spec, m.x.cols, sv_x, sv_coef, float(b), gamma, (0.0, 0.0))
    train_decision = model.decision_function(X)
    model.platt_ab = _fit_platt(train_decision, y01)
    model.train_log.record(float(np.sum(alpha) - 0.5 * coef @ (K @ coef)))
    return model
