"""Binary logistic regression with L2 (Newton) or L1 (proximal) fitting.

Objective: mean cross-entropy plus (1/C) times the regulariser, scaled per
sample; the intercept is never penalised.  L2 uses damped Newton to a
gradient-norm below 1e-6; L1 uses proximal gradient (ISTA with backtracking)
on the smooth part.  Non-convergence is reported as a warning on the train
log, not an exception.
"""

from __future__ import annotations

import warnings

import numpy as np

from ..dataset import DesignMatrix
from .base import ModelSpec, TrainedModel, TrainLog, design_xy, require_both_classes

__all__ = ["LogisticRegressionModel", "train_logistic_regression", "lr_loss_and_grad"]

GRAD_TOL = 1e-6


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def lr_loss_and_grad(beta: np.ndarray, Xb: np.ndarray, y: np.ndarray, c: float, penalty: str):
    """Mean BCE + regulariser and its gradient.

    `beta` includes the intercept as its last entry; `Xb` carries the bias
    column.  The L1 term is excluded from the returned gradient (handled by
    the proximal step); its subgradient contribution is still reflected in
    the loss value.
    """
    n = len(y)
    z = Xb @ beta
    p = _sigmoid(z)
    eps = 1e-15
    loss = float(-np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)))
    grad = Xb.T @ (p - y) / n
    w = beta[:-1]
    if penalty == "l2":
        loss += float(w @ w) / (2.0 * c * n)
        grad = grad + np.concatenate([w, [0.0]]) / (c * n)
    else:
        loss += float(np.abs(w).sum()) / (c * n)
    return loss, grad


class LogisticRegressionModel(TrainedModel):
    kind = "logistic_regression"

    def __init__(self, spec, n_features, beta, train_log=None):
        super().__init__(spec, n_features, train_log)
        self.beta = beta  # weights + intercept last

    def _proba1(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(X @ self.beta[:-1] + self.beta[-1])

    def state_dict(self) -> dict:
        return {"beta": self.beta.tolist()}

    @classmethod
    def from_state(cls, spec: ModelSpec, n_features: int, state: dict):
        return cls(spec, n_features, np.array(state["beta"], dtype=np.float64))


def _fit_l2(Xb, y, c, max_iter=100):
    n, d = Xb.shape
    beta = np.zeros(d)
    log = TrainLog()
    loss, grad = lr_loss_and_grad(beta, Xb, y, c, "l2")
    log.record(loss)
    for _ in range(max_iter):
        if np.linalg.norm(grad) < GRAD_TOL:
            return beta, log, True
        p = _sigmoid(Xb @ beta)
        w = np.maximum(p * (1 - p), 1e-10)
        H = (Xb * w[:, None]).T @ Xb / n
        reg = np.ones(d) / (c * n)
        reg[-1] = 0.0
        H = H + np.diag(reg) + 1e-12 * np.eye(d)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = grad
        t = 1.0
        while t > 1e-12:
            cand = beta - t * step
            cand_loss, cand_grad = lr_loss_and_grad(cand, Xb, y, c, "l2")
            if cand_loss <= loss + 1e-15:
                beta, loss, grad = cand, cand_loss, cand_grad
                log.record(loss)
                break
            t *= 0.5
        else:
            break
    converged = np.linalg.norm(grad) < GRAD_TOL
    return beta, log, converged


def _fit_l1(Xb, y, c, max_iter=5000):
    n, d = Xb.shape
    beta = np.zeros(d)
    log = TrainLog()
    lam = 1.0 / (c * n)

    def smooth(beta):
        z = Xb @ beta
        p = _sigmoid(z)
        eps = 1e-15
        f = float(-np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)))
        g = Xb.T @ (p - y) / n
        return f, g

    # FISTA with the Lipschitz bound ||X||^2 / (4 n) for the BCE gradient
    L = float(np.linalg.norm(Xb, 2) ** 2) / (4.0 * n) + 1e-12
    step = 1.0 / L
    f, g = smooth(beta)
    log.record(f + lam * np.abs(beta[:-1]).sum())
    momentum = beta.copy()
    t_acc = 1.0
    for _ in range(max_iter):
        _, g_m = smooth(momentum)
        cand = momentum - step * g_m
        cand[:-1] = np.sign(cand[:-1]) * np.maximum(np.abs(cand[:-1]) - step * lam, 0.0)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc * t_acc))
        momentum = cand + ((t_acc - 1.0) / t_next) * (cand - beta)
        t_acc = t_next
        move = np.linalg.norm(cand - beta)
        beta = cand
        f, g = smooth(beta)
        log.record(f + lam * np.abs(beta[:-1]).sum())
        # optimality: minimal-norm subgradient within tolerance
        sub = g.copy()
        wpart = beta[:-1]
        nz = wpart != 0.0
        sub_w = sub[:-1]
        sub_w[nz] += lam * np.sign(wpart[nz])
        sub_w[~nz] = np.sign(sub_w[~nz]) * np.maximum(np.abs(sub_w[~nz]) - lam, 0.0)
        if np.linalg.norm(sub) < GRAD_TOL or move < 1e-12:
            return beta, log, True
    return beta, log, False


def train_logistic_regression(
    m: DesignMatrix, penalty: str = "l2", c: float = 1.0
) -> LogisticRegressionModel:
    if c <= 0:
        raise ValueError("C must be positive")
    if penalty not in ("l1", "l2"):
        raise ValueError(f"unknown penalty {penalty!r}")
    X, y = design_xy(m)
    require_both_classes(y, "logistic_regression")
    Xb = np.column_stack([X, np.ones(len(y))])
    if penalty == "l2":
        beta, log, converged = _fit_l2(Xb, y, float(c))
    else:
        beta, log, converged = _fit_l1(Xb, y, float(c))
    if not converged:
        warnings.warn(
            "logistic regression did not reach the gradient tolerance; "
            "returning the best iterate",
            RuntimeWarning,
            stacklevel=2,
        )
    spec = ModelSpec("logistic_regression", {"penalty": penalty, "c": float(c)})
    return LogisticRegressionModel(spec, m.x.cols, beta, log)
