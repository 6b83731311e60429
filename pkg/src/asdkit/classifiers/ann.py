"""Feed-forward network for binary screening, trained from scratch.

Architecture (fixed): dense(1024, ReLU) -> batch-norm -> dense(512, ReLU)
-> batch-norm -> dense(512, ReLU) -> batch-norm -> dense(1, sigmoid), with
binary cross-entropy loss.  Optimisers: sgd, adam, rmsprop.  The learning
rate is multiplied by `lr_factor` whenever validation loss fails to improve
for `patience` epochs; training stops early after 25 stalled epochs or at
200 epochs.  Batch norm uses batch statistics while training and running
statistics at inference.

The forward/backward passes are exposed as pure functions of a parameter
dict so gradients can be checked against finite differences layer by layer.
"""

from __future__ import annotations

import numpy as np

from ..dataset import DesignMatrix
from ..numerics import SeededRng
from .base import ModelSpec, TrainedModel, TrainLog, design_xy

__all__ = [
    "AnnModel",
    "train_ann",
    "init_params",
    "forward",
    "loss_and_grads",
    "HIDDEN_WIDTHS",
]

HIDDEN_WIDTHS = (1024, 512, 512)
MAX_EPOCHS = 200
EARLY_STOP_PATIENCE = 25
BN_EPS = 1e-5
BN_MOMENTUM = 0.1  # running = (1-m)*running + m*batch
MIN_DELTA = 1e-4


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def init_params(n_in: int, rng: SeededRng, widths=HIDDEN_WIDTHS) -> dict:
    """He-initialised weights; batch-norm scale 1, shift 0."""
    params: dict[str, np.ndarray] = {}
    fan = n_in
    for li, width in enumerate(widths):
        params[f"W{li}"] = rng.normal_array(fan * width).reshape(fan, width) * np.sqrt(
            2.0 / fan
        )
        params[f"b{li}"] = np.zeros(width)
        params[f"gamma{li}"] = np.ones(width)
        params[f"beta{li}"] = np.zeros(width)
        fan = width
    li = len(widths)
    params[f"W{li}"] = rng.normal_array(fan).reshape(fan, 1) * np.sqrt(1.0 / fan)
    params[f"b{li}"] = np.zeros(1)
    return params


def _init_running(widths=HIDDEN_WIDTHS) -> dict:
    state = {}
    for li, width in enumerate(widths):
        state[f"mean{li}"] = np.zeros(width)
        state[f"var{li}"] = np.ones(width)
    return state


def forward(
    params: dict,
    X: np.ndarray,
    running: dict | None = None,
    training: bool = False,
    widths=HIDDEN_WIDTHS,
):
    """Returns (probabilities, cache-for-backward).

    In training mode batch statistics normalise each batch-norm layer and the
    running statistics (if given) are updated in place; at inference the
    running statistics are used.
    """
    cache = {"X": X, "h": [], "bn": []}
    a = X
    for li in range(len(widths)):
        z = a @ params[f"W{li}"] + params[f"b{li}"]
        r = np.maximum(z, 0.0)
        if training:
            mu = r.mean(axis=0)
            var = r.var(axis=0)
            if running is not None:
                running[f"mean{li}"] = (1 - BN_MOMENTUM) * running[f"mean{li}"] + BN_MOMENTUM * mu
                n_b = max(r.shape[0], 2)
                unbiased = var * n_b / (n_b - 1)
                running[f"var{li}"] = (1 - BN_MOMENTUM) * running[f"var{li}"] + BN_MOMENTUM * unbiased
        else:
            mu = running[f"mean{li}"]
            var = running[f"var{li}"]
        inv = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (r - mu) * inv
        a = params[f"gamma{li}"] * xhat + params[f"beta{li}"]
        cache["h"].append((z, r))
        cache["bn"].append((xhat, inv, mu, var))
    li = len(widths)
    z_out = a @ params[f"W{li}"] + params[f"b{li}"]
    p = _sigmoid(z_out[:, 0])
    cache["a_last"] = a
    cache["z_out"] = z_out
    return p, cache


def _bce(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, 1e-12, 1 - 1e-12)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def loss_and_grads(
    params: dict,
    X: np.ndarray,
    y: np.ndarray,
    widths=HIDDEN_WIDTHS,
    training: bool = True,
    running: dict | None = None,
):
    """BCE loss and gradients for every parameter tensor (batch-stat mode)."""
    n = X.shape[0]
    p, cache = forward(params, X, running=running, training=training, widths=widths)
    loss = _bce(y, p)
    grads: dict[str, np.ndarray] = {}
    # output layer: dL/dz_out = (p - y) / n
    dz = ((p - y) / n)[:, None]
    li = len(widths)
    grads[f"W{li}"] = cache["a_last"].T @ dz
    grads[f"b{li}"] = dz.sum(axis=0)
    da = dz @ params[f"W{li}"].T
    for li in range(len(widths) - 1, -1, -1):
        xhat, inv, mu, var = cache["bn"][li]
        z, r = cache["h"][li]
        grads[f"gamma{li}"] = (da * xhat).sum(axis=0)
        grads[f"beta{li}"] = da.sum(axis=0)
        dxhat = da * params[f"gamma{li}"]
        if training:
            # batch-norm backward with batch statistics
            m = r.shape[0]
            dr = (
                dxhat - dxhat.mean(axis=0) - xhat * (dxhat * xhat).mean(axis=0)
            ) * inv
        else:
            dr = dxhat * inv
        dzh = dr * (z > 0.0)
        grads[f"W{li}"] = (cache["X"] if li == 0 else _bn_out(cache, params, li - 1)).T @ dzh
        grads[f"b{li}"] = dzh.sum(axis=0)
        if li > 0:
            da = dzh @ params[f"W{li}"].T
    return loss, grads, p


def _bn_out(cache, params, li):
    xhat, inv, mu, var = cache["bn"][li]
    return params[f"gamma{li}"] * xhat + params[f"beta{li}"]


class _Optimizer:
    def __init__(self, kind: str, params: dict, lr: float):
        self.kind = kind
        self.lr = lr
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        for k, g in grads.items():
            if self.kind == "sgd":
                params[k] -= self.lr * g
            elif self.kind == "rmsprop":
                self.v[k] = 0.9 * self.v[k] + 0.1 * g * g
                params[k] -= self.lr * g / (np.sqrt(self.v[k]) + 1e-8)
            elif self.kind == "adam":
                self.m[k] = 0.9 * self.m[k] + 0.1 * g
                self.v[k] = 0.999 * self.v[k] + 0.001 * g * g
                mhat = self.m[k] / (1 - 0.9 ** self.t)
                vhat = self.v[k] / (1 - 0.999 ** self.t)
                params[k] -= self.lr * mhat / (np.sqrt(vhat) + 1e-8)
            else:
                raise ValueError(f"unknown optimizer {self.kind!r}")


class AnnModel(TrainedModel):
    kind = "ann"

    def __init__(self, spec, n_features, params, running, widths=HIDDEN_WIDTHS, train_log=None):
        super().__init__(spec, n_features, train_log)
        self.params = params
        self.running = running
        self.widths = tuple(widths)

    def _proba1(self, X: np.ndarray) -> np.ndarray:
        p, _ = forward(self.params, X, running=self.running, training=False, widths=self.widths)
        return p

    def state_dict(self) -> dict:
        return {
            "widths": list(self.widths),
            "params": {k: v.tolist() for k, v in self.params.items()},
            "running": {k: v.tolist() for k, v in self.running.items()},
        }

    @classmethod
    def from_state(cls, spec: ModelSpec, n_features: int, state: dict):
        return cls(
            spec,
            n_features,
            {k: np.array(v, dtype=np.float64) for k, v in state["params"].items()},
            {k: np.array(v, dtype=np.float64) for k, v in state["running"].items()},
            widths=tuple(state["widths"]),
        )


def train_ann(
    m: DesignMatrix,
    optimizer: str = "adam",
    batch_size: int = 32,
    lr_factor: float = 0.8,
    patience: int = 10,
    rng: SeededRng | None = None,
    learning_rate: float = 1e-3,
    max_epochs: int = MAX_EPOCHS,
    widths=HIDDEN_WIDTHS,
) -> AnnModel:
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    rng = rng or SeededRng(0)
    X, y = design_xy(m)
    n = len(y)
    # 10% validation split for the LR schedule and early stop
    n_val = max(1, int(round(0.1 * n))) if n >= 10 else 0
    perm = rng.shuffle(n)
    val_idx = perm[:n_val]
    tr_idx = perm[n_val:]
    Xtr, ytr = X[tr_idx], y[tr_idx]
    Xval, yval = X[val_idx], y[val_idx]
    params = init_params(X.shape[1], rng, widths)
    running = _init_running(widths)
    opt = _Optimizer(optimizer, params, learning_rate)
    log = TrainLog()
    best_val = np.inf
    stall = 0
    stop_stall = 0
    for epoch in range(max_epochs):
        order = rng.shuffle(len(ytr))
        epoch_losses = []
        for start in range(0, len(ytr), batch_size):
            bidx = order[start : start + batch_size]
            if len(bidx) < 2:
                continue  # batch-norm needs at least two rows
            loss, grads, _ = loss_and_grads(
                params, Xtr[bidx], ytr[bidx], widths=widths, training=True,
                running=running,
            )
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"ann training diverged at epoch {epoch}: non-finite loss"
                )
            opt.step(params, grads)
            epoch_losses.append(loss)
        log.record(float(np.mean(epoch_losses)))
        log.epochs = epoch + 1
        if n_val:
            pval, _ = forward(params, Xval, running=running, training=False, widths=widths)
            val_loss = _bce(yval, pval)
        else:
            val_loss = log.objectives[-1]
        if val_loss < best_val - MIN_DELTA:
            best_val = val_loss
            stall = 0
            stop_stall = 0
        else:
            stall += 1
            stop_stall += 1
        if stall >= patience:
            opt.lr *= lr_factor
            stall = 0
        if stop_stall >= EARLY_STOP_PATIENCE:
            break
    spec = ModelSpec(
        "ann",
        {
            "optimizer": optimizer,
            "batch_size": batch_size,
            "lr_factor": lr_factor,
            "patience": patience,
            "learning_rate": learning_rate,
        },
    )
    return AnnModel(spec, m.x.cols, params, running, widths, log)
