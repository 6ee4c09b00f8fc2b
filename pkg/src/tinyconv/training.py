"""Shared full-batch gradient trainer with adaptive moment updates.

Both the feed-forward nets and the sequence models train by minimizing the
mean squared error in scaled [0, 1] space with the same optimizer and the
same stopping rule: stop once the training normalized RMS error has not
improved by more than ``tol`` for ``patience`` consecutive epochs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError


@dataclass(frozen=True)
class OptimizerConfig:
    step_size: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    tol: float = 1e-7       # minimum normalized-RMSE improvement that counts
    patience: int = 200     # epochs without improvement before stopping
    clip_norm: float = 10.0  # global gradient-norm clip; BPTT needs it


def fit_adam(loss_grad, params0: np.ndarray, max_epochs: int,
             config: OptimizerConfig = OptimizerConfig()):
    """Minimize a scaled-space MSE; returns (best_params, epochs_run, best_nrmse).

    ``loss_grad(params) -> (mse, grad)``.  The early-stop metric is the
    normalized RMSE, 100 * sqrt(mse), matching the evaluation measure when
    targets fill [0, 1].
    """
    params = np.array(params0, dtype=float)
    m = np.zeros_like(params)
    v = np.zeros_like(params)
    best = np.inf
    best_params = params.copy()
    best_epoch = 0
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        mse, grad = loss_grad(params)
        if not np.isfinite(mse) or not np.all(np.isfinite(grad)):
            raise DivergenceError(f"loss diverged at epoch {epoch}")
        norm = float(np.linalg.norm(grad))
        if norm > config.clip_norm:
            grad = grad * (config.clip_norm / norm)
        nrmse = 100.0 * np.sqrt(mse)
        if nrmse < best - config.tol:
            best = nrmse
            best_params = params.copy()
            best_epoch = epoch
        elif epoch - best_epoch >= config.patience:
            break
        m = config.beta1 * m + (1.0 - config.beta1) * grad
        v = config.beta2 * v + (1.0 - config.beta2) * grad * grad
        m_hat = m / (1.0 - config.beta1 ** epoch)
        v_hat = v / (1.0 - config.beta2 ** epoch)
        params -= config.step_size * m_hat / (np.sqrt(v_hat) + config.eps)
    return best_params, epoch, best
