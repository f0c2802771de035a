"""Minimax robust regression under the action-distribution covariate shift.

The reward model is a conditional Gaussian

    sigma^2(x, a) = (2 * w * rho_r + 1 / sigma0_sq)^-1
    mu(x, a)      = sigma^2(x, a) * (-2 * w * <rho_xr, f(x, a)> + mu0 / sigma0_sq)

where w = p(a|x) / pi(a|x) is the logging-over-target density ratio and
f(x, a) is the top hidden layer of a feedforward net on (context, one-hot
action). Training alternates exact negative-log-likelihood gradient steps on
(rho_r, rho_xr) with backprop SGD steps on the feature net. Setting every
ratio to 1 gives the iid ablation trained by `train_iid`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import LoggedDataset
from .nets import (
    FeedForwardNet,
    Layer,
    SgdConfig,
    TrainingFault,
    backward_batch,
    forward_batch,
    init_net,
    make_optimizer,
    spectral_normalize_net,
)
from .policies import Policy

SERIAL_FORMAT_TAG = "robust-regressor-v1"


@dataclass
class RhoParams:
    rho_r: float = 0.0
    rho_xr: np.ndarray = None  # (k,)

    def __post_init__(self):
        if self.rho_xr is not None:
            self.rho_xr = np.asarray(self.rho_xr, dtype=float)
        if self.rho_r < 0:
            raise ValueError("rho_r must be nonnegative")


@dataclass
class BaseGaussian:
    mu0: float = 0.5
    sigma0_sq: float = 1.0

    def __post_init__(self):
        if self.sigma0_sq <= 0:
            raise ValueError("sigma0_sq must be positive")


@dataclass
class RobustRegressor:
    net: FeedForwardNet  # input: context + one-hot action, output: k features
    rho: RhoParams
    base: BaseGaussian
    n_actions: int
    eta: float = 0.0
    r_min: float = 0.0
    r_max: float = 1.0
    ratio_max: float = 100.0
    # policies the regressor was trained against, kept so callers can
    # recompute the density ratio when predicting for arbitrary actions
    logging_policy: Policy | None = field(default=None, repr=False)
    target_policy: Policy | None = field(default=None, repr=False)

    @property
    def feature_dim(self) -> int:
        return self.net.out_dim


def action_encoding(action: int, n_actions: int) -> np.ndarray:
    if not 0 <= action < n_actions:
        raise ValueError(f"action {action} out of range for K={n_actions}")
    v = np.zeros(n_actions)
    v[action] = 1.0
    return v


def _net_inputs(contexts: np.ndarray, actions: np.ndarray,
                n_actions: int) -> np.ndarray:
    contexts = np.atleast_2d(np.asarray(contexts, dtype=float))
    actions = np.asarray(actions, dtype=int)
    onehot = np.zeros((contexts.shape[0], n_actions))
    onehot[np.arange(contexts.shape[0]), actions] = 1.0
    return np.hstack([contexts, onehot])


def features(reg: RobustRegressor, contexts: np.ndarray,
             actions: np.ndarray) -> np.ndarray:
    """f(x, a) for each record; returns (n, k)."""
    return forward_batch(reg.net, _net_inputs(contexts, actions, reg.n_actions))


def _gaussian_params(reg: RobustRegressor, feats: np.ndarray,
                     ratios: np.ndarray):
    ratios = np.clip(np.asarray(ratios, dtype=float), 0.0, reg.ratio_max)
    inv_s0 = 1.0 / reg.base.sigma0_sq
    sigma_sq = 1.0 / (2.0 * ratios * reg.rho.rho_r + inv_s0)
    mu = sigma_sq * (-2.0 * ratios * (feats @ reg.rho.rho_xr)
                     + reg.base.mu0 * inv_s0)
    return mu, sigma_sq


def predict(reg: RobustRegressor, context: np.ndarray, action: int,
            ratio: float) -> tuple[float, float]:
    """Conditional Gaussian (mu, sigma_sq) for one (context, action, ratio)."""
    f = features(reg, np.asarray(context)[None, :], np.array([action]))
    mu, sigma_sq = _gaussian_params(reg, f, np.array([ratio]))
    return float(mu[0]), float(sigma_sq[0])


def predict_batch(reg: RobustRegressor, contexts: np.ndarray,
                  actions: np.ndarray, ratios: np.ndarray):
    feats = features(reg, contexts, actions)
    return _gaussian_params(reg, feats, ratios)


def predict_clipped(reg: RobustRegressor, context: np.ndarray, action: int,
                    ratio: float) -> float:
    mu, _ = predict(reg, context, action, ratio)
    return float(np.clip(mu, reg.r_min, reg.r_max))


def mean_matrix(reg: RobustRegressor, contexts: np.ndarray,
                logging: Policy | None = None,
                target: Policy | None = None,
                clip: bool = True) -> np.ndarray:
    """Predicted means for every action of every context; returns (n, K).

    The density ratio per (x, a) is logging(a|x) / target(a|x), taken from the
    policies the regressor was trained with unless overridden.
    """
    logging = logging or reg.logging_policy
    target = target or reg.target_policy
    contexts = np.asarray(contexts, dtype=float)
    n = contexts.shape[0]
    if logging is None or target is None:
        ratio_mat = np.ones((n, reg.n_actions))
    else:
        p = logging.probs_matrix(contexts)
        pi = target.probs_matrix(contexts)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio_mat = np.where(pi > 0, p / np.maximum(pi, 1e-300), np.inf)
        ratio_mat = np.clip(ratio_mat, 0.0, reg.ratio_max)
    out = np.empty((n, reg.n_actions))
    for a in range(reg.n_actions):
        actions = np.full(n, a)
        mu, _ = predict_batch(reg, contexts, actions, ratio_mat[:, a])
        out[:, a] = mu
    if clip:
        out = np.clip(out, reg.r_min, reg.r_max)
    return out


def _nll_rho_grads(rewards, mu, sigma_sq, ratios, feats):
    """Exact gradients of the batch-mean Gaussian NLL w.r.t. (rho_r, rho_xr)."""
    resid = rewards - mu
    grad_r = float(np.mean(ratios * (rewards ** 2 - mu ** 2 - sigma_sq)))
    grad_xr = (2.0 * ratios * resid) @ feats / rewards.shape[0]
    return grad_r, grad_xr


def rho_gradients(reg: RobustRegressor, contexts: np.ndarray,
                  actions: np.ndarray, rewards: np.ndarray,
                  ratios: np.ndarray):
    """Gradient of the minibatch Gaussian negative log-likelihood w.r.t. rho.

    Returns (grad_rho_r, grad_rho_xr). These are the quantities descended on
    during training; they match central finite differences of the batch NLL.
    """
    rewards = np.asarray(rewards, dtype=float)
    if rewards.shape[0] == 0:
        raise ValueError("empty minibatch")
    ratios = np.clip(np.asarray(ratios, dtype=float), 0.0, reg.ratio_max)
    feats = features(reg, contexts, actions)
    mu, sigma_sq = _gaussian_params(reg, feats, ratios)
    grad_r, grad_xr = _nll_rho_grads(rewards, mu, sigma_sq, ratios, feats)
    if not (np.isfinite(grad_r) and np.all(np.isfinite(grad_xr))):
        raise TrainingFault("non-finite rho gradient")
    return grad_r, grad_xr


def _theta_out_grads(ratios, rewards, mu, rho_xr):
    """d(batch-mean NLL)/d(features), per sample: 2 w (r - mu) rho_xr / n."""
    coeff = (2.0 * ratios * (rewards - mu) / rewards.shape[0])[:, None]
    return coeff * rho_xr[None, :]


def theta_gradients(reg: RobustRegressor, contexts, actions, rewards, ratios):
    """Backpropagated feature-net gradients of the batch-mean Gaussian NLL."""
    rewards = np.asarray(rewards, dtype=float)
    ratios = np.clip(np.asarray(ratios, dtype=float), 0.0, reg.ratio_max)
    inputs = _net_inputs(contexts, actions, reg.n_actions)
    feats = forward_batch(reg.net, inputs)
    mu, _ = _gaussian_params(reg, feats, ratios)
    out_grads = _theta_out_grads(ratios, rewards, mu, reg.rho.rho_xr)
    grads, _ = backward_batch(reg.net, inputs, out_grads)
    return grads


def batch_nll(reg: RobustRegressor, contexts, actions, rewards, ratios) -> float:
    """Mean Gaussian negative log-likelihood of a batch; the training objective."""
    rewards = np.asarray(rewards, dtype=float)
    feats = features(reg, contexts, actions)
    mu, sigma_sq = _gaussian_params(reg, feats, ratios)
    return float(np.mean(0.5 * np.log(2.0 * np.pi * sigma_sq)
                         + (rewards - mu) ** 2 / (2.0 * sigma_sq)))


@dataclass
class RobustTrainSettings:
    rho_learning_rate: float = 0.01
    rho_max: float = 1e3
    ratio_max: float = 100.0
    spectral_norm: bool = True


def _train(logged: LoggedDataset, ratios: np.ndarray, hidden_dims: list[int],
           config: SgdConfig, eta: float, base: BaseGaussian,
           settings: RobustTrainSettings) -> RobustRegressor:
    if len(logged) == 0:
        raise ValueError("empty logged dataset")
    n = len(logged)
    rng = np.random.default_rng(config.seed)
    in_dim = logged.contexts.shape[1] + logged.n_actions
    net = init_net([in_dim, *hidden_dims], rng)
    k = hidden_dims[-1]
    reg = RobustRegressor(
        net=net, rho=RhoParams(0.0, np.zeros(k)), base=base,
        n_actions=logged.n_actions, eta=eta,
        r_min=logged.r_min, r_max=logged.r_max, ratio_max=settings.ratio_max)
    step = make_optimizer(net, config)
    inputs = _net_inputs(logged.contexts, logged.actions, logged.n_actions)
    rewards = logged.rewards
    ratios = np.clip(np.asarray(ratios, dtype=float), 0.0, settings.ratio_max)
    lr_rho = settings.rho_learning_rate
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            if settings.spectral_norm:
                spectral_normalize_net(net)
            feats = forward_batch(net, inputs[idx])
            mu, sigma_sq = _gaussian_params(reg, feats, ratios[idx])
            if not np.all(np.isfinite(mu)):
                raise TrainingFault(f"diverged at epoch {epoch}")
            grad_r, grad_xr = _nll_rho_grads(rewards[idx], mu, sigma_sq,
                                             ratios[idx], feats)
            reg.rho.rho_r = float(np.clip(
                reg.rho.rho_r - lr_rho * (grad_r + eta * reg.rho.rho_r),
                0.0, settings.rho_max))
            reg.rho.rho_xr = reg.rho.rho_xr - lr_rho * (
                grad_xr + eta * reg.rho.rho_xr)
            out_grads = _theta_out_grads(ratios[idx], rewards[idx], mu,
                                         reg.rho.rho_xr)
            grads, _ = backward_batch(net, inputs[idx], out_grads)
            step(grads)
    return reg


def training_ratios(logged: LoggedDataset, target: Policy, logging: Policy,
                    ratio_max: float = 100.0) -> np.ndarray:
    """Density ratio p(a|x) / pi(a|x) at the logged records, clipped."""
    idx = np.arange(len(logged))
    if logged.propensities is not None:
        p = logged.propensities
    else:
        p = logging.probs_matrix(logged.contexts)[idx, logged.actions]
    pi = target.probs_matrix(logged.contexts)[idx, logged.actions]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(pi > 0, p / np.maximum(pi, 1e-300), np.inf)
    return np.clip(ratios, 0.0, ratio_max)


def train_robust(logged: LoggedDataset, target: Policy, logging: Policy,
                 hidden_dims: list[int], config: SgdConfig,
                 eta: float = 1e-3, base: BaseGaussian | None = None,
                 settings: RobustTrainSettings | None = None) -> RobustRegressor:
    """Fit the covariate-shift-aware conditional Gaussian reward model."""
    base = base or BaseGaussian()
    settings = settings or RobustTrainSettings()
    ratios = training_ratios(logged, target, logging, settings.ratio_max)
    reg = _train(logged, ratios, hidden_dims, config, eta, base, settings)
    reg.logging_policy = logging
    reg.target_policy = target
    return reg


def train_iid(logged: LoggedDataset, hidden_dims: list[int],
              config: SgdConfig, eta: float = 1e-3,
              base: BaseGaussian | None = None,
              settings: RobustTrainSettings | None = None) -> RobustRegressor:
    """Ablation that ignores the shift: every density ratio is fixed to 1.

    Predictions from the result should also be queried at ratio 1.
    """
    base = base or BaseGaussian()
    settings = settings or RobustTrainSettings()
    ratios = np.ones(len(logged))
    return _train(logged, ratios, hidden_dims, config, eta, base, settings)


def save_regressor(reg: RobustRegressor, path) -> None:
    """Serialize to .npz, loss-free at 64-bit precision."""
    payload = {
        "format_tag": np.array(SERIAL_FORMAT_TAG),
        "rho_r": np.array(reg.rho.rho_r),
        "rho_xr": reg.rho.rho_xr,
        "mu0": np.array(reg.base.mu0),
        "sigma0_sq": np.array(reg.base.sigma0_sq),
        "n_actions": np.array(reg.n_actions),
        "eta": np.array(reg.eta),
        "r_min": np.array(reg.r_min),
        "r_max": np.array(reg.r_max),
        "ratio_max": np.array(reg.ratio_max),
        "n_layers": np.array(len(reg.net.layers)),
    }
    for i, layer in enumerate(reg.net.layers):
        payload[f"w{i}"] = layer.weight
        payload[f"b{i}"] = layer.bias
        payload[f"act{i}"] = np.array(layer.activation)
    np.savez(path, **payload)


def load_regressor(path) -> RobustRegressor:
    with np.load(path, allow_pickle=False) as blob:
        tag = str(blob["format_tag"])
        if tag != SERIAL_FORMAT_TAG:
            raise ValueError(f"unsupported format tag {tag!r}")
        layers = [
            Layer(weight=blob[f"w{i}"], bias=blob[f"b{i}"],
                  activation=str(blob[f"act{i}"]))
            for i in range(int(blob["n_layers"]))
        ]
        return RobustRegressor(
            net=FeedForwardNet(layers),
            rho=RhoParams(float(blob["rho_r"]), blob["rho_xr"]),
            base=BaseGaussian(float(blob["mu0"]), float(blob["sigma0_sq"])),
            n_actions=int(blob["n_actions"]),
            eta=float(blob["eta"]),
            r_min=float(blob["r_min"]),
            r_max=float(blob["r_max"]),
            ratio_max=float(blob["ratio_max"]),
        )
