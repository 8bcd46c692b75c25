"""k-state Markov-switching dynamic regression on daily log returns.

Emission model: r_t = mu_i + beta_i * r_{t-1} + sigma_i * eps_t within state i,
with a fixed transition matrix between states. The first observation acts only
as the lag regressor, so state probabilities exist for observations 1..T-1.
Estimation is maximum likelihood via EM with seeded random restarts; states in
every returned fit are sorted so state 0 has the lowest volatility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator

from .data import ReturnSeries
from .errors import FitError
from .validation import as_float_1d, check_probability_rows

LOG_2PI = math.log(2.0 * math.pi)
_PRED_FLOOR = 1e-300


@dataclass(frozen=True)
class MsrParams:
    """Parameters of a k-state switching regression.

    transition[r] is the distribution of the next state given current state r;
    delta is the state distribution at the first modelled observation.
    """

    mu: np.ndarray
    beta: np.ndarray
    sigma: np.ndarray
    transition: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        for name in ("mu", "beta", "sigma", "delta"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "transition", np.asarray(self.transition, dtype=float))
        k = self.mu.shape[0]
        if not (self.beta.shape == (k,) and self.sigma.shape == (k,) and self.delta.shape == (k,)):
            raise ValueError("mu, beta, sigma, delta must share one length k")
        if self.transition.shape != (k, k):
            raise ValueError(f"transition must be {k}x{k}, got {self.transition.shape}")
        if np.any(self.sigma <= 0) or not np.all(np.isfinite(self.sigma)):
            raise ValueError("every sigma must be finite and > 0")
        check_probability_rows(self.transition, "transition rows", tol=1e-12)
        check_probability_rows(self.delta[None, :], "delta", tol=1e-12)

    @property
    def k(self) -> int:
        return self.mu.shape[0]

    def sorted_by_sigma(self) -> "MsrParams":
        """Relabel states so sigma is ascending (stable under ties)."""
        order = np.argsort(self.sigma, kind="stable")
        return MsrParams(
            mu=self.mu[order],
            beta=self.beta[order],
            sigma=self.sigma[order],
            transition=self.transition[np.ix_(order, order)],
            delta=self.delta[order],
        )

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "mu": self.mu.tolist(),
            "beta": self.beta.tolist(),
            "sigma": self.sigma.tolist(),
            "transition": self.transition.tolist(),
            "delta": self.delta.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MsrParams":
        return cls(
            mu=np.array(d["mu"], dtype=float),
            beta=np.array(d["beta"], dtype=float),
            sigma=np.array(d["sigma"], dtype=float),
            transition=np.array(d["transition"], dtype=float),
            delta=np.array(d["delta"], dtype=float),
        )


@dataclass
class MsrFit:
    """A fitted model with its probability tracks over observations 1..T-1."""

    params: MsrParams
    filtered: np.ndarray
    smoothed: np.ndarray
    log_likelihood: float
    converged: bool = True
    n_iter: int = 0
    seed: int = 0
    restarts: int = 1
    loglik_history: list = field(default_factory=list)
    restart_histories: list = field(default_factory=list)
    restart_logliks: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.params.k

    def to_dict(self) -> dict:
        d = self.params.to_dict()
        d["log_likelihood"] = self.log_likelihood
        d["fit"] = {
            "converged": self.converged,
            "iterations": self.n_iter,
            "seed": self.seed,
            "restarts": self.restarts,
        }
        return d


def _return_values(returns) -> np.ndarray:
    values = returns.values if isinstance(returns, ReturnSeries) else returns
    return as_float_1d(values, "returns", min_len=2, require_finite=True)


def _forward(params: MsrParams, r: np.ndarray):
    """Scaled forward recursion.

    Returns (filtered, predicted, log_likelihood) over the T-1 modelled
    observations. predicted[t] is the state prior before seeing r_{t+1}.
    Densities are max-shifted per step so the recursion survives sigma down
    to ~1e-4 on long series without underflow.
    """
    k = params.k
    y = r[1:]
    x = r[:-1]
    m = y.shape[0]
    z = (y[:, None] - (params.mu[None, :] + x[:, None] * params.beta[None, :])) / params.sigma[None, :]
    log_dens = -0.5 * z * z - np.log(params.sigma)[None, :] - 0.5 * LOG_2PI
    shift = log_dens.max(axis=1)
    dens = np.exp(log_dens - shift[:, None])

    filtered = np.empty((m, k))
    predicted = np.empty((m, k))
    trans = params.transition.tolist()
    dens_rows = dens.tolist()
    log_rows = log_dens.tolist()
    prior = params.delta.tolist()
    loglik = 0.0
    rng_k = range(k)
    for t in range(m):
        d = dens_rows[t]
        a = [prior[i] * d[i] for i in rng_k]
        c = a[0] if k == 1 else sum(a)
        if c > 0.0:
            loglik += math.log(c) + shift[t]
            post = [v / c for v in a]
        else:
            # All prior mass sits on states whose shifted density underflowed;
            # redo this step fully in log space.
            log_row = log_rows[t]
            la = [
                (math.log(prior[i]) + log_row[i]) if prior[i] > 0.0 else -math.inf
                for i in rng_k
            ]
            top = max(la)
            if not math.isfinite(top):
                raise FitError("forward recursion lost all probability mass")
            a = [math.exp(v - top) for v in la]
            c = sum(a)
            loglik += top + math.log(c)
            post = [v / c for v in a]
        predicted[t] = prior
        filtered[t] = post
        prior = [sum(post[i] * trans[i][j] for i in rng_k) for j in rng_k]
    return filtered, predicted, loglik


def hamilton_filter(params: MsrParams, returns) -> tuple[np.ndarray, float]:
    """Filtered state probabilities Pr(S_t | r_1..r_t) and the data log-likelihood.

    The first return is consumed as the lag regressor, so row t of the output
    refers to return index t+1.
    """
    r = _return_values(returns)
    filtered, _, loglik = _forward(params, r)
    return filtered, loglik


def kim_smoother(params: MsrParams, filtered: np.ndarray) -> np.ndarray:
    """Backward pass turning filtered into smoothed probabilities Pr(S_t | all data).

    Predicted probabilities are reconstructed from the filtered track; zero
    predictions are floored to avoid 0/0 on degenerate chains.
    """
    filtered = np.asarray(filtered, dtype=float)
    m, k = filtered.shape
    predicted = np.empty_like(filtered)
    predicted[0] = params.delta
    if m > 1:
        predicted[1:] = filtered[:-1] @ params.transition
    smoothed = np.empty_like(filtered)
    smoothed[m - 1] = filtered[m - 1]
    trans = params.transition
    for t in range(m - 2, -1, -1):
        ratio = smoothed[t + 1] / np.maximum(predicted[t + 1], _PRED_FLOOR)
        smoothed[t] = filtered[t] * (trans @ ratio)
    return smoothed


def _smoothed_and_pairwise(params: MsrParams, filtered: np.ndarray, predicted: np.ndarray):
    """Smoothed marginals plus summed pairwise transition posteriors."""
    m, k = filtered.shape
    smoothed = np.empty_like(filtered)
    smoothed[m - 1] = filtered[m - 1]
    trans = params.transition
    for t in range(m - 2, -1, -1):
        ratio = smoothed[t + 1] / np.maximum(predicted[t + 1], _PRED_FLOOR)
        smoothed[t] = filtered[t] * (trans @ ratio)
    ratio = smoothed[1:] / np.maximum(predicted[1:], _PRED_FLOOR)
    pair_counts = np.einsum("ti,ij,tj->ij", filtered[:-1], trans, ratio)
    return smoothed, pair_counts


class _RestartCollapsed(Exception):
    """A state lost nearly all responsibility; abandon this restart."""


def _weighted_regression(y, x, w):
    """Weighted least squares of y on [1, x]; falls back to beta=0 when x is degenerate."""
    s0 = w.sum()
    s1 = float(w @ x)
    s2 = float(w @ (x * x))
    b0 = float(w @ y)
    b1 = float(w @ (x * y))
    det = s0 * s2 - s1 * s1
    if det <= 1e-12 * max(s0 * s2, 1e-30):
        return b0 / s0, 0.0
    mu = (s2 * b0 - s1 * b1) / det
    beta = (s0 * b1 - s1 * b0) / det
    return mu, beta


def _m_step(y, x, smoothed, pair_counts, delta_row) -> MsrParams:
    k = smoothed.shape[1]
    mu = np.empty(k)
    beta = np.empty(k)
    sigma = np.empty(k)
    for i in range(k):
        w = smoothed[:, i]
        total = w.sum()
        if total < 2.0:
            raise _RestartCollapsed(f"state {i} expected count {total:.3f} < 2")
        mu[i], beta[i] = _weighted_regression(y, x, w)
        resid = y - mu[i] - beta[i] * x
        var = float(w @ (resid * resid)) / total
        sigma[i] = math.sqrt(max(var, 1e-24))
    row_totals = pair_counts.sum(axis=1, keepdims=True)
    if np.any(row_totals <= 0):
        raise _RestartCollapsed("a transition row received no expected visits")
    transition = pair_counts / row_totals
    return MsrParams(mu=mu, beta=beta, sigma=sigma, transition=transition, delta=delta_row)


def _initial_params(r: np.ndarray, k: int, rng: np.random.Generator) -> MsrParams:
    """Persistence-favouring random start around the pooled regression fit."""
    y, x = r[1:], r[:-1]
    ones = np.ones_like(y)
    mu0, beta0 = _weighted_regression(y, x, ones)
    resid = y - mu0 - beta0 * x
    abs_resid = np.abs(resid)
    scale = max(float(np.std(resid)), 1e-8)

    qs = np.linspace(0.3, 0.9, k)
    sigma = np.quantile(abs_resid, qs) / 0.6745  # normal-consistency factor
    sigma = np.maximum(sigma * rng.uniform(0.7, 1.3, size=k), 1e-8)
    sigma.sort()
    mu = mu0 + rng.normal(0.0, 0.1 * scale, size=k)
    beta = np.clip(beta0 + rng.normal(0.0, 0.1, size=k), -0.9, 0.9)

    transition = np.empty((k, k))
    for i in range(k):
        alpha = np.full(k, 2.0)
        alpha[i] = 8.0
        transition[i] = rng.dirichlet(alpha)
    delta = np.full(k, 1.0 / k)
    return MsrParams(mu=mu, beta=beta, sigma=sigma, transition=transition, delta=delta)


def _em_single(r: np.ndarray, start: MsrParams, tol: float, max_iter: int):
    y, x = r[1:], r[:-1]
    params = start
    history: list[float] = []
    converged = False
    filtered = predicted = smoothed = None
    loglik = -math.inf
    for _ in range(max_iter):
        filtered, predicted, loglik = _forward(params, r)
        if history and loglik - history[-1] < tol:
            history.append(loglik)
            converged = True
            break
        history.append(loglik)
        smoothed, pair_counts = _smoothed_and_pairwise(params, filtered, predicted)
        params = _m_step(y, x, smoothed, pair_counts, smoothed[0])
    else:
        # Ran out of iterations: refresh the tracks for the last accepted params.
        filtered, predicted, loglik = _forward(params, r)
        history.append(loglik)
    smoothed = kim_smoother(params, filtered)
    return params, filtered, smoothed, loglik, history, converged


def em_fit(
    returns,
    k: int = 2,
    restarts: int = 10,
    tol: float = 1e-6,
    max_iter: int = 500,
    seed: int = 0,
) -> MsrFit:
    """Best-of-restarts EM maximum likelihood fit.

    Each restart draws its own starting point from a seed derived from
    (seed, restart index) and iterates filter/smoother E-steps against
    weighted-regression M-steps until the log-likelihood gain drops below
    tol. A restart whose states collapse (expected count < 2) is discarded.
    Ties between restarts resolve to the lowest restart index, so the result
    does not depend on execution order. Returned states are sorted by
    ascending sigma.
    """
    r = _return_values(returns)
    if k not in (2, 3):
        raise ValueError(f"k must be 2 or 3, got {k}")
    if r.shape[0] < 50:
        raise ValueError(f"need at least 50 returns to fit, got {r.shape[0]}")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")

    best = None
    histories: list[list[float]] = []
    finals: list[float | None] = []
    for idx in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(idx,)))
        start = _initial_params(r, k, rng)
        try:
            result = _em_single(r, start, tol, max_iter)
        except _RestartCollapsed:
            histories.append([])
            finals.append(None)
            continue
        histories.append(result[4])
        finals.append(result[3])
        if best is None or result[3] > best[3]:
            best = result
    if best is None:
        raise FitError(f"all {restarts} EM restarts collapsed; data may not support {k} states")

    params, filtered, smoothed, loglik, history, converged = best
    order = np.argsort(params.sigma, kind="stable")
    fit = MsrFit(
        params=params.sorted_by_sigma(),
        filtered=filtered[:, order],
        smoothed=smoothed[:, order],
        log_likelihood=loglik,
        converged=converged,
        n_iter=len(history) - 1,
        seed=seed,
        restarts=restarts,
        loglik_history=history,
        restart_histories=histories,
        restart_logliks=finals,
    )
    return fit


def reduce_probabilities(probs: np.ndarray) -> np.ndarray:
    """Collapse 3-state probability rows to binary labels by dropping the middle state.

    States must already be sorted by sigma; each row is labelled 0 (low) or 1
    (high) by comparing the outer states, ties resolving to low.
    """
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 2 or probs.shape[1] != 3:
        raise ValueError(f"expected a Tx3 probability matrix, got shape {probs.shape}")
    return (probs[:, 2] > probs[:, 0]).astype(np.int8)


def reduce_three_to_two(fit3: MsrFit) -> np.ndarray:
    """Per-day binary low/high labels from a 3-state fit, middle-sigma state discarded."""
    if fit3.k != 3:
        raise ValueError(f"reduction needs a 3-state fit, got k={fit3.k}")
    return reduce_probabilities(fit3.filtered)


def sample_path(params: MsrParams, T: int, seed: int = 0, *, start_date=None) -> tuple[np.ndarray, ReturnSeries]:
    """Simulate a state path and return series from the model; deterministic per seed.

    The first return seeds the lag from the state-0 stationary emission (plain
    emission if |beta_0| >= 1); subsequent states follow the transition rows.
    """
    if T < 2:
        raise ValueError(f"need T >= 2, got {T}")
    rng = np.random.default_rng(seed)
    k = params.k
    states = np.empty(T, dtype=np.int64)
    values = np.empty(T, dtype=float)

    cum_delta = np.cumsum(params.delta)
    cum_trans = np.cumsum(params.transition, axis=1)
    u = rng.random(T)
    eps = rng.standard_normal(T)

    states[0] = min(int(np.searchsorted(cum_delta, u[0], side="right")), k - 1)
    b0 = params.beta[0]
    if abs(b0) < 1.0:
        m0 = params.mu[0] / (1.0 - b0)
        s0 = params.sigma[0] / math.sqrt(1.0 - b0 * b0)
    else:
        m0, s0 = params.mu[0], params.sigma[0]
    values[0] = m0 + s0 * eps[0]
    for t in range(1, T):
        s = min(int(np.searchsorted(cum_trans[states[t - 1]], u[t], side="right")), k - 1)
        states[t] = s
        values[t] = params.mu[s] + params.beta[s] * values[t - 1] + params.sigma[s] * eps[t]

    from .synth import synthetic_dates  # local import to avoid a cycle

    dates = synthetic_dates(T, start=start_date)
    return states, ReturnSeries(dates, values)


class MarkovSwitchingRegression(BaseEstimator):
    """Estimator wrapper around :func:`em_fit` with frozen-parameter prediction.

    Parameters
    ----------
    k : number of states (2 or 3).
    restarts, tol, max_iter : EM settings.
    random_state : seed for the restart initialisations.
    """

    def __init__(self, k: int = 2, restarts: int = 10, tol: float = 1e-6,
                 max_iter: int = 500, random_state: int = 0):
        self.k = k
        self.restarts = restarts
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        """Fit on a 1-d array (or ReturnSeries) of daily log returns."""
        fit = em_fit(X, k=self.k, restarts=self.restarts, tol=self.tol,
                     max_iter=self.max_iter, seed=self.random_state)
        self.result_ = fit
        self.params_ = fit.params
        self.filtered_ = fit.filtered
        self.smoothed_ = fit.smoothed
        self.log_likelihood_ = fit.log_likelihood
        self.converged_ = fit.converged
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise FitError("estimator is not fitted; call fit() first")

    def predict_proba(self, X, kind: str = "filtered") -> np.ndarray:
        """State probabilities for a new series under the frozen parameters."""
        self._check_fitted()
        filtered, _ = hamilton_filter(self.params_, X)
        if kind == "filtered":
            return filtered
        if kind == "smoothed":
            return kim_smoother(self.params_, filtered)
        raise ValueError(f"kind must be 'filtered' or 'smoothed', got {kind!r}")

    def predict(self, X) -> np.ndarray:
        """Most likely state per observation from the filtered probabilities."""
        return np.argmax(self.predict_proba(X), axis=1)

    def score(self, X, y=None) -> float:
        self._check_fitted()
        _, loglik = hamilton_filter(self.params_, X)
        return loglik

    def sample(self, T: int, random_state: int = 0):
        self._check_fitted()
        return sample_path(self.params_, T, seed=random_state)
