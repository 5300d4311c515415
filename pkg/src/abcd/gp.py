"""Gaussian process regression core.

Squared-exponential kernel, closed-form log marginal likelihood and predictive
posterior under a zero mean function, and type-2 maximum-likelihood
hyperparameter fitting. All dense linear algebra goes through a Cholesky
factorisation of K + noise*I (never an explicit inverse); the factorisation is
held in an immutable snapshot that can be extended by one observation in
O(n^2), which is what the information-gain inner loop leans on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import minimize

from .seeds import as_rng

LOG_2PI = math.log(2.0 * math.pi)

# Diagonal jitter ladder tried, in order, when a factorisation fails.
JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)


class GpError(ValueError):
    """Invalid GP inputs."""


class FactorizationError(RuntimeError):
    """K + noise*I failed SPD factorisation at every jitter level."""

    def __init__(self, jitters: tuple[float, ...]):
        self.jitters = jitters
        super().__init__(
            f"covariance matrix is not numerically SPD; attempted jitter ladder {jitters}"
        )


class FitError(ValueError):
    """Hyperparameter fitting cannot run; caller should fall back to defaults."""


@dataclass(frozen=True)
class GpHyperparams:
    """SE-kernel hyperparameters: signal variance, per-dimension inverse
    lengthscales, and observation noise variance."""

    signal_variance: float
    inverse_lengthscales: tuple[float, ...]
    noise_variance: float

    def __post_init__(self) -> None:
        vals = (self.signal_variance, *self.inverse_lengthscales, self.noise_variance)
        if not all(math.isfinite(v) and v > 0 for v in vals):
            raise GpError(f"hyperparameters must be strictly positive and finite: {self}")

    @property
    def input_dim(self) -> int:
        return len(self.inverse_lengthscales)


def default_hyperparams(input_dim: int) -> GpHyperparams:
    """Documented fallback when fitting is unavailable or fails."""
    return GpHyperparams(
        signal_variance=1.0,
        inverse_lengthscales=(1.0,) * input_dim,
        noise_variance=0.1,
    )


@dataclass(frozen=True)
class GpDataset:
    """n observations of a p-dimensional input and a scalar target."""

    inputs: np.ndarray  # (n, p)
    targets: np.ndarray  # (n,)

    def __post_init__(self) -> None:
        X = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.targets, dtype=float)
        if X.ndim != 2:
            raise GpError(f"inputs must be 2-d (n, p), got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise GpError(f"targets shape {y.shape} does not match inputs {X.shape}")
        if X.size and not np.all(np.isfinite(X)):
            raise GpError("inputs contain non-finite values")
        if y.size and not np.all(np.isfinite(y)):
            raise GpError("targets contain non-finite values")
        X = X.copy()
        y = y.copy()
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", y)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def p(self) -> int:
        return self.inputs.shape[1]


def kernel_se(x: np.ndarray, x2: np.ndarray, h: GpHyperparams) -> float:
    """signal_variance * exp(-sum_i nu_i (x_i - x2_i)^2)."""
    a = np.asarray(x, dtype=float).ravel()
    b = np.asarray(x2, dtype=float).ravel()
    if a.shape != b.shape or a.shape[0] != h.input_dim:
        raise GpError(
            f"dimension mismatch: x {a.shape}, x2 {b.shape}, hyperparams expect {h.input_dim}"
        )
    nu = np.asarray(h.inverse_lengthscales)
    return float(h.signal_variance * np.exp(-np.sum(nu * (a - b) ** 2)))


def kernel_matrix(X: np.ndarray, X2: np.ndarray, h: GpHyperparams) -> np.ndarray:
    """Cross-covariance matrix between the rows of X (n, p) and X2 (m, p)."""
    X = np.asarray(X, dtype=float)
    X2 = np.asarray(X2, dtype=float)
    if X.shape[1] != h.input_dim or X2.shape[1] != h.input_dim:
        raise GpError(
            f"dimension mismatch: inputs have {X.shape[1]}/{X2.shape[1]} columns, "
            f"hyperparams expect {h.input_dim}"
        )
    nu = np.asarray(h.inverse_lengthscales)
    diff = X[:, None, :] - X2[None, :, :]
    return h.signal_variance * np.exp(-np.einsum("nmk,k->nm", diff**2, nu))


def _cholesky_with_jitter(A: np.ndarray) -> tuple[np.ndarray, float]:
    attempted = []
    n = A.shape[0]
    for jitter in JITTER_LADDER:
        attempted.append(jitter)
        try:
            L = np.linalg.cholesky(A + jitter * np.eye(n) if jitter else A)
            return L, jitter
        except np.linalg.LinAlgError:
            continue
    raise FactorizationError(tuple(attempted))


class GpSnapshot:
    """Immutable posterior state of one GP regression.

    Holds the training data, the Cholesky factor of K + noise*I, the solved
    weights alpha = (K + noise*I)^{-1} y, and the log marginal likelihood.
    ``extend`` appends one observation and returns a new snapshot, reusing the
    existing factor (one triangular solve, no refactorisation).
    """

    __slots__ = ("hyperparams", "X", "y", "L", "alpha", "log_ml", "jitter")

    def __init__(self, hyperparams: GpHyperparams, X, y, L, alpha, log_ml, jitter):
        self.hyperparams = hyperparams
        self.X = X
        self.y = y
        self.L = L
        self.alpha = alpha
        self.log_ml = log_ml
        self.jitter = jitter
        for arr in (self.X, self.y, self.L, self.alpha):
            arr.flags.writeable = False

    @classmethod
    def empty(cls, hyperparams: GpHyperparams) -> "GpSnapshot":
        p = hyperparams.input_dim
        return cls(
            hyperparams,
            np.zeros((0, p)),
            np.zeros(0),
            np.zeros((0, 0)),
            np.zeros(0),
            0.0,
            0.0,
        )

    @classmethod
    def build(cls, data: GpDataset, hyperparams: GpHyperparams) -> "GpSnapshot":
        if data.p != hyperparams.input_dim:
            raise GpError(
                f"dataset has {data.p} input dims, hyperparams expect {hyperparams.input_dim}"
            )
        if data.n == 0:
            return cls.empty(hyperparams)
        K = kernel_matrix(data.inputs, data.inputs, hyperparams)
        A = K + hyperparams.noise_variance * np.eye(data.n)
        L, jitter = _cholesky_with_jitter(A)
        alpha = _chol_solve(L, data.targets)
        log_ml = _log_ml_from_factor(L, data.targets, alpha)
        return cls(hyperparams, data.inputs.copy(), data.targets.copy(), L, alpha, log_ml, jitter)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def extend(self, x_new: np.ndarray, y_new: float) -> "GpSnapshot":
        """Snapshot with (x_new, y_new) appended; matches a from-scratch build."""
        x_new = np.asarray(x_new, dtype=float).reshape(1, -1)
        if x_new.shape[1] != self.hyperparams.input_dim:
            raise GpError(
                f"new input has {x_new.shape[1]} dims, expected {self.hyperparams.input_dim}"
            )
        if not (np.all(np.isfinite(x_new)) and math.isfinite(y_new)):
            raise GpError("new observation contains non-finite values")
        h = self.hyperparams
        X_ext = np.vstack([self.X, x_new])
        y_ext = np.append(self.y, float(y_new))
        if self.n == 0:
            return GpSnapshot.build(GpDataset(X_ext, y_ext), h)
        k_vec = kernel_matrix(self.X, x_new, h)[:, 0]
        k_ss = h.signal_variance + h.noise_variance + self.jitter
        w = solve_triangular(self.L, k_vec, lower=True)
        pivot_sq = k_ss - w @ w
        if pivot_sq <= 0:
            # conditioning degraded past the current jitter; rebuild via the ladder
            return GpSnapshot.build(GpDataset(X_ext, y_ext), h)
        n = self.n
        L_ext = np.zeros((n + 1, n + 1))
        L_ext[:n, :n] = self.L
        L_ext[n, :n] = w
        L_ext[n, n] = math.sqrt(pivot_sq)
        alpha = _chol_solve(L_ext, y_ext)
        log_ml = _log_ml_from_factor(L_ext, y_ext, alpha)
        return GpSnapshot(h, X_ext, y_ext, L_ext, alpha, log_ml, self.jitter)

    def predict(self, x_star: np.ndarray) -> tuple[float, float]:
        """Latent-function predictive (mean, variance) at one point."""
        means, variances = self.predict_batch(np.asarray(x_star, dtype=float).reshape(1, -1))
        return float(means[0]), float(variances[0])

    def predict_batch(self, X_star: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Latent-function predictive means and variances at m points (m, p)."""
        X_star = np.asarray(X_star, dtype=float)
        if X_star.ndim != 2 or X_star.shape[1] != self.hyperparams.input_dim:
            raise GpError(
                f"query shape {X_star.shape} incompatible with input dim "
                f"{self.hyperparams.input_dim}"
            )
        h = self.hyperparams
        if self.n == 0:
            m = X_star.shape[0]
            return np.zeros(m), np.full(m, h.signal_variance)
        K_star = kernel_matrix(self.X, X_star, h)  # (n, m)
        means = K_star.T @ self.alpha
        V = solve_triangular(self.L, K_star, lower=True)
        variances = h.signal_variance - np.einsum("nm,nm->m", V, V)
        np.clip(variances, 0.0, None, out=variances)
        return means, variances

    def predictive_logpdf(self, X_star: np.ndarray, y_star: np.ndarray) -> np.ndarray:
        """Log density of observations y_star at X_star (includes noise variance).

        Equals the increment of the log marginal likelihood when one of these
        points is appended to the snapshot.
        """
        means, var_f = self.predict_batch(X_star)
        var_obs = var_f + self.hyperparams.noise_variance
        y_star = np.asarray(y_star, dtype=float)
        return -0.5 * ((y_star - means) ** 2 / var_obs + np.log(var_obs) + LOG_2PI)


def _chol_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    z = solve_triangular(L, b, lower=True)
    return solve_triangular(L.T, z, lower=False)


def _log_ml_from_factor(L: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> float:
    n = y.shape[0]
    return float(-0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * LOG_2PI)


def log_marginal_likelihood(data: GpDataset, h: GpHyperparams) -> float:
    """Closed-form log evidence of the targets under the SE-kernel GP."""
    if data.n < 1:
        raise GpError("log marginal likelihood requires at least one observation")
    return GpSnapshot.build(data, h).log_ml


def predictive(data: GpDataset, h: GpHyperparams, x_star: np.ndarray) -> tuple[float, float]:
    """Predictive (mean, latent variance) at x_star; n = 0 returns the prior.

    The returned variance excludes observation noise; add ``h.noise_variance``
    for the predictive variance of a noisy observation.
    """
    return GpSnapshot.build(data, h).predict(x_star)


@dataclass(frozen=True)
class FitBounds:
    """Box constraints for type-2 ML fitting (all strictly positive)."""

    signal_variance: tuple[float, float] = (1e-3, 1e3)
    inverse_lengthscale: tuple[float, float] = (1e-3, 1e3)
    noise_variance: tuple[float, float] = (1e-6, 1e2)

    def __post_init__(self) -> None:
        for lo, hi in (self.signal_variance, self.inverse_lengthscale, self.noise_variance):
            if not (0 < lo <= hi and math.isfinite(hi)):
                raise GpError(f"bounds must be finite, positive, ordered: {self}")


def _pack(h: GpHyperparams) -> np.ndarray:
    return np.log(np.array([h.signal_variance, *h.inverse_lengthscales, h.noise_variance]))


def _unpack(theta: np.ndarray, p: int) -> GpHyperparams:
    vals = np.exp(theta)
    return GpHyperparams(
        signal_variance=float(vals[0]),
        inverse_lengthscales=tuple(float(v) for v in vals[1 : 1 + p]),
        noise_variance=float(vals[1 + p]),
    )


def fit_hyperparams(
    data: GpDataset,
    bounds: FitBounds | None = None,
    restarts: int = 5,
    seed: int | np.random.Generator = 0,
) -> GpHyperparams:
    """Type-2 ML point estimate via multi-start L-BFGS-B over log-parameters.

    The returned point is never worse than any start evaluated, and always
    lies inside the bounds. Deterministic given the seed.
    """
    if data.n < 3:
        raise FitError(
            f"hyperparameter fitting needs n >= 3 observations, got {data.n}; "
            "use default_hyperparams instead"
        )
    bounds = bounds or FitBounds()
    rng = as_rng(seed)
    p = data.p
    log_bounds = [np.log(bounds.signal_variance)]
    log_bounds += [np.log(bounds.inverse_lengthscale)] * p
    log_bounds += [np.log(bounds.noise_variance)]
    log_bounds = np.array(log_bounds)

    def neg_log_ml(theta: np.ndarray) -> float:
        try:
            h = _unpack(theta, p)
            return -log_marginal_likelihood(data, h)
        except (FactorizationError, GpError):
            return 1e12

    def clip_to_bounds(theta: np.ndarray) -> np.ndarray:
        return np.clip(theta, log_bounds[:, 0], log_bounds[:, 1])

    starts = [clip_to_bounds(_pack(default_hyperparams(p)))]
    for _ in range(max(0, restarts - 1)):
        starts.append(rng.uniform(log_bounds[:, 0], log_bounds[:, 1]))

    best_theta = None
    best_value = math.inf
    for theta0 in starts:
        value0 = neg_log_ml(theta0)
        if value0 < best_value:
            best_value, best_theta = value0, theta0
        result = minimize(
            neg_log_ml,
            theta0,
            method="L-BFGS-B",
            bounds=[tuple(b) for b in log_bounds],
        )
        if result.fun < best_value:
            best_value, best_theta = result.fun, clip_to_bounds(result.x)
    if best_theta is None or not math.isfinite(best_value):
        raise FitError("all fitting starts failed to produce a finite log marginal likelihood")
    return _unpack(best_theta, p)
