"""Gaussian-process regression used to freeze the similarity-space map.

One regressor per output coordinate, isotropic Matern kernel with
smoothness 5/2, zero prior mean over centered targets. The length scale
starts at the mean pairwise distance between training inputs and is tuned
by maximizing the log marginal likelihood within an order of magnitude of
that prior; a wrong length scale is the main failure mode of the frozen
map, so both likelihoods (prior and optimized) are kept for inspection.
"""

from __future__ import annotations

import math
import warnings
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize
from scipy.spatial.distance import cdist, pdist
from sklearn.base import BaseEstimator, RegressorMixin

SQRT5 = math.sqrt(5.0)


def matern52(r: np.ndarray, length_scale: float, signal_var: float) -> np.ndarray:
    """Matern kernel, nu = 5/2: k(r) = s2 (1 + u + u^2/3) exp(-u), u = sqrt(5) r / l."""
    u = SQRT5 * np.asarray(r, dtype=float) / length_scale
    return signal_var * (1.0 + u + u * u / 3.0) * np.exp(-u)


def _matern52_dlog_ell(r: np.ndarray, length_scale: float, signal_var: float) -> np.ndarray:
    """Derivative of the kernel w.r.t. log(length_scale)."""
    u = SQRT5 * np.asarray(r, dtype=float) / length_scale
    return signal_var * (u * u / 3.0) * (1.0 + u) * np.exp(-u)


def mean_pairwise_distance(X: np.ndarray) -> float:
    """Length-scale prior: mean Euclidean distance between training inputs."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise ValueError("need at least 2 inputs")
    d = pdist(X)
    mean = float(d.mean())
    if mean <= 0.0:
        raise ValueError("inputs are all identical; length-scale prior undefined")
    return mean


class MaternGPRegressor(BaseEstimator, RegressorMixin):
    """GP posterior-mean regressor with a prior-anchored length scale.

    Parameters
    ----------
    length_scale : explicit length scale; None derives the prior from data.
    signal_std : explicit signal std; None starts from the target std.
    noise_var : fixed jitter added to the kernel diagonal.
    optimize : tune (length_scale, signal_std) by L-BFGS-B on the log
        marginal likelihood, bounded to [0.1, 10] times the prior length
        scale. On optimizer failure the prior values are kept and
        ``fit_warning_`` is set.
    """

    def __init__(self, length_scale: Optional[float] = None,
                 signal_std: Optional[float] = None,
                 noise_var: float = 1e-6, optimize: bool = True,
                 ls_bounds: tuple[float, float] = (0.1, 10.0)):
        self.length_scale = length_scale
        self.signal_std = signal_std
        self.noise_var = noise_var
        self.optimize = optimize
        self.ls_bounds = ls_bounds

    # -- likelihood --------------------------------------------------------

    def _lml_and_grad(self, theta: np.ndarray, R: np.ndarray, y: np.ndarray):
        """Log marginal likelihood and its gradient in (log ell, log sf)."""
        ell = math.exp(theta[0])
        sf2 = math.exp(2.0 * theta[1])
        m = y.shape[0]
        K = matern52(R, ell, sf2)
        K[np.diag_indices_from(K)] += self.noise_var
        try:
            L = cho_factor(K, lower=True)
        except np.linalg.LinAlgError:
            return -np.inf, np.zeros(2)
        alpha = cho_solve(L, y)
        lml = (-0.5 * float(y @ alpha)
               - float(np.log(np.diag(L[0])).sum())
               - 0.5 * m * math.log(2.0 * math.pi))
        Kinv = cho_solve(L, np.eye(m))
        inner = np.outer(alpha, alpha) - Kinv
        dK_ell = _matern52_dlog_ell(R, ell, sf2)
        dK_sf = K.copy()
        dK_sf[np.diag_indices_from(dK_sf)] -= self.noise_var
        dK_sf *= 2.0
        grad = np.array([0.5 * float((inner * dK_ell).sum()),
                         0.5 * float((inner * dK_sf).sum())])
        return lml, grad

    def log_marginal_likelihood(self, theta) -> tuple[float, np.ndarray]:
        """Evaluate the LML and gradient at (log ell, log sf) for the
        training data last passed to :meth:`fit`."""
        return self._lml_and_grad(np.asarray(theta, dtype=float), self._R, self._yc)

    # -- estimator API -----------------------------------------------------

    def fit(self, X, y):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError("X must be (m, n) with matching targets")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("inputs and targets must be finite")
        self.X_ = X
        self.y_mean_ = float(y.mean())
        yc = y - self.y_mean_
        self._yc = yc
        R = cdist(X, X)
        self._R = R

        prior_ell = self.length_scale or mean_pairwise_distance(X)
        sf0 = self.signal_std if self.signal_std is not None else float(yc.std())
        degenerate = sf0 <= 0.0
        if degenerate:
            sf0 = 1.0
        theta0 = np.array([math.log(prior_ell), math.log(sf0)])
        self.lml_at_prior_, _ = self._lml_and_grad(theta0, R, yc)
        self.fit_warning_ = None

        theta = theta0
        if self.optimize and not degenerate:
            lo, hi = self.ls_bounds
            bounds = [(math.log(prior_ell * lo), math.log(prior_ell * hi)),
                      (theta0[1] - 3.0 * math.log(10.0), theta0[1] + 3.0 * math.log(10.0))]

            def nll(t):
                val, g = self._lml_and_grad(t, R, yc)
                if not np.isfinite(val):
                    return 1e25, np.zeros(2)
                return -val, -g

            try:
                res = minimize(nll, theta0, jac=True, method="L-BFGS-B", bounds=bounds)
                if np.all(np.isfinite(res.x)) and np.isfinite(res.fun):
                    theta = res.x
                else:
                    raise RuntimeError("optimizer returned non-finite values")
            except Exception as exc:  # keep the prior; the model stays usable
                self.fit_warning_ = f"hyperparameter optimization failed: {exc}"
                warnings.warn(self.fit_warning_)
                theta = theta0

        lml_opt, _ = self._lml_and_grad(theta, R, yc)
        if self.optimize and lml_opt < self.lml_at_prior_:
            # optimizer moved downhill (should not happen): fall back
            self.fit_warning_ = "optimized likelihood below prior; keeping prior"
            warnings.warn(self.fit_warning_)
            theta = theta0
            lml_opt = self.lml_at_prior_

        self.ell_ = math.exp(theta[0])
        self.sigma_f_ = math.exp(theta[1])
        self.prior_ell_ = prior_ell
        self.lml_ = lml_opt
        K = matern52(R, self.ell_, self.sigma_f_ ** 2)
        K[np.diag_indices_from(K)] += self.noise_var
        L = cho_factor(K, lower=True)
        self.alpha_ = cho_solve(L, yc)
        return self

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.ascontiguousarray(X, dtype=np.float64))
        if X.shape[1] != self.X_.shape[1]:
            raise ValueError(f"query dimension {X.shape[1]} != trained {self.X_.shape[1]}")
        Ks = matern52(cdist(X, self.X_), self.ell_, self.sigma_f_ ** 2)
        # einsum keeps per-row summation order independent of the batch size,
        # so a genome projects to bitwise the same point alone or in a batch
        return np.einsum("ij,j->i", Ks, self.alpha_) + self.y_mean_

    # -- serialization -----------------------------------------------------

    def to_arrays(self, prefix: str = "") -> dict:
        return {
            prefix + "X": self.X_,
            prefix + "alpha": self.alpha_,
            prefix + "params": np.array([self.ell_, self.sigma_f_, self.noise_var,
                                         self.y_mean_, self.lml_, self.lml_at_prior_,
                                         self.prior_ell_]),
        }

    @classmethod
    def from_arrays(cls, data: dict, prefix: str = "") -> "MaternGPRegressor":
        params = data[prefix + "params"]
        model = cls(noise_var=float(params[2]), optimize=False)
        model.X_ = data[prefix + "X"].astype(np.float64)
        model.alpha_ = data[prefix + "alpha"].astype(np.float64)
        model.ell_ = float(params[0])
        model.sigma_f_ = float(params[1])
        model.y_mean_ = float(params[3])
        model.lml_ = float(params[4])
        model.lml_at_prior_ = float(params[5])
        model.prior_ell_ = float(params[6])
        model.fit_warning_ = None
        return model
