"""Localization functionals computed from a solved instance.

From the occupation probabilities theta we derive:

  alpha_k  = sum_x theta_{k,x}^2      (replica collision probability at step k)
  rho      = mean_k alpha_k           (expected replica overlap fraction)
  ell      = max over deterministic paths of the mean theta along the path,
             found by dynamic programming over the reachability cone
  gamma_k  = sum_x h(omega_{k,x}) theta_{k,x}
  tau_k    = sum_x omega_{k,x} theta_{k,x}

plus Monte Carlo estimates of the layer-conditional expectations of alpha_k
and gamma_k obtained by redrawing one disorder layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .engine import (EnvOverrides, PolymerInstance, ThetaSolution, env_layer,
                     env_value, forward_backward)
from .lattice import layer_mask, neighbors, validate_path
from .rng import derive_seed

_PRIMED_TAG = 0x41C7


@dataclass
class LocalizationReport:
    """Per-instance localization summary."""

    rho: float
    ell: float
    argmax_path: np.ndarray
    alpha_profile: np.ndarray
    gamma_profile: Optional[np.ndarray] = None
    tau_profile: Optional[np.ndarray] = None


def alpha_profile(solution: ThetaSolution) -> np.ndarray:
    """alpha_k = sum_x theta_{k,x}^2 for k = 1..n."""
    return np.array([(t ** 2).sum() for t in solution.theta_layers])


def alpha_floor(d: int, n: int) -> np.ndarray:
    """Cauchy-Schwarz lower bound (2k+1)^-d for each step."""
    ks = np.arange(1, n + 1)
    return (2.0 * ks + 1.0) ** (-d)


def rho(solution: ThetaSolution) -> float:
    """Expected replica overlap fraction: the mean of the alpha profile."""
    return float(alpha_profile(solution).mean())


def _shift_max(prev: np.ndarray, d: int) -> np.ndarray:
    """Max of the previous DP layer over neighbors, box (2k-1)^d -> (2k+1)^d."""
    m = prev.shape[0]
    out = np.full((m + 2,) * d, -np.inf)
    for j in range(d):
        for off in (0, 2):
            sl = tuple(slice(off, off + m) if a == j else slice(1, m + 1)
                       for a in range(d))
            np.maximum(out[sl], prev, out=out[sl])
    return out


def ell(solution: ThetaSolution) -> Tuple[float, np.ndarray]:
    """Degree of localization and a path attaining it.

    Dynamic program over all nearest-neighbor paths from the origin
    (including sites of zero theta); ties broken by the lexicographically
    smallest site.  Returns (ell, path of shape (n, d)).
    """
    d, n = solution.d, solution.n

    layers = []
    m1 = np.where(layer_mask(d, 1), solution.theta_array(1), -np.inf)
    layers.append(m1)
    for k in range(2, n + 1):
        mk = _shift_max(layers[-1], d) + solution.theta_array(k)
        mk = np.where(layer_mask(d, k), mk, -np.inf)
        layers.append(mk)

    # argmax in C order == lexicographically smallest coordinate tuple
    flat = int(np.argmax(layers[n - 1]))
    site = tuple(int(c) - n for c in np.unravel_index(flat, layers[n - 1].shape))
    best = float(layers[n - 1][tuple(c + n for c in site)])

    path = np.empty((n, d), dtype=np.int64)
    path[n - 1] = site
    x = site
    for k in range(n - 1, 0, -1):
        target = None
        target_val = -np.inf
        for y in neighbors(x):
            if max(abs(c) for c in y) > k:
                continue
            v = float(layers[k - 1][tuple(c + k for c in y)])
            if v > target_val:
                target_val = v
                target = y
        x = target
        path[k - 1] = x

    return best / n, path


def gamma_tau_profiles(solution: ThetaSolution, instance: PolymerInstance):
    """(gamma_k, tau_k) arrays.

    h is defined against the raw (uncentered) density, so for centered
    instances it is evaluated at omega + mean.
    """
    n, d = solution.n, solution.d
    shift = instance.law.mean if instance.centered else 0.0
    gamma = np.empty(n)
    tau = np.empty(n)
    guard = instance.law.guard
    for k in range(1, n + 1):
        th = solution.theta_array(k)
        om = env_layer(instance, k, solution.overrides)
        support = th > 0
        w = om[support]
        raw = w + shift
        if np.any(raw <= instance.law.support_lo + guard) or \
           np.any(raw >= instance.law.support_hi - guard):
            raise ValueError(f"omega at step {k} sits on the support edge; h undefined")
        hv = np.asarray(instance.law.h(raw), dtype=np.float64)
        gamma[k - 1] = float((hv * th[support]).sum())
        tau[k - 1] = float((w * th[support]).sum())
    return gamma, tau


def psi(instance: PolymerInstance, path: np.ndarray, index_set: Iterable[int],
        overrides: Optional[EnvOverrides] = None) -> float:
    """sum over k in the index set of h(omega_{k, x_k}) along the path."""
    path = np.asarray(path)
    validate_path(path, instance.d)
    ks = sorted(set(int(k) for k in index_set))
    if ks and (ks[0] < 1 or ks[-1] > instance.n):
        raise ValueError("index set must lie in 1..n")
    shift = instance.law.mean if instance.centered else 0.0
    total = 0.0
    for k in ks:
        w = env_value(instance, k, tuple(path[k - 1]), overrides)
        total += float(instance.law.h(w + shift))
    return total


def primed_estimates(instance: PolymerInstance, k: int, resamples: int,
                     overrides: Optional[EnvOverrides] = None):
    """Monte Carlo estimates of the layer-k conditional expectations of
    alpha_k and gamma_k, obtained by redrawing layer-k disorder.

    Returns (alpha_hat, gamma_hat, (alpha_se, gamma_se)).  Deterministic
    given (instance.seed, k, resamples): resample j redraws layer k from the
    derived sub-seed mix(seed, k, j).
    """
    if resamples < 100:
        raise ValueError("need at least 100 resamples")
    base = overrides or EnvOverrides()
    alphas = np.empty(resamples)
    gammas = np.empty(resamples)
    for j in range(resamples):
        sub = derive_seed(instance.seed, _PRIMED_TAG, k, j)
        ls = dict(base.layer_seeds)
        ls[k] = sub
        ov = EnvOverrides(site_values=dict(base.site_values),
                          zero_layers=base.zero_layers, layer_seeds=ls)
        sol = forward_backward(instance, ov, keep_forward=False)
        th = sol.theta_array(k)
        alphas[j] = float((th ** 2).sum())
        g, _ = _gamma_single_layer(sol, instance, k)
        gammas[j] = g
    se = (float(np.std(alphas, ddof=1)) / math.sqrt(resamples),
          float(np.std(gammas, ddof=1)) / math.sqrt(resamples))
    return float(alphas.mean()), float(gammas.mean()), se


def _gamma_single_layer(solution: ThetaSolution, instance: PolymerInstance, k: int):
    th = solution.theta_array(k)
    om = env_layer(instance, k, solution.overrides)
    shift = instance.law.mean if instance.centered else 0.0
    support = th > 0
    w = om[support]
    hv = np.asarray(instance.law.h(w + shift), dtype=np.float64)
    return float((hv * th[support]).sum()), float((w * th[support]).sum())


def build_report(solution: ThetaSolution, instance: PolymerInstance,
                 with_env_profiles: bool = True) -> LocalizationReport:
    """Assemble the localization report and check its internal identities."""
    alpha = alpha_profile(solution)
    r = float(alpha.mean())
    l, path = ell(solution)
    if not (l * l <= r + 1e-12 and r <= l + 1e-12):
        raise NumericalErrorReport(r, l)
    gamma = tau = None
    if with_env_profiles:
        gamma, tau = gamma_tau_profiles(solution, instance)
    return LocalizationReport(rho=r, ell=l, argmax_path=path,
                              alpha_profile=alpha, gamma_profile=gamma,
                              tau_profile=tau)


class NumericalErrorReport(RuntimeError):
    def __init__(self, r, l):
        super().__init__(f"overlap chain violated: ell^2={l*l} rho={r} ell={l}")
