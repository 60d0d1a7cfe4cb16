"""Gauss hypergeometric 2F1(a, b; a + b - m; w) for integer gap m = 0, 1, 2.

These are the only hypergeometric functions the sphere kernel needs: the
kernel itself (m = 0) and the two higher powers entering its mixed
derivative (m = 1, 2). Both regimes converge geometrically with ratio at
most ``switch``:

* ``w <= switch``: the defining power series in ``w``;
* ``w > switch``: the logarithmic connection formulas in ``1 - w``
  (Abramowitz & Stegun 15.3.10 and 15.3.12).
"""
import numpy as np
from scipy.special import digamma, gammaln, rgamma, gamma

from .errors import SlowConvergence

SWITCH = 0.5


def _power_series(a, b, c, w, tol, max_terms):
    term = np.ones_like(w)
    total = np.ones_like(w)
    for k in range(max_terms):
        term = term * (a + k) * (b + k) / ((k + 1.0) * (c + k)) * w
        total = total + term
        if np.all(np.abs(term) <= tol * np.abs(total)):
            return total
    raise SlowConvergence(
        f"2F1 power series not converged in {max_terms} terms (max w={np.max(w):.6g})"
    )


def _log_series(a, b, m, omw, tol, max_terms):
    """Connection formula around w = 1; ``omw`` is 1 - w, strictly positive."""
    log_omw = np.log(omw)
    c = a + b - m
    # singular finite part, m >= 1 only
    finite = np.zeros_like(omw)
    if m > 0:
        pref = gamma(m) * np.exp(gammaln(c) - gammaln(a) - gammaln(b))
        coef = 1.0
        for k in range(m):
            if k > 0:
                coef *= (a - m + k - 1) * (b - m + k - 1) / (k * (1 - m + k - 1))
            finite = finite + coef * omw ** (k - m)
        finite = pref * finite
    if m == 0:
        pref = np.exp(gammaln(a + b) - gammaln(a) - gammaln(b))
    else:
        # -(-1)^m Gamma(c) / (Gamma(a-m) Gamma(b-m)); vanishes when a-m or b-m is a non-positive integer
        pref = -((-1.0) ** m) * gamma(c) * rgamma(a - m) * rgamma(b - m)
    if pref == 0.0:
        return finite
    # bracket: m == 0 -> 2psi(k+1) - psi(a+k) - psi(b+k) - ln(1-w)
    #          m >= 1 -> ln(1-w) - psi(k+1) - psi(k+m+1) + psi(a+k) + psi(b+k)
    psi1 = digamma(1.0)
    psim = digamma(m + 1.0)
    psia = digamma(a)
    psib = digamma(b)
    coef = 1.0 / gamma(m + 1.0)
    power = np.ones_like(omw)
    total = np.zeros_like(omw)
    for k in range(max_terms):
        if m == 0:
            bracket = 2.0 * psi1 - psia - psib - log_omw
        else:
            bracket = log_omw - psi1 - psim + psia + psib
        term = coef * power * bracket
        total = total + term
        if k > 2 and np.all(np.abs(term) <= tol * np.abs(total)):
            break
        coef *= (a + k) * (b + k) / ((k + 1.0) * (k + m + 1.0))
        power = power * omw
        psi1 += 1.0 / (k + 1.0)
        psim += 1.0 / (k + m + 1.0)
        psia += 1.0 / (a + k)
        psib += 1.0 / (b + k)
    else:
        raise SlowConvergence(f"2F1 log series not converged in {max_terms} terms")
    return finite + pref * total


def hyp2f1_gap(a, b, m, w, omw=None, tol=1e-16, max_terms=400):
    """2F1(a, b; a + b - m; w) for 0 <= w < 1, vectorised over ``w``.

    Pass ``omw = 1 - w`` when it is known more accurately than ``1 - w``.
    """
    w = np.asarray(w, dtype=float)
    omw = 1.0 - w if omw is None else np.asarray(omw, dtype=float)
    w, omw = np.broadcast_arrays(w, omw)
    out = np.empty(w.shape)
    near = w > SWITCH
    if np.any(~near):
        out[~near] = _power_series(a, b, a + b - m, w[~near], tol, max_terms)
    if np.any(near):
        out[near] = _log_series(a, b, m, omw[near], tol, max_terms)
    return out
