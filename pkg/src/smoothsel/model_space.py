"""Nested model space over polynomial orders and its prior.

Only prefix inclusion patterns are admissible: including the degree-j term
requires every lower-degree term, so the model space is indexed by the
order k = 0..N alone.  Integrating independent Beta(a, b) inclusion
probabilities under that heredity constraint gives the closed-form prior
pi(k) = (a/(a+b))^k * (b/(a+b)) for k < N, with the remaining geometric
tail lumped onto the full model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ModelIndex:
    """One nested model: order k out of a space capped at max_order.

    ``inclusion[j - 1]`` is True when the degree-j term is in the model,
    for j = 1..max_order; a prefix pattern by construction.
    """

    k: int
    max_order: int
    inclusion: np.ndarray

    def __post_init__(self) -> None:
        if not (0 <= self.k <= self.max_order):
            raise ValueError(f"order {self.k} outside [0, {self.max_order}]")
        if self.inclusion.shape != (self.max_order,):
            raise ValueError("inclusion vector length must equal max_order")


@dataclass(frozen=True)
class ModelPrior:
    """Prior over orders 0..max_order induced by Beta(a, b) inclusion."""

    a: float
    b: float
    max_order: int
    probs: np.ndarray
    log_probs: np.ndarray


def enumerate_models(max_order: int) -> list[ModelIndex]:
    """All nested models gamma_0..gamma_N as prefix inclusion vectors."""
    if max_order < 0:
        raise ValueError(f"max_order must be >= 0, got {max_order}")
    models = []
    for k in range(max_order + 1):
        inc = np.zeros(max_order, dtype=bool)
        inc[:k] = True
        models.append(ModelIndex(k=k, max_order=max_order, inclusion=inc))
    return models


def model_prior(max_order: int, a: float = 1.0, b: float = 1.0) -> ModelPrior:
    """Closed-form prior over orders under heredity-constrained inclusion.

    Parameters
    ----------
    max_order : int
        Largest order N in the space.
    a, b : float
        Beta hyperparameters of the per-term inclusion probability; both
        must be positive.  The default a = b = 1 halves the mass at each
        extra order: (1/2, 1/4, ..., 2^-N, 2^-N).

    Returns
    -------
    ModelPrior
        Probabilities and their logs over orders 0..N; sums to 1.
    """
    if max_order < 0:
        raise ValueError(f"max_order must be >= 0, got {max_order}")
    if not (a > 0 and b > 0):
        raise ValueError(f"Beta hyperparameters must be positive, got a={a}, b={b}")
    p_in = a / (a + b)
    k = np.arange(max_order + 1)
    log_probs = k * np.log(p_in) + np.log1p(-p_in)
    # The full model absorbs the geometric tail: no term left to exclude.
    log_probs[max_order] = max_order * np.log(p_in)
    probs = np.exp(log_probs)
    return ModelPrior(
        a=float(a), b=float(b), max_order=max_order, probs=probs, log_probs=log_probs
    )
