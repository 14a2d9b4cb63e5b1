"""Packing of ParamVector into an unconstrained vector and back.

Packed layout::

    [alpha (q) | mu_1, log(mu_2 - mu_1), ... | per regime: beta (p), log sigma, atanh rho]

Reported layout replaces the cutoff increments by the cutoffs themselves,
log sigma by sigma and atanh rho by rho.
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .types import ModelSpec, ParamVector, RegimeParams


@dataclass(frozen=True)
class ParamLayout:
    """Positions of each parameter block in the packed vector."""

    n_alpha: int
    n_stages: int
    n_beta: int
    n_regimes: int

    @classmethod
    def from_spec(cls, spec: ModelSpec, n_alpha: int, n_beta: int) -> "ParamLayout":
        return cls(n_alpha, spec.n_stages, n_beta, spec.n_regimes)

    @property
    def n_mu(self) -> int:
        return self.n_stages - 1

    @property
    def regime_width(self) -> int:
        return self.n_beta + 2

    @property
    def size(self) -> int:
        return self.n_alpha + self.n_mu + self.n_regimes * self.regime_width

    @property
    def alpha(self) -> slice:
        return slice(0, self.n_alpha)

    @property
    def mu(self) -> slice:
        return slice(self.n_alpha, self.n_alpha + self.n_mu)

    def regime_start(self, r: int) -> int:
        return self.n_alpha + self.n_mu + r * self.regime_width

    def beta(self, r: int) -> slice:
        start = self.regime_start(r)
        return slice(start, start + self.n_beta)

    def sigma(self, r: int) -> int:
        return self.regime_start(r) + self.n_beta

    def rho(self, r: int) -> int:
        return self.regime_start(r) + self.n_beta + 1

    def names(
        self,
        z_names: Sequence[str],
        x_names: Sequence[str],
        outcome_stages: Sequence[int] = (),
    ) -> list[str]:
        """Reported-scale parameter labels."""
        labels = [f"alpha[{name}]" for name in z_names]
        labels += [f"mu[{k + 1}]" for k in range(self.n_mu)]
        stages = list(outcome_stages) or list(range(self.n_regimes))
        for r in range(self.n_regimes):
            s = stages[r]
            labels += [f"beta{s}[{name}]" for name in x_names]
            labels += [f"sigma{s}", f"rho{s}"]
        return labels


def layout_of(params: ParamVector) -> ParamLayout:
    n_beta = params.regimes[0].beta.size if params.regimes else 0
    return ParamLayout(params.alpha.size, params.n_stages, n_beta, len(params.regimes))


def pack_params(params: ParamVector) -> np.ndarray:
    """Map a valid ParamVector to its unconstrained packed vector."""
    mu = params.mu
    blocks = [params.alpha, mu[:1], np.log(np.diff(mu))]
    for regime in params.regimes:
        blocks.append(regime.beta)
        blocks.append(np.array([np.log(regime.sigma), np.arctanh(regime.rho)]))
    return np.concatenate(blocks)


def unpack_params(
    packed: np.ndarray, spec: ModelSpec, n_alpha: int, n_beta: int
) -> ParamVector:
    """Map any finite packed vector to a valid ParamVector.

    Raises:
        ConfigError: on wrong length or non-finite entries
    """
    return unpack_with_layout(packed, ParamLayout.from_spec(spec, n_alpha, n_beta))


def unpack_with_layout(packed: np.ndarray, layout: ParamLayout) -> ParamVector:
    v = np.asarray(packed, dtype=float).reshape(-1)
    if v.size != layout.size:
        raise ConfigError(f"packed vector has {v.size} entries, layout expects {layout.size}")
    if not np.all(np.isfinite(v)):
        raise ConfigError("packed parameter vector contains non-finite entries")
    regimes = []
    for r in range(layout.n_regimes):
        sigma = float(np.exp(v[layout.sigma(r)]))
        rho = float(np.tanh(v[layout.rho(r)]))
        # tanh saturates to +/-1 in double precision beyond ~19
        rho = float(np.clip(rho, -np.nextafter(1.0, 0.0), np.nextafter(1.0, 0.0)))
        regimes.append(RegimeParams(beta=v[layout.beta(r)], sigma=sigma, rho=rho))
    return ParamVector(
        alpha=v[layout.alpha],
        mu=cutoffs_from_packed(v[layout.mu]),
        regimes=tuple(regimes),
    )


def cutoffs_from_packed(theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.size == 0:
        return theta
    increments = np.concatenate([theta[:1], np.exp(theta[1:])])
    return np.cumsum(increments)


def reported_values(packed: np.ndarray, layout: ParamLayout) -> np.ndarray:
    """Packed vector expressed on the reported (natural) scale."""
    v = np.asarray(packed, dtype=float).copy()
    v[layout.mu] = cutoffs_from_packed(v[layout.mu])
    for r in range(layout.n_regimes):
        v[layout.sigma(r)] = np.exp(v[layout.sigma(r)])
        v[layout.rho(r)] = np.tanh(v[layout.rho(r)])
    return v


def reporting_jacobian(packed: np.ndarray, layout: ParamLayout) -> np.ndarray:
    """d(reported)/d(packed), used for delta-method covariances."""
    v = np.asarray(packed, dtype=float)
    jac = np.eye(layout.size)
    mu_block = v[layout.mu]
    start = layout.mu.start
    for k in range(layout.n_mu):
        jac[start + k, start] = 1.0
        for ell in range(1, k + 1):
            jac[start + k, start + ell] = np.exp(mu_block[ell])
    for r in range(layout.n_regimes):
        s, p = layout.sigma(r), layout.rho(r)
        jac[s, s] = np.exp(v[s])
        jac[p, p] = 1.0 - np.tanh(v[p]) ** 2
    return jac


def chain_mu_gradient(grad_mu: np.ndarray, theta_mu: np.ndarray) -> np.ndarray:
    """Gradient with respect to the packed cutoff block.

    ``grad_mu`` may be 1-D (total) or 2-D (per observation, cutoffs last).
    """
    tail = np.flip(np.cumsum(np.flip(grad_mu, axis=-1), axis=-1), axis=-1)
    scale = np.concatenate([[1.0], np.exp(theta_mu[1:])])
    return np.asarray(tail * scale)
