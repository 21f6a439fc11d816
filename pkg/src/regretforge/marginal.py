"""Extensive-form marginalizability, total correlation and the Nash-distance certificate."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import ops
from .autodiff.tensor import is_tracked, value_of
from .efg.metrics import cce_gap, nash_gap
from .efg.tree import ContractViolation
from .games import mixed_from_behavior, to_normal_form

# mu below this alongside d > 0 means the accumulation is broken
DEGENERACY_FLOOR = 1e-300


class NumericDegeneracyError(ArithmeticError):
    pass


class CertificationFailure(AssertionError):
    def __init__(self, certificate):
        self.certificate = certificate
        super().__init__(f"bound violated: {certificate}")


def product_of_marginals(chance_reach, contrib_avg):
    """chance(z) * prod_i avg d_i(z); ``contrib_avg`` is (..., n, Z) or a list of (..., Z)."""
    if isinstance(contrib_avg, (list, tuple)):
        parts = list(contrib_avg)
    else:
        n = value_of(contrib_avg).shape[-2]
        parts = [ops.getitem(contrib_avg, (Ellipsis, i, slice(None))) for i in range(n)]
    out = chance_reach
    for part in parts:
        out = ops.mul(out, part)
    return out


def marginal_across_terminals(trace):
    if trace.steps < 1:
        raise ContractViolation("trace has no steps")
    return product_of_marginals(trace.chance_reach, trace.avg_contrib)


def kl_terminal(d, mu):
    """KL(d || mu) over the last axis with 0 log 0 = 0.

    On plain arrays a positive d against mu below the degeneracy floor
    raises; on tape values the guarded log of :mod:`ops` is used.
    """
    if is_tracked(d, mu):
        return ops.kl_divergence(d, mu)
    d = np.asarray(d, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    pos = d > 0
    if (pos & (mu < DEGENERACY_FLOOR)).any():
        raise NumericDegeneracyError("terminal with positive reach has vanishing marginal product")
    safe_mu = np.where(pos, mu, 1.0)
    safe_d = np.where(pos, d, 1.0)
    return np.sum(np.where(pos, d * (np.log(safe_d) - np.log(safe_mu)), 0.0), axis=-1)


def efm_from_sums(reach_sum, contrib_sum, chance_reach, steps):
    """EFM of a prefix from its running sums (works on tape values)."""
    d = ops.div(reach_sum, float(steps))
    mu = product_of_marginals(chance_reach, ops.div(contrib_sum, float(steps)))
    return kl_terminal(d, mu)


def efm(trace):
    """KL(average terminal reach || product of average contributions); >= 0."""
    if trace.steps < 1:
        raise ContractViolation("trace has no steps")
    value = efm_from_sums(trace.reach_sum, trace.contrib_sum, trace.chance_reach, trace.steps)
    return np.maximum(value, 0.0) if np.ndim(value) else max(float(value), 0.0)


def meta_loss(prefix_efms):
    """Mean of the prefix EFMs of one run (accepts a trace or a sequence)."""
    values = getattr(prefix_efms, "prefix_efm", prefix_efms)
    if len(values) == 0:
        raise ContractViolation("meta_loss needs at least one prefix")
    total = values[0]
    for v in values[1:]:
        total = ops.add(total, v)
    return ops.div(total, float(len(values)))


def entropy(p):
    p = np.asarray(p, dtype=np.float64).ravel()
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def total_correlation(view, joint):
    """sum_i H(marginal_i) - H(joint) for a joint over pure profiles."""
    joint = np.asarray(joint, dtype=np.float64)
    shape = view.shape if hasattr(view, "shape") else tuple(view)
    if joint.shape != tuple(shape):
        raise ContractViolation(f"joint has shape {joint.shape}, view expects {tuple(shape)}")
    if abs(joint.sum() - 1.0) > 1e-9:
        raise ContractViolation(f"joint sums to {joint.sum()!r}")
    axes = range(joint.ndim)
    marginals = [joint.sum(axis=tuple(a for a in axes if a != i)) for i in axes]
    return max(sum(entropy(m) for m in marginals) - entropy(joint), 0.0)


def kuhn_joint(view, strategies):
    """Empirical joint over pure profiles of a sequence of behavior profiles."""
    joint = np.zeros(view.shape)
    letters = "abcdefghijklmnopqrstuvwxy"[:len(view.shape)]
    expr = ",".join(letters) + "->" + letters
    for sigma in strategies:
        mixed = [mixed_from_behavior(view, sigma, i) for i in range(len(view.shape))]
        joint += np.einsum(expr, *mixed)
    return joint / len(strategies)


def nfm_efm_equivalence_check(game, strategies, cap=10_000):
    """(efm, total correlation) of the same step sequence, computed independently.

    The tree side uses the reach decomposition.  The normal-form side expands
    every step's behavior profile to its Kuhn-equivalent mixed strategies,
    averages the product distributions into an empirical joint, and takes
    its total correlation.
    """
    from .efg.trace import RunTrace

    view = to_normal_form(game, cap=cap)
    trace = RunTrace.from_profiles(game, list(strategies))
    return float(efm(trace)), total_correlation(view, kuhn_joint(view, strategies))


@dataclass(frozen=True)
class BoundCertificate:
    nash_gap: float
    cce_gap: float
    efm: float
    max_utility: float

    @property
    def rhs(self):
        return self.cce_gap + 2.0 * self.max_utility * math.sqrt(2.0 * max(self.efm, 0.0))

    @property
    def slack(self):
        return self.rhs - self.nash_gap

    @property
    def holds(self):
        return self.slack >= -1e-6


def certify_bound(game, trace, strict=True):
    """Check NashGap(average strategy) <= CCE gap + 2M sqrt(2 EFM).

    The average strategy is the reach-weighted uniform time average, the
    behavior strategy that realizes the marginal across terminals.
    """
    cert = BoundCertificate(
        nash_gap=nash_gap(game, trace.uniform_avg_strategy),
        cce_gap=cce_gap(game, trace),
        efm=float(efm(trace)),
        max_utility=game.max_abs_utility,
    )
    if strict and not cert.holds:
        raise CertificationFailure(cert)
    return cert
