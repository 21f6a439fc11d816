"""Reach products and counterfactual values on a compiled layout.

Inputs may carry any number of leading batch dimensions and may be tape
Tensors; the functions only use :mod:`regretforge.autodiff.ops`.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import ops


def extended_slots(sigma, layout):
    """Flatten a (..., S, A) strategy array and append the constant-1 padding slot."""
    lead = ops.value_of(sigma).shape[:-2]
    flat = ops.reshape(sigma, lead + (layout.n_slots,))
    return ops.concat([flat, np.ones(lead + (1,))], axis=-1)


def player_factors(ext, layout, player):
    """Per-depth strategy factors gathered along every terminal's path."""
    return [ops.gather(ext, m) for m in layout.path_maps[player]]


def player_contributions(ext, layout):
    """Return (factors, contributions) where contributions[i] is d_i(z)."""
    factors, contrib = [], []
    for p in range(layout.n_players):
        f = player_factors(ext, layout, p)
        prod = f[0]
        for extra in f[1:]:
            prod = ops.mul(prod, extra)
        factors.append(f)
        contrib.append(prod)
    return factors, contrib


def others_product(contrib, player, chance_reach):
    """chance(z) * prod_{j != player} d_j(z)."""
    out = chance_reach
    for j, d in enumerate(contrib):
        if j != player:
            out = ops.mul(out, d)
    return out


def infostate_reach(ext, layout):
    """The owner's own reach probability of every infostate, shape (..., S)."""
    prod = None
    for m in layout.infostate_maps:
        g = ops.gather(ext, m)
        prod = g if prod is None else ops.mul(prod, g)
    return prod


def counterfactual_values(factors, contrib, utilities, layout):
    """Counterfactual value of every (infostate, action) slot, shape (..., S, A).

    ``utilities`` has shape (..., n, Z).  The value of slot (s, a) is the sum
    over terminals below it of chance and opponents' reach times the owner's
    utility times the owner's own probabilities strictly after (s, a).
    """
    lead = ops.value_of(utilities).shape[:-2]
    total = None
    for p in range(layout.n_players):
        u = ops.getitem(utilities, (Ellipsis, p, slice(None)))
        weight = ops.mul(others_product(contrib, p, layout.chance_reach), u)
        f = factors[p]
        suffix = weight
        for k in reversed(range(len(f))):
            part = ops.segment_sum(suffix, layout.path_maps[p][k])
            total = part if total is None else ops.add(total, part)
            if k > 0:
                suffix = ops.mul(suffix, f[k])
    flat = ops.getitem(total, (Ellipsis, slice(0, layout.n_slots)))
    return ops.reshape(flat, lead + (layout.n_infostates, layout.max_actions))
