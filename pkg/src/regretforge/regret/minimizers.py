"""Per-infostate online regret minimizers behind one interface.

State arrays have shape (..., A) with a matching 0/1 action mask, so one
:class:`MinimizerState` can hold a single infostate or every infostate of a
batch of games.  The regret-matching family and the neural predictor are
written with :mod:`regretforge.autodiff.ops` so they run unchanged on tape
Tensors during meta-training.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import value_of
from ..efg.tree import ContractViolation, GameError

# Lower bound on the l1 mass used by the smoothed (stable) predictive variants.
SMOOTH_FLOOR = 0.1


@dataclass(frozen=True)
class AlgorithmSpec:
    tag: str
    learner: str = "rm"          # rm | hedge | smooth
    plus: bool = False           # clamp cumulative regret at zero
    prediction: str = "none"     # none | last | neural
    discount: str = "none"       # none | dcfr | linear
    averaging: str = "uniform"   # uniform | linear | dcfr
    alternating: bool = False
    dcfr_exponents: tuple = (1.5, 0.0, 2.0)


ALGORITHMS = {
    "cfr": AlgorithmSpec("cfr"),
    "cfr+": AlgorithmSpec("cfr+", plus=True, averaging="linear", alternating=True),
    "pcfr": AlgorithmSpec("pcfr", prediction="last"),
    "pcfr+": AlgorithmSpec("pcfr+", plus=True, prediction="last", averaging="linear", alternating=True),
    "spcfr": AlgorithmSpec("spcfr", learner="smooth", prediction="last"),
    "spcfr+": AlgorithmSpec("spcfr+", learner="smooth", plus=True, prediction="last",
                            averaging="linear", alternating=True),
    "dcfr": AlgorithmSpec("dcfr", discount="dcfr", averaging="dcfr", alternating=True),
    "lcfr": AlgorithmSpec("lcfr", discount="linear", averaging="linear", alternating=True),
    "hedge": AlgorithmSpec("hedge", learner="hedge"),
    "hedge+": AlgorithmSpec("hedge+", learner="hedge", plus=True, averaging="linear", alternating=True),
    "npcfr": AlgorithmSpec("npcfr", prediction="neural"),
    "npcfr+": AlgorithmSpec("npcfr+", plus=True, prediction="neural", averaging="linear", alternating=True),
}


def algorithm(tag):
    try:
        return ALGORITHMS[tag]
    except KeyError:
        raise GameError(f"unknown algorithm {tag!r}; known: {', '.join(ALGORITHMS)}") from None


@dataclass
class MinimizerState:
    """Cumulative regret ``R``, last instantaneous regret ``r``, prediction ``p``.

    ``t`` counts observations per row (shape ``R.shape[:-1]``).  ``hidden``
    is the predictor's recurrent state for neural variants.  ``rows`` maps
    each row to the canonical infostate index used by the predictor's
    embedding table.
    """

    spec: AlgorithmSpec
    mask: np.ndarray
    R: object
    r: object
    p: object
    t: np.ndarray
    hidden: object = None
    rows: np.ndarray | None = None
    last_strategy: object = field(default=None, repr=False)

    @classmethod
    def new(cls, tag, mask, batch=(), rows=None):
        """Fresh state.  ``mask`` is an action count or a (..., A) 0/1 array."""
        spec = tag if isinstance(tag, AlgorithmSpec) else algorithm(tag)
        if np.isscalar(mask):
            mask = np.ones(int(mask))
        mask = np.asarray(mask, dtype=np.float64)
        shape = tuple(batch) + mask.shape
        zeros = np.zeros(shape)
        if rows is None:
            rows = np.arange(int(np.prod(mask.shape[:-1], dtype=np.int64))).reshape(mask.shape[:-1])
        return cls(spec, mask, zeros, zeros.copy(), zeros.copy(), np.zeros(shape[:-1], dtype=np.int64),
                   rows=np.asarray(rows))

    @property
    def action_count(self):
        return self.mask.sum(axis=-1)


def smooth_projection(x, floor=SMOOTH_FLOOR, mask=None):
    """Euclidean projection onto {y >= 0, sum(y) >= floor} along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    mask = np.ones_like(x) if mask is None else np.broadcast_to(mask, x.shape)
    y = np.maximum(x, 0.0) * mask
    low = y.sum(axis=-1) < floor
    if low.any():
        y[low] = _project_scaled_simplex(x[low], mask[low], floor)
    return y


def _project_scaled_simplex(x, mask, total):
    # sort-based projection onto {y >= 0, sum(y) = total} restricted to masked entries
    big = np.where(mask > 0, x, -np.inf)
    u = -np.sort(-big, axis=-1)
    k = np.arange(1, x.shape[-1] + 1)
    finite = np.isfinite(u)
    css = np.cumsum(np.where(finite, u, 0.0), axis=-1)
    cond = finite & (u - (css - total) / k > 0)
    rho = cond.sum(axis=-1)
    theta = (css[np.arange(len(x)), rho - 1] - total) / rho
    return np.maximum(np.where(mask > 0, x, -np.inf) - theta[:, None], 0.0)


def next_strategy(state):
    """The minimizer's next point on the simplex (zero mass falls back to uniform)."""
    spec, mask = state.spec, state.mask
    if spec.learner == "hedge":
        n = np.maximum(state.action_count, 1.0)
        t = np.maximum(state.t, 1)
        eta = np.sqrt(np.log(n) / t)[..., None]
        sigma = ops.softmax(ops.mul(state.R, eta), mask)
    elif spec.learner == "smooth":
        base = smooth_projection(value_of(state.R), mask=mask) if spec.plus else value_of(state.R)
        xi = smooth_projection(base + value_of(state.p), mask=mask)
        sigma = ops.normalize_simplex(xi, mask)
    else:
        xi = ops.mul(ops.positive_part(ops.add(state.R, state.p)), mask)
        sigma = ops.normalize_simplex(xi, mask)
    state.last_strategy = sigma
    return sigma


def instantaneous_regret(sigma, x, mask):
    """r = x - <sigma, x> on legal actions, 0 elsewhere."""
    value = ops.sum(ops.mul(sigma, x), axis=-1, keepdims=True)
    return ops.mul(ops.sub(x, value), mask)


def _select(active, new, old):
    if active is None:
        return new
    return ops.where(active[..., None], new, old)


def observe_reward(state, x, sigma=None, active=None, predictor=None):
    """Feed the reward vector ``x`` and return the updated state.

    ``sigma`` defaults to the last strategy produced by :func:`next_strategy`.
    ``active`` is an optional boolean array over rows; inactive rows keep
    their state (alternating updates).  Neural variants need ``predictor``.
    """
    spec, mask = state.spec, state.mask
    sigma = state.last_strategy if sigma is None else sigma
    if sigma is None:
        raise ContractViolation("observe_reward called before next_strategy")
    if value_of(x).shape[-1] != mask.shape[-1]:
        raise ContractViolation(f"reward has {value_of(x).shape[-1]} entries, expected {mask.shape[-1]}")
    if active is not None:
        active = np.broadcast_to(np.asarray(active, dtype=bool), state.t.shape)

    r = instantaneous_regret(sigma, x, mask)
    t_new = state.t + (1 if active is None else active.astype(np.int64))
    t_now = t_new.astype(np.float64)[..., None]

    if spec.discount == "linear":
        R = ops.add(state.R, ops.mul(r, t_now))
    else:
        R = ops.add(state.R, r)
    if spec.discount == "dcfr":
        a, b, _ = spec.dcfr_exponents
        Rv = value_of(R)
        scale = np.where(Rv > 0, t_now ** a / (t_now ** a + 1), t_now ** b / (t_now ** b + 1))
        R = ops.mul(R, scale)
    if spec.plus:
        if spec.learner == "smooth":
            R = smooth_projection(value_of(R), mask=mask)
        else:
            R = ops.positive_part(R)

    hidden = state.hidden
    if spec.prediction == "last":
        p = r
    elif spec.prediction == "neural":
        if predictor is None:
            raise GameError(f"{spec.tag} needs a trained predictor")
        if hidden is None:
            hidden = predictor.initial_state(value_of(R).shape[:-1])
        pi, new_hidden = predictor.step(r, R, state.rows, hidden)
        p = ops.mul(predictor.combine(r, pi), mask)
        if active is not None:
            new_hidden = predictor.select_state(active, new_hidden, hidden)
        hidden = new_hidden
    else:
        p = state.p

    return replace(
        state,
        R=_select(active, R, state.R),
        r=_select(active, r, state.r),
        p=_select(active, p, state.p),
        t=t_new,
        hidden=hidden,
        last_strategy=None,
    )


def averaging_weight(spec, step):
    if spec.averaging == "linear":
        return float(step)
    if spec.averaging == "dcfr":
        return float(step) ** spec.dcfr_exponents[2]
    return 1.0
