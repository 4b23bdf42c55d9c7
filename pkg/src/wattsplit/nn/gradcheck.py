"""Central finite-difference verification of the analytic gradients.

Runs a float64 copy of the network so the comparison is limited by the
difference scheme, not by training precision.

Central differences at step h have an absolute noise floor of roughly
eps * |loss| / h (~1e-12 here): a coordinate whose true gradient sits
below that cannot be verified by this oracle in either direction. Such
coordinates are therefore held to a one-sided bound instead (analytic and
numeric must both be small, i.e. agree within the floor) and do not count
toward the requested sample; the relative comparison runs on coordinates
the oracle can actually resolve. The floor defaults to 1e-5, which keeps
noise-induced relative error below 2e-7 for resolvable coordinates.
"""

from __future__ import annotations

import numpy as np

from wattsplit.nn.layers import Network
from wattsplit.nn.losses import LOSS_FUNCTIONS


class GradientMismatchError(AssertionError):
    """A sub-resolution coordinate disagreed beyond the noise floor."""


def gradient_check(network: Network, x: np.ndarray, target: np.ndarray,
                   loss_kind: str = "mse", n_coords: int = 200,
                   h: float = 1e-5, seed: int = 0,
                   resolution_floor: float = 1e-5) -> float:
    """Max relative error between backprop and central differences.

    Samples parameter coordinates (uniformly, without replacement) until
    n_coords resolvable ones have been compared or the parameter space is
    exhausted. The relative error per coordinate is
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).
    """
    loss_fn = LOSS_FUNCTIONS[loss_kind]
    net = network.astype(np.float64)
    x64 = np.asarray(x, dtype=np.float64)
    t64 = np.asarray(target, dtype=np.float64)

    out = net.forward(x64)
    _, dy = loss_fn(out, t64)
    net.backward(dy)
    analytic = dict(net.gradients())

    params = net.parameters()
    sizes = [p.size for _, p in params]
    bounds = np.cumsum(sizes)
    rng = np.random.default_rng(seed)
    order = rng.permutation(int(bounds[-1]))

    max_err = 0.0
    resolved = 0
    for flat in order:
        if resolved >= n_coords:
            break
        pi = int(np.searchsorted(bounds, flat, side="right"))
        offset = int(flat - (bounds[pi - 1] if pi else 0))
        name, p = params[pi]
        orig = p.flat[offset]
        p.flat[offset] = orig + h
        up = loss_fn(net.forward(x64), t64)[0]
        p.flat[offset] = orig - h
        down = loss_fn(net.forward(x64), t64)[0]
        p.flat[offset] = orig
        numeric = (up - down) / (2.0 * h)
        a = float(analytic[name].flat[offset])
        if max(abs(a), abs(numeric)) < resolution_floor:
            if abs(a - numeric) > resolution_floor:
                raise GradientMismatchError(
                    f"{name}[{offset}]: analytic {a:g} vs numeric {numeric:g} "
                    f"disagree below the resolution floor")
            continue
        resolved += 1
        max_err = max(max_err, abs(a - numeric) / max(abs(a), abs(numeric), 1e-12))
    return max_err
