"""Deterministic seed derivation for independent sampling streams.

All randomness in the package flows from 64-bit master seeds. Child seeds
(feature pairs, per-sample ODE draws, per-epoch training resamples) are
derived with a splitmix64 chain so results never depend on library
internals or execution order.
"""

_MASK = 0xFFFFFFFFFFFFFFFF


def _mix(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def derive_seed(seed: int, *tags: int) -> int:
    """Derive an independent 64-bit child seed from `seed` and integer tags.

    Deterministic, order-sensitive in the tags. Used to split one master
    seed into the many independent streams an experiment needs.
    """
    h = seed & _MASK
    for t in tags:
        h = _mix(h ^ (t & _MASK))
    return h
