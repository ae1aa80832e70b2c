"""Deterministic derivation of named random streams from one experiment seed.

Every source of randomness in the package flows from a single 64-bit seed
through ``numpy.random.SeedSequence`` spawn keys.  Each consumer owns a
named substream, so results do not depend on call order or scheduling:
the generation streams never interact with the initialization stream, and
every bootstrap replicate owns a stream indexed by its replicate number.

Stream layout:

* ``(DOMAIN_GENERATION, 0)``              feature and customer-value draws
* ``(DOMAIN_GENERATION, 1, layer_index)`` topology mask of one (asset, day) layer
* ``(DOMAIN_GENERATION, 2)``              latent noise draws (costs, bargaining)
* ``(DOMAIN_INIT,)``                      parameter initialization for training
* ``(DOMAIN_BOOTSTRAP, replicate)``       resampling and re-initialization of
                                          one bootstrap replicate
"""

import numpy as np

DOMAIN_GENERATION = 0
DOMAIN_INIT = 1
DOMAIN_BOOTSTRAP = 2


def substream(seed, *path):
    """Return a ``numpy.random.Generator`` for the named substream of ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path)))


def feature_stream(seed):
    """Stream for feature tables and customer values."""
    return substream(seed, DOMAIN_GENERATION, 0)


def layer_stream(seed, layer_index):
    """Stream for the topology draw of one (asset, day) layer.

    Layers are numbered ``asset * n_days + day``; distinct layers may be
    generated in parallel because their streams are independent.
    """
    return substream(seed, DOMAIN_GENERATION, 1, layer_index)


def latent_stream(seed):
    """Stream for latent generation noise (cost and bargaining shocks)."""
    return substream(seed, DOMAIN_GENERATION, 2)


def init_stream(seed):
    """Stream for drawing initial model parameters."""
    return substream(seed, DOMAIN_INIT)


def replicate_stream(seed, replicate):
    """Stream owned by one bootstrap replicate."""
    return substream(seed, DOMAIN_BOOTSTRAP, replicate)
