"""One entry point for all four codecs, keyed by name.

Record ``i`` of a batch always uses substream ``i`` of the shared seed, so a
damaged record cannot shift the randomness of any other record.
"""

from __future__ import annotations

from .codes import BitCursor, BitString
from .dither import dq_decode, dq_encode, gaussian_smsu, lq_decode, lq_encode, uniform_smsu
from .models import (AdditiveUnimodalMechanism, GaussianGaussianMechanism, Mechanism, Normal,
                     Uniform, UniformAdditiveMechanism)
from .selection import UNLIMITED, Budget, selection_decode, selection_encode

CODECS = ("rejection", "pfr", "dq", "lq")
SELECTION_CODECS = ("rejection", "pfr")


def check_codec(mech: Mechanism, codec: str) -> None:
    """Raise ValueError if ``codec`` cannot simulate ``mech`` exactly."""
    if codec not in CODECS:
        raise ValueError(f"unknown codec {codec!r}; choose from {', '.join(CODECS)}")
    if codec == "dq":
        source_of(mech)
        if not _has_unit_uniform_noise(mech):
            raise ValueError("dq simulates Y = X + Unif(-1/2, 1/2) only")
    elif codec == "lq":
        source_of(mech)
        smsu_of(mech)


def _has_unit_uniform_noise(mech: Mechanism) -> bool:
    if isinstance(mech, UniformAdditiveMechanism):
        return True
    noise = getattr(mech, "noise", None)
    return isinstance(noise, Uniform) and noise.low == -0.5 and noise.high == 0.5


def source_of(mech: Mechanism):
    """Source distribution object (cdf, sf, support_hint) for the quantisers."""
    if isinstance(mech, (UniformAdditiveMechanism, AdditiveUnimodalMechanism)):
        return mech.source
    if isinstance(mech, GaussianGaussianMechanism):
        return Normal(0.0, mech.sigma)
    raise ValueError(f"{type(mech).__name__} is not an additive mechanism")


def smsu_of(mech: Mechanism):
    if isinstance(mech, AdditiveUnimodalMechanism):
        if mech.smsu is None:
            raise ValueError("mechanism has no SMSU representation")
        return mech.smsu
    if isinstance(mech, GaussianGaussianMechanism):
        return gaussian_smsu(mech.rho)
    if isinstance(mech, UniformAdditiveMechanism):
        return uniform_smsu()
    raise ValueError(f"{type(mech).__name__} is not an additive mechanism")


def encode_record(mech: Mechanism, codec: str, x, seed: int, substream: int,
                  budget: Budget = UNLIMITED) -> BitString:
    if codec in SELECTION_CODECS:
        return selection_encode(mech, x, seed, substream, codec, budget)
    if codec == "dq":
        return dq_encode(source_of(mech), x, seed, substream)
    if codec == "lq":
        return lq_encode(source_of(mech), smsu_of(mech), x, seed, substream)
    raise ValueError(f"unknown codec {codec!r}")


def decode_record(mech: Mechanism, codec: str, bits: BitString, cursor: BitCursor,
                  seed: int, substream: int):
    if codec in SELECTION_CODECS:
        return selection_decode(mech, bits, cursor, seed, substream, codec)
    if codec == "dq":
        return dq_decode(source_of(mech), bits, cursor, seed, substream)
    if codec == "lq":
        return lq_decode(source_of(mech), smsu_of(mech), bits, cursor, seed, substream)
    raise ValueError(f"unknown codec {codec!r}")
