"""Relative entropy coding: exact channel simulation with shared randomness."""

from .codes import BitCursor, BitString, elias_delta_decode, elias_delta_encode
from .container import Container, decode_records, encode_records
from .models import (AdditiveUnimodalMechanism, CategoricalMechanism, GaussianGaussianMechanism,
                     UniformAdditiveMechanism)
from .randomness import DeterministicStream, new_stream
from .records import decode_record, encode_record
from .selection import Budget, pfr_select, rejection_select

__version__ = "0.1.0"
