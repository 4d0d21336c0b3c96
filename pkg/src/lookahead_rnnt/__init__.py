"""Toy RNN-transducer ASR stack with acoustic lookahead conditioning.

Subpackages by concern: ``autograd``/``checkpoint`` (tensors, tape, binary
serialization), ``model`` (encoders + joint), ``transducer_loss`` (alignment
marginalization), ``lookahead`` (window extraction + conditioning),
``decode``, ``metrics`` (WER through phonetic distances), ``taskgen``
(synthetic corpus + hallucination score), ``train``/``cli``/``benchmark``
(harness).
"""

__version__ = "0.1.0"

from .autograd import Tape, Tensor  # noqa: F401
from .config import Config          # noqa: F401
from .model import ModelConfig, TransducerModel  # noqa: F401
from .vocab import BLANK_ID, BLANK_TOKEN, Vocabulary  # noqa: F401
