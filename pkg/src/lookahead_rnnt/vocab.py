"""Token vocabulary with blank pinned at id 0.

Emission units are sub-phone tokens plus a word-delimiter token: transcripts
are word sequences, but rare words would be unlearnable as whole-word classes
from a handful of examples, so the transducer emits shared subword units and
word hypotheses are reassembled by splitting on the delimiter.

Each sound (phone or inter-word silence) emits its token twice, the way
HMM-style systems model a phone as a pair of sub-phone states. Besides being
a finer emission granularity, the pairing matters for the acoustic-only
per-frame argmax: a transducer path crosses each frame via exactly one blank
step, so a token that can emit only once per frame is capped at the blank's
expected count and the frame argmax settles on blank. With two copies of the
same token forced onto one acoustic frame the token's expected count is twice
the blank's, and the per-frame argmax recovers the spoken token rather than
degenerating to an all-blank path.
"""

from __future__ import annotations

BLANK_TOKEN = "<b>"
BLANK_ID = 0
DELIM_TOKEN = "|"
REPEATS = 2   # emissions per sound


def words_to_tokens(words) -> list[str]:
    """Flatten words into doubled per-phone tokens, delimiters between words."""
    out: list[str] = []
    for i, word in enumerate(words):
        if i:
            out.extend([DELIM_TOKEN] * REPEATS)
        for phone in word:
            out.extend([phone] * REPEATS)
    return out


def _collapse_pairs(chunk: list[str]) -> str:
    """Undo doubling: adjacent equal tokens collapse pairwise, left to right.

    A lone token (its twin lost to a decoding error) still contributes one
    phone, so 'ssss' -> 'ss' (a true geminate survives) while 'sss' -> 'ss'
    and 's' -> 's' degrade gracefully.
    """
    phones: list[str] = []
    i = 0
    while i < len(chunk):
        phones.append(chunk[i])
        i += 2 if i + 1 < len(chunk) and chunk[i + 1] == chunk[i] else 1
    return "".join(phones)


def tokens_to_words(tokens) -> list[str]:
    """Inverse of :func:`words_to_tokens` for decoder output.

    Splits on delimiter runs and drops empty chunks, so stray leading,
    trailing, or unpaired delimiters from an imperfect decode stay harmless.
    """
    words: list[str] = []
    current: list[str] = []
    for tok in tokens:
        if tok == DELIM_TOKEN:
            if current:
                words.append(_collapse_pairs(current))
                current = []
        else:
            current.append(tok)
    if current:
        words.append(_collapse_pairs(current))
    return words


class Vocabulary:
    """Dense token<->id map; id 0 is always the blank symbol ``<b>``."""

    def __init__(self, tokens):
        tokens = list(tokens)
        if not tokens or tokens[0] != BLANK_TOKEN:
            raise ValueError(f"vocabulary must start with the blank token {BLANK_TOKEN!r}")
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary contains duplicate tokens")
        self.tokens = tuple(tokens)
        self._ids = {tok: i for i, tok in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def id_of(self, token: str) -> int:
        try:
            return self._ids[token]
        except KeyError:
            raise KeyError(f"token not in vocabulary: {token!r}") from None

    def token_of(self, idx: int) -> str:
        return self.tokens[idx]

    def encode(self, tokens) -> list[int]:
        return [self.id_of(t) for t in tokens]

    def decode(self, ids) -> list[str]:
        return [self.tokens[i] for i in ids]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for tok in self.tokens:
                f.write(tok + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as f:
            tokens = [line.rstrip("\n") for line in f if line.rstrip("\n")]
        return cls(tokens)
