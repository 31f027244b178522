"""Caption tokenization, vocabulary, and the color-word lexicon."""

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .colorspace import rgb_to_lab

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_ID = 0
UNK_ID = 1

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def split_tokens(text: str) -> list[str]:
    """Lowercase and split on whitespace/punctuation boundaries."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Vocab:
    """Token table with reserved PAD=0 and UNK=1 ids."""

    token_to_id: dict[str, int]
    min_freq: int = 1

    def __len__(self) -> int:
        return len(self.token_to_id)

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def content_hash(self) -> str:
        blob = json.dumps(sorted(self.token_to_id.items())).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {"token_to_id": self.token_to_id, "min_freq": self.min_freq}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocab":
        return cls(
            token_to_id={str(k): int(v) for k, v in d["token_to_id"].items()},
            min_freq=int(d.get("min_freq", 1)),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "Vocab":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def build_vocab(corpus, min_freq: int = 1) -> Vocab:
    """Build a vocabulary from caption strings.

    Tokens occurring at least ``min_freq`` times get contiguous ids after
    the reserved ones, ordered by descending count and then
    lexicographically.
    """
    corpus = list(corpus)
    if not corpus:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    counts = Counter()
    for caption in corpus:
        counts.update(split_tokens(caption))
    kept = sorted(
        (tok for tok, n in counts.items() if n >= min_freq),
        key=lambda tok: (-counts[tok], tok),
    )
    table = {PAD_TOKEN: PAD_ID, UNK_TOKEN: UNK_ID}
    for i, tok in enumerate(kept):
        table[tok] = i + 2
    return Vocab(token_to_id=table, min_freq=min_freq)


@dataclass
class TokenSequence:
    """Encoded caption; empty text encodes to the single token [UNK]."""

    ids: np.ndarray
    original_text: str

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)

    def __len__(self) -> int:
        return int(self.ids.size)


def tokenize(text: str, vocab: Vocab) -> TokenSequence:
    """Encode a caption into token ids, mapping OOV tokens to UNK."""
    tokens = split_tokens(text)
    if not tokens:
        return TokenSequence(ids=np.array([UNK_ID]), original_text=text)
    return TokenSequence(
        ids=np.array([vocab.id_of(tok) for tok in tokens]), original_text=text
    )


# Fixed sRGB anchor per color word. Chromatic anchors were chosen so the
# ab pair stays inside sRGB gamut when rendered at L*=60 (the synthetic
# generator's shape lightness) with a safety margin; black and white pin
# the neutral axis.
COLOR_ANCHORS_RGB = {
    "red": (240, 99, 82),
    "blue": (117, 138, 237),
    "green": (64, 164, 68),
    "yellow": (155, 147, 55),
    "orange": (203, 127, 54),
    "purple": (235, 71, 234),
    "pink": (189, 129, 131),
    "brown": (186, 133, 97),
    "black": (0, 0, 0),
    "white": (255, 255, 255),
}

_NEUTRAL_WORDS = ("black", "white")


@dataclass
class ColorLexicon:
    """The ten color words with a canonical ab pair per word."""

    canonical_ab: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.canonical_ab) != 10:
            raise ValueError(
                f"lexicon must hold exactly 10 color words, got {len(self.canonical_ab)}"
            )

    @property
    def words(self) -> list[str]:
        return list(self.canonical_ab)

    def __contains__(self, word: str) -> bool:
        return word in self.canonical_ab

    def ab_of(self, word: str) -> np.ndarray:
        return np.asarray(self.canonical_ab[word], dtype=np.float64)

    def to_dict(self) -> dict:
        return {w: [float(a), float(b)] for w, (a, b) in self.canonical_ab.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "ColorLexicon":
        return cls(canonical_ab={w: (float(ab[0]), float(ab[1])) for w, ab in d.items()})

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "ColorLexicon":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def default_lexicon() -> ColorLexicon:
    """Lexicon with canonical ab taken from the fixed sRGB anchors.

    Black and white sit on the neutral axis (ab = 0, 0).
    """
    canonical = {}
    for word, rgb in COLOR_ANCHORS_RGB.items():
        if word in _NEUTRAL_WORDS:
            canonical[word] = (0.0, 0.0)
            continue
        lab = rgb_to_lab(np.array(rgb, dtype=np.uint8).reshape(1, 1, 3))
        canonical[word] = (float(lab[0, 0, 1]), float(lab[0, 0, 2]))
    return ColorLexicon(canonical_ab=canonical)


@dataclass
class SwapResult:
    text: str
    replaced: bool


def swap_color_word(text: str, target: str, lexicon: ColorLexicon) -> SwapResult:
    """Replace every lexicon color word in ``text`` with ``target``.

    Matching is whole-word and case-insensitive; replacements are written
    in lowercase. When no lexicon word occurs, the text comes back
    unchanged with ``replaced=False``.
    """
    if target not in lexicon:
        raise ValueError(f"target {target!r} is not a lexicon color word")
    pattern = re.compile(
        r"\b(" + "|".join(re.escape(w) for w in lexicon.words) + r")\b",
        flags=re.IGNORECASE,
    )
    swapped, count = pattern.subn(target, text)
    return SwapResult(text=swapped, replaced=count > 0)


def contains_color_word(text: str, lexicon: ColorLexicon) -> bool:
    """True if the caption contains a whole-word lexicon match."""
    tokens = set(split_tokens(text))
    return any(word in tokens for word in lexicon.words)
