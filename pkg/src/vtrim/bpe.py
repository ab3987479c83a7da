"""Byte-level BPE tokenizer: vocabulary loading, encoding, decoding.

Text is encoded by remapping its UTF-8 bytes onto printable stand-in
codepoints and then greedily applying the lowest-ranked merge until none
applies. The byte remapping is a bijection, so decoding is lossless for
any valid UTF-8 input. There is no pre-tokenizer: merges run over the
whole byte stream, which keeps the reference behavior simple and means
corpus statistics do not depend on word-splitting heuristics.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import VtError


def _build_byte_table() -> tuple[str, ...]:
    # Bytes in the three printable ranges map to themselves; the rest get
    # consecutive codepoints from 256 upward, in ascending byte order.
    direct = (
        list(range(0x21, 0x7F)) + list(range(0xA1, 0xAD)) + list(range(0xAE, 0x100))
    )
    table: dict[int, str] = {b: chr(b) for b in direct}
    fill = 0x100
    for b in range(0x100):
        if b not in table:
            table[b] = chr(fill)
            fill += 1
    return tuple(table[b] for b in range(0x100))


BYTE_TO_CHAR: tuple[str, ...] = _build_byte_table()
CHAR_TO_BYTE: dict[str, int] = {c: b for b, c in enumerate(BYTE_TO_CHAR)}


@dataclass(frozen=True)
class Vocabulary:
    """Dense id -> surface table; ``surfaces[i]`` is the token with id ``i``."""

    surfaces: tuple[str, ...]
    ids: dict[str, int]

    @property
    def size(self) -> int:
        return len(self.surfaces)

    def surface(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.surfaces):
            raise VtError(f"token id {token_id} out of range [0, {len(self.surfaces)})")
        return self.surfaces[token_id]

    @classmethod
    def from_mapping(cls, mapping: dict[str, int]) -> "Vocabulary":
        """Validate a surface -> id map: ids must be exactly 0..n-1, once each."""
        if not isinstance(mapping, dict):
            raise VtError("vocabulary file must contain a JSON object")
        n = len(mapping)
        surfaces: list[str | None] = [None] * n
        for surface, token_id in mapping.items():
            if not isinstance(token_id, int) or isinstance(token_id, bool):
                raise VtError(f"non-integer id for token {surface!r}")
            if not 0 <= token_id < n:
                raise VtError(f"non-dense ids: id {token_id} outside [0, {n})")
            if surfaces[token_id] is not None:
                raise VtError(f"duplicate id {token_id} ({surfaces[token_id]!r} and {surface!r})")
            surfaces[token_id] = surface
        return cls(surfaces=tuple(surfaces), ids=dict(mapping))  # type: ignore[arg-type]


@dataclass(frozen=True)
class Merges:
    """Ranked merge pairs; rank equals list position."""

    pairs: tuple[tuple[str, str], ...]
    ranks: dict[tuple[str, str], int]

    def __len__(self) -> int:
        return len(self.pairs)

    @classmethod
    def from_pairs(cls, pairs: list[tuple[str, str]], vocab: Vocabulary) -> "Merges":
        ranks: dict[tuple[str, str], int] = {}
        for rank, (left, right) in enumerate(pairs):
            pair = (left, right)
            if pair in ranks:
                raise VtError(f"duplicate merge pair {left!r} {right!r}")
            if left + right not in vocab.ids:
                raise VtError(f"merge result {left + right!r} not in vocabulary")
            ranks[pair] = rank
        return cls(pairs=tuple(pairs), ranks=ranks)


def load_vocab(vocab_path: str, merges_path: str) -> tuple[Vocabulary, Merges]:
    """Load and validate a vocabulary JSON file and a merges text file.

    The vocabulary file is a JSON object mapping token surface strings to
    integer ids. The merges file holds one "LEFT RIGHT" pair per line in
    rank order; a first line starting with "#" is ignored.
    """
    try:
        with open(vocab_path, encoding="utf-8") as f:
            mapping = json.load(f)
    except FileNotFoundError:
        raise VtError(f"vocabulary file not found: {vocab_path}") from None
    except json.JSONDecodeError as e:
        raise VtError(f"vocabulary file {vocab_path} is not valid JSON: {e}") from e
    vocab = Vocabulary.from_mapping(mapping)

    pairs: list[tuple[str, str]] = []
    try:
        with open(merges_path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if lineno == 1 and line.startswith("#"):
                    continue
                if not line:
                    continue
                fields = line.split(" ")
                if len(fields) != 2:
                    raise VtError(f"{merges_path}:{lineno}: expected 'LEFT RIGHT', got {line!r}")
                pairs.append((fields[0], fields[1]))
    except FileNotFoundError:
        raise VtError(f"merges file not found: {merges_path}") from None
    return vocab, Merges.from_pairs(pairs, vocab)


_NO_RANK = float("inf")


def _apply_merges(symbols: list[str], ranks: dict[tuple[str, str], int]) -> list[str]:
    # Repeatedly merge the lowest-ranked adjacent pair, all occurrences
    # left to right, until no pair has a rank.
    while len(symbols) > 1:
        best_rank, best_pair = min(
            (ranks.get(pair, _NO_RANK), pair) for pair in zip(symbols, symbols[1:])
        )
        if best_rank == _NO_RANK:
            break
        left, right = best_pair
        merged = left + right
        out: list[str] = []
        i = 0
        while i < len(symbols):
            if i + 1 < len(symbols) and symbols[i] == left and symbols[i + 1] == right:
                out.append(merged)
                i += 2
            else:
                out.append(symbols[i])
                i += 1
        symbols = out
    return symbols


def encode(text: str, vocab: Vocabulary, merges: Merges) -> list[int]:
    """Encode UTF-8 text to token ids.

    Raises VtError if a post-merge symbol is missing from the vocabulary,
    which signals a vocabulary/merges mismatch.
    """
    try:
        data = text.encode("utf-8")
    except UnicodeEncodeError as e:
        raise VtError(f"input is not encodable as UTF-8: {e}") from e
    if not data:
        return []
    symbols = _apply_merges([BYTE_TO_CHAR[b] for b in data], merges.ranks)
    ids = []
    for symbol in symbols:
        token_id = vocab.ids.get(symbol)
        if token_id is None:
            raise VtError(f"symbol {symbol!r} not in vocabulary after merging")
        ids.append(token_id)
    return ids


def decode_bytes(ids: list[int], vocab: Vocabulary) -> bytes:
    """Map token ids to their underlying byte sequence (always defined)."""
    joined = "".join(vocab.surface(i) for i in ids)
    try:
        return bytes(CHAR_TO_BYTE[ch] for ch in joined)
    except KeyError as e:
        raise VtError(f"surface contains non byte-level symbol {e.args[0]!r}") from None


def decode(ids: list[int], vocab: Vocabulary) -> str:
    """Decode token ids back to the original UTF-8 string."""
    raw = decode_bytes(ids, vocab)
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise VtError(f"decoded bytes are not valid UTF-8 (partial multi-byte sequence): {e}") from e


def token_codepoints(surface: str) -> list[int] | None:
    """Unicode codepoints of one token's underlying bytes.

    Returns None when the token's bytes are not self-contained valid
    UTF-8 (e.g. a lone continuation byte), which is a value rather than
    an error: script filtering treats such tokens as unclassifiable.
    """
    try:
        raw = bytes(CHAR_TO_BYTE[ch] for ch in surface)
    except KeyError:
        return None
    try:
        return [ord(c) for c in raw.decode("utf-8")]
    except UnicodeDecodeError:
        return None
