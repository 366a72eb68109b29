"""Token <-> id mapping with fixed reserved ids."""

from __future__ import annotations

from typing import Iterable, Sequence

PAD, EOS, UNK = "<pad>", "<eos>", "<unk>"
PAD_ID, EOS_ID, UNK_ID = 0, 1, 2
_RESERVED = (PAD, EOS, UNK)


class Vocabulary:
    """Ordered unique token strings; ids 0/1/2 are always pad/eos/unk."""

    def __init__(self, tokens: Sequence[str]):
        tokens = tuple(tokens)
        if tokens[:3] != _RESERVED:
            raise ValueError(f"first three tokens must be {_RESERVED}")
        index = {}
        for i, tok in enumerate(tokens):
            if tok in index:
                raise ValueError(f"duplicate token {tok!r}")
            index[tok] = i
        self.tokens = tokens
        self._index = index

    @classmethod
    def from_symbols(cls, symbols: Iterable[str]) -> "Vocabulary":
        """Build from regular symbols; reserved tokens are prepended."""
        out = list(_RESERVED)
        seen = set(_RESERVED)
        for sym in symbols:
            if sym not in seen:
                seen.add(sym)
                out.append(sym)
        return cls(out)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def id(self, token: str) -> int:
        return self._index[token]

    def id_or_unk(self, token: str) -> int:
        return self._index.get(token, UNK_ID)

    def token(self, token_id: int) -> str:
        return self.tokens[token_id]

    def encode(self, tokens: Iterable[str], append_eos: bool = True) -> tuple[int, ...]:
        """Map tokens to ids (unknowns to unk), optionally appending eos."""
        ids = [self.id_or_unk(t) for t in tokens]
        if append_eos:
            ids.append(EOS_ID)
        return tuple(ids)

    def decode(self, ids: Iterable[int], strip_eos: bool = True) -> list[str]:
        out = [self.tokens[i] for i in ids]
        if strip_eos:
            out = [t for t in out if t != EOS]
        return out
