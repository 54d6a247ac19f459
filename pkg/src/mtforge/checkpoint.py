"""Elementwise checkpoint averaging and validation-gated finetune blending."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from mtforge.errors import ConfigError, DataError

DEFAULT_LAST_K = 5

MAGIC = b"MTFG-CKPT"


@dataclass
class TensorBundle:
    """Named tensors in a stable order; float64 in memory."""

    entries: Dict[str, np.ndarray] = field(default_factory=dict)

    def add(self, name: str, data: np.ndarray) -> "TensorBundle":
        if name in self.entries:
            raise DataError("duplicate_tensor", f"tensor {name!r} already present")
        self.entries[name] = np.asarray(data, dtype=np.float64)
        return self

    def names(self) -> List[str]:
        return list(self.entries)

    def compatible_with(self, other: "TensorBundle") -> str | None:
        """None if compatible, else the name of the first offending tensor."""
        if self.names() != other.names():
            ours, theirs = set(self.entries), set(other.entries)
            diff = sorted(ours.symmetric_difference(theirs)) or self.names()
            return diff[0]
        for name, t in self.entries.items():
            if t.shape != other.entries[name].shape:
                return name
        return None


def average(bundles: Sequence[TensorBundle]) -> TensorBundle:
    """Elementwise mean per tensor (pairwise summation via numpy reduce)."""
    if not bundles:
        raise ConfigError("no_bundles", "need at least one bundle")
    first = bundles[0]
    for other in bundles[1:]:
        offender = first.compatible_with(other)
        if offender is not None:
            raise DataError("incompatible_bundles", f"tensor {offender!r} differs between bundles")
    out = TensorBundle()
    for name in first.names():
        stacked = np.stack([b.entries[name] for b in bundles], axis=0)
        out.add(name, stacked.mean(axis=0))
    return out


def last_k(paths: Sequence[str], k: int = DEFAULT_LAST_K) -> List[str]:
    """Last min(k, n) paths in original order."""
    if not paths:
        raise DataError("no_checkpoints", "checkpoint list is empty")
    if k < 1:
        raise ConfigError("bad_k", "k must be >= 1")
    return list(paths[-min(k, len(paths)):])


def finetune_select(
    base: TensorBundle,
    finetuned: TensorBundle,
    valid_metric: Callable[[TensorBundle], float],
    higher_is_better: bool = True,
) -> TensorBundle:
    """Average base with finetuned; keep the average only if it strictly beats
    the finetuned model on the validation metric."""
    candidate = average([base, finetuned])
    m_candidate = valid_metric(candidate)
    m_finetuned = valid_metric(finetuned)
    better = m_candidate > m_finetuned if higher_is_better else m_candidate < m_finetuned
    return candidate if better else finetuned


# --- checkpoint container ---------------------------------------------------------
#
# Little-endian: magic "MTFG-CKPT" | u32 tensor count | per tensor:
# u16 name length + UTF-8 name | u8 rank | rank * u64 dims | f32 data.


def save_bundle(bundle: TensorBundle, path: str) -> None:
    with open(path, "wb") as fp:
        fp.write(MAGIC)
        fp.write(struct.pack("<I", len(bundle.entries)))
        for name, tensor in bundle.entries.items():
            encoded = name.encode("utf-8")
            fp.write(struct.pack("<H", len(encoded)) + encoded)
            fp.write(struct.pack("<B", tensor.ndim))
            fp.write(struct.pack(f"<{tensor.ndim}Q", *tensor.shape))
            fp.write(tensor.astype("<f4").tobytes())


def load_bundle(path: str) -> TensorBundle:
    with open(path, "rb") as fp:
        buf = fp.read()
    if buf[: len(MAGIC)] != MAGIC:
        raise DataError("bad_magic", f"{path}: not a checkpoint file")
    off = len(MAGIC)
    (count,) = struct.unpack_from("<I", buf, off)
    off += 4
    bundle = TensorBundle()
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", buf, off)
        off += 2
        name = buf[off : off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<B", buf, off)
        off += 1
        shape = struct.unpack_from(f"<{rank}Q", buf, off)
        off += 8 * rank
        n = int(np.prod(shape)) if rank else 1
        data = np.frombuffer(buf, dtype="<f4", count=n, offset=off).astype(np.float64)
        off += 4 * n
        bundle.add(name, data.reshape(shape))
    return bundle
