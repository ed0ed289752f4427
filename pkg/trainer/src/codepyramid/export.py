"""Write trained codes into the retrieval engine's codebook container.

This is the wire format shared with the engine ("CTFC", little-endian): u16
version 1, u16 level count, u32 lengths ascending, u64 item count, per level
the codes packed LSB-first into u64 words, then u32 person ids and u16 camera
ids. Code value +1 is stored as bit 1, -1 as bit 0.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import torch

from .data import ToySplit
from .model import CodeBatch

MAGIC = b"CTFC"
FORMAT_VERSION = 1


def pack_sign_codes(codes: np.ndarray) -> np.ndarray:
    """Pack a {-1,+1} matrix into (n, ceil(bits/64)) little-endian u64 words."""
    n, bits = codes.shape
    if bits % 8:
        raise ValueError(f"code length {bits} is not a multiple of 8")
    ones = (codes > 0).astype(np.uint8)
    packed_bytes = np.packbits(ones, axis=1, bitorder="little")
    words = (bits + 63) // 64
    padded = np.zeros((n, words * 8), dtype=np.uint8)
    padded[:, : bits // 8] = packed_bytes
    return padded.view("<u8")


def write_codebook(path, codes_by_level: list[np.ndarray], person_ids, camera_ids) -> None:
    lengths = [c.shape[1] for c in codes_by_level]
    if any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise ValueError(f"levels must be written in ascending length order, got {lengths}")
    n_items = codes_by_level[0].shape[0]
    person_ids = np.asarray(person_ids, dtype="<u4")
    camera_ids = np.asarray(camera_ids, dtype="<u2")
    with open(Path(path), "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<HH", FORMAT_VERSION, len(lengths)))
        f.write(struct.pack(f"<{len(lengths)}I", *lengths))
        f.write(struct.pack("<Q", n_items))
        for codes in codes_by_level:
            f.write(pack_sign_codes(codes).tobytes())
        f.write(person_ids.tobytes())
        f.write(camera_ids.tobytes())


def extract_codes(model: torch.nn.Module, split: ToySplit, batch_size: int = 128) -> list[np.ndarray]:
    """Hard codes for every item of a split, one {-1,+1} matrix per level ascending."""
    model.eval()
    per_level: list[list[np.ndarray]] = []
    with torch.no_grad():
        for lo in range(0, len(split), batch_size):
            out: CodeBatch = model(split.tensor[lo : lo + batch_size])
            if not per_level:
                per_level = [[] for _ in out.hard]
            for k, hard in enumerate(out.hard):
                per_level[k].append(hard.numpy().astype(np.int8))
    return [np.concatenate(chunks) for chunks in per_level]


def export_codes(model: torch.nn.Module, split: ToySplit, path) -> list[np.ndarray]:
    """Encode a split and write it as an engine codebook; returns the codes."""
    codes = extract_codes(model, split)
    write_codebook(path, codes, split.person_ids, split.camera_ids)
    return codes
