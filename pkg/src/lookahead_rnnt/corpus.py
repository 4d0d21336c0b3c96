"""On-disk corpus layout and readers/writers.

A corpus directory contains ``lexicon.tsv``, ``vocab.txt``, ``train_counts.tsv``
and one subdirectory per split (``train``, ``test_in``, ``test_rare``), each
holding:

    feats.bin   versioned binary: magic "FEAT", u32 version, u32 count, then
                per utterance u32 T, u32 F, T*F little-endian float64
    text.tsv    utt_id <TAB> space-joined words
    phones.tsv  utt_id <TAB> space-joined phones

Utterance order inside a split is the id-sorted order everywhere, which keeps
every downstream artifact byte-reproducible.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FEATS_MAGIC = b"FEAT"
FEATS_VERSION = 1
SPLITS = ("train", "test_in", "test_rare")


@dataclass
class Utterance:
    utt_id: str
    frames: np.ndarray          # T x F float64
    words: list[str]
    phones: list[str]


def write_feats(path, frame_list) -> None:
    chunks = [FEATS_MAGIC, struct.pack("<II", FEATS_VERSION, len(frame_list))]
    for frames in frame_list:
        arr = np.ascontiguousarray(frames, dtype="<f8")
        if arr.ndim != 2:
            raise ValueError(f"frames must be 2-D, got shape {arr.shape}")
        chunks.append(struct.pack("<II", arr.shape[0], arr.shape[1]))
        chunks.append(arr.tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(chunks))


def read_feats(path) -> list[np.ndarray]:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != FEATS_MAGIC:
        raise ValueError(f"{path}: bad magic {blob[:4]!r}")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != FEATS_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    out = []
    off = 12
    for _ in range(count):
        T, F = struct.unpack_from("<II", blob, off)
        off += 8
        arr = np.frombuffer(blob, dtype="<f8", count=T * F, offset=off).reshape(T, F)
        off += 8 * T * F
        out.append(arr.astype(np.float64))
    if off != len(blob):
        raise ValueError(f"{path}: {len(blob) - off} trailing bytes")
    return out


def _write_tsv(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for key, value in rows:
            f.write(f"{key}\t{value}\n")


def _read_tsv(path) -> list[tuple[str, str]]:
    rows = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            key, _, value = line.partition("\t")
            rows.append((key, value))
    return rows


def write_split(split_dir, utterances: list[Utterance]) -> None:
    split_dir = Path(split_dir)
    split_dir.mkdir(parents=True, exist_ok=True)
    utts = sorted(utterances, key=lambda u: u.utt_id)
    write_feats(split_dir / "feats.bin", [u.frames for u in utts])
    _write_tsv(split_dir / "text.tsv", [(u.utt_id, " ".join(u.words)) for u in utts])
    _write_tsv(split_dir / "phones.tsv", [(u.utt_id, " ".join(u.phones)) for u in utts])


def read_split(split_dir) -> list[Utterance]:
    split_dir = Path(split_dir)
    frames = read_feats(split_dir / "feats.bin")
    text = _read_tsv(split_dir / "text.tsv")
    phones = _read_tsv(split_dir / "phones.tsv")
    if not (len(frames) == len(text) == len(phones)):
        raise ValueError(f"{split_dir}: feats/text/phones lengths disagree "
                         f"({len(frames)}/{len(text)}/{len(phones)})")
    out = []
    for arr, (tid, words), (pid, phs) in zip(frames, text, phones):
        if tid != pid:
            raise ValueError(f"{split_dir}: utterance ids disagree ({tid!r} vs {pid!r})")
        out.append(Utterance(tid, arr, words.split(), phs.split()))
    return out


def write_train_counts(path, counts: dict[str, int]) -> None:
    _write_tsv(path, [(w, str(counts[w])) for w in sorted(counts)])
