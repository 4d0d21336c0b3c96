"""Synthetic spoken-word corpus with a built-in hallucination trap.

Words are short phone strings; acoustics are one-hot phone frames corrupted
two ways: Gaussian feature noise (sigma) and occasional identity confusion
(rho: a frame is rendered from a confusable phone instead). Words are
separated by a few frames of silence (its own feature dimension), and the
emission targets are phone tokens with a word delimiter aligned to that
silence — rare words are then novel sequences of well-trained units rather
than unlearnable whole-word classes. Word sequences come from a rank-skewed
bigram LM over the *common* words, so a trained decoder acquires a strong
prior over continuations.

Rare words never occur in the LM. They are spliced into training utterances a
controlled handful of times (always fewer than the rare-word threshold), and
the ``test_rare`` split places them in fluent carrier contexts whose left
bigram was never seen with that word in training — contexts where the LM
prior actively argues *against* what was said. Models that lean on the prior
hallucinate a common word there; :func:`hallucination_score` counts exactly
those substitutions whose phonetics are too far from the reference to be a
mishearing.

All randomness flows from one seed through named substreams, so a corpus is a
pure function of (spec, seed).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import Config
from .corpus import Utterance, write_split, write_train_counts
from .metrics import ClusterMap, edit_distance, g2p, normalized_der
from .vocab import BLANK_TOKEN, DELIM_TOKEN, Vocabulary, words_to_tokens

# Inventory symbols double as both phone labels (covered by the bundled
# feature/cluster tables) and word characters (so the per-character g2p
# fallback agrees with the lexicon).
PHONE_SYMBOLS = "pbtdkgmnszlrwjhieaou"

_STREAMS = {"words": 0, "confuse": 1, "lm": 2, "train": 3, "inject": 4,
            "train_acoustics": 5, "test_in": 6, "test_rare": 7, "rare": 8}


def _rng(seed: int, stream: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), _STREAMS[stream]]))


@dataclass(frozen=True)
class SynthSpec:
    phone_inventory: int = 12
    n_words: int = 24
    n_rare_words: int = 6
    word_len_min: int = 2
    word_len_max: int = 4
    utt_len_min: int = 3
    utt_len_max: int = 5
    frames_per_phone_min: int = 1
    frames_per_phone_max: int = 1
    silence_frames: int = 1
    noise_sigma: float = 0.2
    confusion_rate: float = 0.05
    kappa: float = 2.0
    n_train: int = 2000
    n_test_in: int = 150
    n_test_rare: int = 150
    rare_train_min: int = 3
    rare_train_max: int = 12

    def __post_init__(self):
        if not 2 <= self.phone_inventory <= len(PHONE_SYMBOLS):
            raise ValueError(f"phone_inventory must be in [2, {len(PHONE_SYMBOLS)}]")
        if not 2 <= self.word_len_min <= self.word_len_max <= 5:
            raise ValueError("word lengths must satisfy 2 <= min <= max <= 5")
        if not 1 <= self.utt_len_min <= self.utt_len_max:
            raise ValueError("utterance lengths must satisfy 1 <= min <= max")
        if not 1 <= self.frames_per_phone_min <= self.frames_per_phone_max:
            raise ValueError("frames per phone must satisfy 1 <= min <= max")
        if not 0 <= self.silence_frames <= 4:
            raise ValueError("silence_frames must be in [0, 4]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0 <= self.confusion_rate < 1:
            raise ValueError("confusion_rate must be in [0, 1)")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1 (1 = uniform bigram)")
        if not 0 < self.n_rare_words < self.n_words:
            raise ValueError("need 0 < n_rare_words < n_words")
        if not 1 <= self.rare_train_min <= self.rare_train_max:
            raise ValueError("rare train occurrences must satisfy 1 <= min <= max")
        if self.n_train < 1 or self.n_test_in < 1 or self.n_test_rare < 1:
            raise ValueError("all split sizes must be >= 1")

    @property
    def phones(self) -> list[str]:
        return list(PHONE_SYMBOLS[: self.phone_inventory])

    @property
    def silence_id(self) -> int:
        """Feature index of the silence dimension (one past the phones)."""
        return self.phone_inventory

    @property
    def feat_dim(self) -> int:
        return self.phone_inventory + 1

    @classmethod
    def from_config(cls, cfg: Config) -> "SynthSpec":
        return cls(
            phone_inventory=cfg["data.phone_inventory"],
            n_words=cfg["data.n_words"],
            n_rare_words=cfg["data.n_rare_words"],
            word_len_min=cfg["data.word_len_min"],
            word_len_max=cfg["data.word_len_max"],
            utt_len_min=cfg["data.utt_len_min"],
            utt_len_max=cfg["data.utt_len_max"],
            frames_per_phone_min=cfg["data.frames_per_phone_min"],
            frames_per_phone_max=cfg["data.frames_per_phone_max"],
            silence_frames=cfg["data.silence_frames"],
            noise_sigma=cfg["data.noise_sigma"],
            confusion_rate=cfg["data.confusion_rate"],
            kappa=cfg["data.kappa"],
            n_train=cfg["data.n_train"],
            n_test_in=cfg["data.n_test_in"],
            n_test_rare=cfg["data.n_test_rare"],
            rare_train_min=cfg["data.rare_train_min"],
            rare_train_max=cfg["data.rare_train_max"],
        )


# -- vocabulary construction -----------------------------------------------------

def _make_words(spec: SynthSpec, rng: np.random.Generator) -> list[str]:
    phones = spec.phones
    words: list[str] = []
    seen = set()
    for _ in range(spec.n_words):
        for _attempt in range(1000):
            length = int(rng.integers(spec.word_len_min, spec.word_len_max + 1))
            word = "".join(phones[i] for i in rng.integers(0, len(phones), size=length))
            if word not in seen:
                break
        else:
            raise RuntimeError("could not sample enough distinct words; "
                               "enlarge the inventory or shorten the word list")
        seen.add(word)
        words.append(word)
    return words


# -- bigram language model ---------------------------------------------------------

class _BigramLM:
    """P(next | prev) proportional to rank^-(kappa-1) over seeded rankings."""

    def __init__(self, n: int, kappa: float, rng: np.random.Generator):
        ranks = np.arange(1, n + 1, dtype=np.float64) ** (-(kappa - 1.0))
        base = ranks / ranks.sum()
        # each context gets its own random assignment of the rank profile
        self.start = base[rng.permutation(n)]
        self.trans = np.empty((n, n))
        for i in range(n):
            self.trans[i] = base[rng.permutation(n)]

    def sample(self, length: int, rng: np.random.Generator) -> list[int]:
        seq = [int(rng.choice(len(self.start), p=self.start))]
        for _ in range(length - 1):
            seq.append(int(rng.choice(len(self.start), p=self.trans[seq[-1]])))
        return seq


# -- acoustics -----------------------------------------------------------------------

def render_frames(sound_ids, spec: SynthSpec, confusables: np.ndarray,
                  rng: np.random.Generator):
    """Frames and per-frame generating ids for a sound-id sequence.

    Ids below ``phone_inventory`` are phones (one segment of 2..k frames,
    occasionally rendered from a confusable identity); ``silence_id`` renders
    ``silence_frames`` frames of the silence dimension per occurrence.
    Gaussian feature noise applies to every frame.
    """
    F = spec.feat_dim
    sil = spec.silence_id
    rows = []
    labels = []
    for sid in sound_ids:
        if sid == sil:
            n = spec.silence_frames
        else:
            n = int(rng.integers(spec.frames_per_phone_min, spec.frames_per_phone_max + 1))
        for _ in range(n):
            identity = sid
            if (sid != sil and spec.confusion_rate > 0
                    and rng.random() < spec.confusion_rate):
                identity = int(confusables[sid, rng.integers(0, confusables.shape[1])])
            row = np.zeros(F)
            row[identity] = 1.0
            if spec.noise_sigma > 0:
                row += spec.noise_sigma * rng.standard_normal(F)
            rows.append(row)
            labels.append(sid)
    return np.array(rows), np.array(labels, dtype=np.int64)


def _make_confusables(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    """Two fixed alternative identities per phone, sampled once per corpus."""
    K = spec.phone_inventory
    table = np.zeros((K, 2), dtype=np.int64)
    for p in range(K):
        others = np.array([q for q in range(K) if q != p])
        table[p] = rng.choice(others, size=2, replace=False)
    return table


# -- corpus assembly --------------------------------------------------------------------

@dataclass
class CorpusSummary:
    words: list[str]
    rare_words: list[str]
    train_counts: dict[str, int]
    oracle_frame_accuracy: dict[str, float]
    n_utts: dict[str, int]
    frame_labels: dict[str, list[np.ndarray]] = field(repr=False, default_factory=dict)


def _utterance_sound_ids(utt_words: list[str], spec: SynthSpec) -> list[int]:
    """Phone ids of the words with one silence id at each word boundary."""
    index = {p: i for i, p in enumerate(spec.phones)}
    ids: list[int] = []
    for k, word in enumerate(utt_words):
        if k:
            ids.append(spec.silence_id)
        ids.extend(index[c] for c in word)
    return ids


def generate_corpus(spec: SynthSpec, seed: int, out_dir) -> CorpusSummary:
    """Generate and write all splits; returns bookkeeping for tests/reports."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    phones = spec.phones
    words = _make_words(spec, _rng(seed, "words"))
    rare_ids = sorted(int(i) for i in
                      _rng(seed, "rare").choice(spec.n_words, spec.n_rare_words, replace=False))
    rare_set = set(rare_ids)
    common_ids = [i for i in range(spec.n_words) if i not in rare_set]
    confusables = _make_confusables(spec, _rng(seed, "confuse"))
    lm = _BigramLM(len(common_ids), spec.kappa, _rng(seed, "lm"))

    # word sequences for train (common words only, then rare injection)
    rng_train = _rng(seed, "train")
    train_seqs: list[list[int]] = []
    for _ in range(spec.n_train):
        length = int(rng_train.integers(spec.utt_len_min, spec.utt_len_max + 1))
        train_seqs.append([common_ids[j] for j in lm.sample(length, rng_train)])

    rng_inject = _rng(seed, "inject")
    slots = [(i, p) for i, seq in enumerate(train_seqs) for p in range(len(seq))]
    order = rng_inject.permutation(len(slots))
    injected_left_context: set[tuple[int, int]] = set()  # (prev word id or -1, rare id)
    occurrences = [int(rng_inject.integers(spec.rare_train_min, spec.rare_train_max + 1))
                   for _ in rare_ids]
    if sum(occurrences) > len(slots):
        raise ValueError(
            f"train split has only {len(slots)} word slots but rare injection "
            f"needs {sum(occurrences)}; raise n_train or lower the rare counts")
    cursor = 0
    for rid, n_occ in zip(rare_ids, occurrences):
        for _ in range(n_occ):
            utt_i, pos = slots[order[cursor]]
            cursor += 1
            train_seqs[utt_i][pos] = rid
    # record left contexts only after all injections (injections may neighbor)
    for seq in train_seqs:
        for pos, wid in enumerate(seq):
            if wid in rare_set:
                prev = seq[pos - 1] if pos > 0 else -1
                injected_left_context.add((prev, wid))

    # test_in: plain LM samples
    rng_test_in = _rng(seed, "test_in")
    test_in_seqs = []
    for _ in range(spec.n_test_in):
        length = int(rng_test_in.integers(spec.utt_len_min, spec.utt_len_max + 1))
        test_in_seqs.append([common_ids[j] for j in lm.sample(length, rng_test_in)])

    # test_rare: LM carrier with one rare word in an unseen left context
    rng_test_rare = _rng(seed, "test_rare")
    test_rare_seqs = []
    for k in range(spec.n_test_rare):
        rid = rare_ids[int(rng_test_rare.integers(0, len(rare_ids)))]
        for _attempt in range(200):
            length = int(rng_test_rare.integers(spec.utt_len_min, spec.utt_len_max + 1))
            seq = [common_ids[j] for j in lm.sample(length, rng_test_rare)]
            pos = int(rng_test_rare.integers(0, length))
            prev = seq[pos - 1] if pos > 0 else -1
            if (prev, rid) not in injected_left_context:
                seq[pos] = rid
                test_rare_seqs.append(seq)
                break
        else:
            raise RuntimeError("could not place a rare word in an unseen context")

    # acoustics + writing
    summary = CorpusSummary(
        words=words,
        rare_words=[words[i] for i in rare_ids],
        train_counts={},
        oracle_frame_accuracy={},
        n_utts={},
    )
    split_data = {
        "train": (train_seqs, _rng(seed, "train_acoustics")),
        "test_in": (test_in_seqs, rng_test_in),
        "test_rare": (test_rare_seqs, rng_test_rare),
    }
    for split, (seqs, rng_ac) in split_data.items():
        utts = []
        labels_list = []
        correct = 0
        total = 0
        for i, seq in enumerate(seqs):
            utt_words = [words[wid] for wid in seq]
            sound_ids = _utterance_sound_ids(utt_words, spec)
            frames, labels = render_frames(sound_ids, spec, confusables, rng_ac)
            correct += int(np.sum(frames.argmax(axis=1) == labels))
            total += labels.shape[0]
            utts.append(Utterance(
                utt_id=f"{split}_{i:05d}",
                frames=frames,
                words=utt_words,
                phones=words_to_tokens(utt_words),  # the emission targets
            ))
            labels_list.append(labels)
        write_split(out_dir / split, utts)
        summary.n_utts[split] = len(utts)
        summary.oracle_frame_accuracy[split] = correct / total if total else 0.0
        summary.frame_labels[split] = labels_list

    with open(out_dir / "lexicon.tsv", "w", encoding="utf-8") as f:
        for word in words:
            f.write(f"{word}\t{' '.join(word)}\n")
    Vocabulary([BLANK_TOKEN, DELIM_TOKEN] + phones).save(out_dir / "vocab.txt")
    counts = Counter(words[wid] for seq in train_seqs for wid in seq)
    summary.train_counts = {w: int(counts.get(w, 0)) for w in words}
    write_train_counts(out_dir / "train_counts.tsv", summary.train_counts)
    return summary


# -- hallucination measurement ---------------------------------------------------------

@dataclass
class HallucinationReport:
    rate: float
    hallucinated: int
    substitutions: int
    ref_words: int


def hallucination_score(refs, hyps, lexicon: dict[str, list[str]],
                        clusters: ClusterMap | None = None,
                        threshold: float = 0.5) -> HallucinationReport:
    """Fraction of reference words replaced by phonetically unrelated ones.

    Word-level substitutions (from a unit-cost alignment) are re-judged at the
    phone level: a substitution whose normalized Dolgopolsky distance is
    >= ``threshold`` cannot plausibly be a mishearing and counts as a
    hallucination. The rate is hallucinations per reference word.
    """
    if clusters is None:
        clusters = ClusterMap.bundled()
    if len(refs) != len(hyps):
        raise ValueError(f"{len(refs)} references vs {len(hyps)} hypotheses")
    hallucinated = 0
    substitutions = 0
    ref_words = 0
    for ref, hyp in zip(refs, hyps):
        ref_words += len(ref)
        _, steps = edit_distance(ref, hyp)
        for s in steps:
            if s.op != "sub":
                continue
            substitutions += 1
            ref_ph, _ = g2p([ref[s.ref_idx]], lexicon)
            hyp_ph, _ = g2p([hyp[s.hyp_idx]], lexicon)
            if normalized_der(ref_ph, hyp_ph, clusters) >= threshold:
                hallucinated += 1
    rate = hallucinated / ref_words if ref_words else 0.0
    return HallucinationReport(rate, hallucinated, substitutions, ref_words)
