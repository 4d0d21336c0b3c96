"""Synthetic corpus generator: determinism, geometry, and rare-word placement."""

import numpy as np
import pytest

from lookahead_rnnt.corpus import read_split
from lookahead_rnnt.metrics import load_train_counts
from lookahead_rnnt.taskgen import (
    SynthSpec,
    _make_confusables,
    _rng,
    generate_corpus,
    render_frames,
)
from lookahead_rnnt.vocab import (
    BLANK_TOKEN,
    DELIM_TOKEN,
    REPEATS,
    Vocabulary,
    tokens_to_words,
    words_to_tokens,
)


def small_spec(**overrides):
    base = dict(
        phone_inventory=6, n_words=10, n_rare_words=3,
        word_len_min=2, word_len_max=3, utt_len_min=2, utt_len_max=4,
        silence_frames=1, noise_sigma=0.1, confusion_rate=0.05, kappa=2.0,
        n_train=80, n_test_in=12, n_test_rare=12,
        rare_train_min=2, rare_train_max=5,
    )
    base.update(overrides)
    return SynthSpec(**base)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    summary = generate_corpus(small_spec(), seed=7, out_dir=out)
    return out, summary


# -- determinism -------------------------------------------------------------------


def test_same_seed_is_byte_identical(tmp_path, corpus):
    first, _ = corpus
    again = tmp_path / "again"
    generate_corpus(small_spec(), seed=7, out_dir=again)
    files = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())
    assert files, "corpus wrote no files"
    assert files == sorted(p.relative_to(again) for p in again.rglob("*") if p.is_file())
    for rel in files:
        assert (first / rel).read_bytes() == (again / rel).read_bytes(), rel


def test_different_seed_differs(tmp_path, corpus):
    _, summary = corpus
    other = generate_corpus(small_spec(), seed=8, out_dir=tmp_path / "other")
    assert other.words != summary.words


# -- corpus contents -------------------------------------------------------------------


def test_split_sizes_and_words(corpus):
    out, summary = corpus
    spec = small_spec()
    assert summary.n_utts == {"train": 80, "test_in": 12, "test_rare": 12}
    assert len(summary.words) == spec.n_words
    assert len(set(summary.words)) == spec.n_words
    assert len(summary.rare_words) == spec.n_rare_words
    for word in summary.words:
        assert 2 <= len(word) <= 3
        assert set(word) <= set(spec.phones)


def test_rare_train_counts_within_bounds(corpus):
    out, summary = corpus
    spec = small_spec()
    for word in summary.rare_words:
        assert spec.rare_train_min <= summary.train_counts[word] <= spec.rare_train_max
    # counts on disk agree with the summary
    assert load_train_counts(out / "train_counts.tsv") == summary.train_counts
    # counts describe the actual train split
    utts = read_split(out / "train")
    from collections import Counter
    seen = Counter(w for u in utts for w in u.words)
    assert {w: seen.get(w, 0) for w in summary.words} == summary.train_counts


def test_test_rare_plants_unseen_left_contexts(corpus):
    out, summary = corpus
    rare = set(summary.rare_words)
    train_pairs = set()
    for u in read_split(out / "train"):
        for i, w in enumerate(u.words):
            if w in rare:
                train_pairs.add((u.words[i - 1] if i else None, w))
    planted = 0
    for u in read_split(out / "test_rare"):
        for i, w in enumerate(u.words):
            if w in rare:
                planted += 1
                assert (u.words[i - 1] if i else None, w) not in train_pairs
    assert planted >= len(read_split(out / "test_rare"))


def test_test_in_contains_no_rare_words(corpus):
    out, summary = corpus
    rare = set(summary.rare_words)
    for u in read_split(out / "test_in"):
        assert not rare & set(u.words)


def test_vocab_file_layout(corpus):
    out, _ = corpus
    vocab = Vocabulary.load(out / "vocab.txt")
    spec = small_spec()
    assert vocab.token_of(0) == BLANK_TOKEN
    assert vocab.token_of(1) == DELIM_TOKEN
    assert [vocab.token_of(i) for i in range(2, len(vocab))] == spec.phones


def test_frame_geometry_and_targets(corpus):
    out, _ = corpus
    spec = small_spec()
    for u in read_split(out / "test_in"):
        n_phones = sum(len(w) for w in u.words)
        n_sil = (len(u.words) - 1) * spec.silence_frames
        assert u.frames.shape == (n_phones + n_sil, spec.feat_dim)
        assert u.phones == words_to_tokens(u.words)
        assert tokens_to_words(u.phones) == u.words


# -- acoustic rendering ----------------------------------------------------------------


def test_render_frames_clean_is_separable():
    spec = small_spec(noise_sigma=0.0, confusion_rate=0.0)
    conf = _make_confusables(spec, _rng(0, "confuse"))
    ids = [0, 3, spec.silence_id, 2]
    frames, labels = render_frames(ids, spec, conf, _rng(0, "train_acoustics"))
    assert frames.shape == (4, spec.feat_dim)
    assert labels.tolist() == ids
    assert frames.argmax(axis=1).tolist() == ids
    assert np.all((frames == 0) | (frames == 1))


def test_oracle_frame_accuracy_tracks_corruption(tmp_path, corpus):
    _, noisy = corpus
    clean = generate_corpus(
        small_spec(noise_sigma=0.0, confusion_rate=0.0), seed=7, out_dir=tmp_path / "c")
    for split in ("train", "test_in", "test_rare"):
        assert clean.oracle_frame_accuracy[split] == 1.0
        assert noisy.oracle_frame_accuracy[split] < 1.0
        assert noisy.oracle_frame_accuracy[split] > 0.8


def test_confusables_never_self():
    spec = small_spec()
    conf = _make_confusables(spec, _rng(3, "confuse"))
    for p in range(spec.phone_inventory):
        assert p not in conf[p]


# -- failure modes --------------------------------------------------------------------


def test_rare_injection_overflow_raises(tmp_path):
    spec = small_spec(n_train=2, utt_len_min=2, utt_len_max=2,
                      rare_train_min=5, rare_train_max=5)
    with pytest.raises(ValueError, match="word slots"):
        generate_corpus(spec, seed=0, out_dir=tmp_path / "x")


@pytest.mark.parametrize("bad", [
    dict(phone_inventory=1),
    dict(word_len_min=1),
    dict(word_len_max=9),
    dict(frames_per_phone_min=0),
    dict(noise_sigma=-0.1),
    dict(confusion_rate=1.0),
    dict(kappa=0.5),
    dict(n_rare_words=0),
    dict(n_rare_words=10),
    dict(rare_train_min=0),
])
def test_spec_validation(bad):
    with pytest.raises(ValueError):
        small_spec(**bad)


# -- emission-unit round trip -----------------------------------------------------------


def test_words_to_tokens_doubles_every_sound():
    toks = words_to_tokens(["ab", "c"])
    assert toks == ["a"] * REPEATS + ["b"] * REPEATS + [DELIM_TOKEN] * REPEATS + ["c"] * REPEATS


def test_tokens_to_words_collapses_partial_pairs():
    # a decoder that drops one copy of a doubled sound still reads back cleanly
    assert tokens_to_words(["a", "a", "b"]) == ["ab"]
    assert tokens_to_words(["a", DELIM_TOKEN, "b", "b"]) == ["a", "b"]
    assert tokens_to_words([]) == []
