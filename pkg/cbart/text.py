# Tokenization, vocabulary, TF-IDF and keyword extraction
# Copyright (C) 2026 cbart contributors
#
#    This program is free software; you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation; either version 2 of the License, or
#    (at your option) any later version.
#
#    This program is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with this program; if not, write to the Free Software
#    Foundation, Inc., 51 Franklin St, Fifth Floor, Boston, MA  02110-1301 USA

import io
import math
from collections import Counter
from sys import exc_info

import numpy as np
import six

from cbart.error import CbartError

PAD, UNK, BOS, EOS, MASK = 0, 1, 2, 3, 4
SPECIALS = ("<PAD>", "<UNK>", "<S>", "</S>", "<M>")
NUM_SPECIALS = len(SPECIALS)

# Function words and punctuation never picked as keywords.
STOPWORDS = frozenset("""
a an the and or but if then than so as of at by for from in into on onto
to with without about over under up down out off is am are was were be
been being do does did have has had i me my we our you your he him his
she her it its they them their this that these those there here not no
. , ; : ! ? ' " ` - -- ( ) [ ] { } ... 's n't
""".split())


def read_corpus(path):
    """Read a UTF-8, one-sentence-per-line corpus; blank lines are
    skipped."""

    try:
        with io.open(path, 'rt', encoding='utf-8', newline='\n') as fd:
            lines = [line.rstrip('\n') for line in fd]
    except (IOError, OSError, UnicodeDecodeError) as e:
        six.reraise(CbartError,
                    CbartError("Could not read corpus '%s': %s"% (path, e),
                               CbartError.ERROR.DATA),
                    exc_info()[2])
    return [line for line in lines if line.strip()]


class Vocab(object):
    """Bijective token <-> id map; ids 0-4 are the reserved specials."""

    def __init__(self, tokens):
        """:param tokens: the corpus tokens in id order, without the
        five specials which are always prepended."""

        self.id_to_token = list(SPECIALS) + list(tokens)
        self.token_to_id = {}
        for i, token in enumerate(self.id_to_token):
            if token in self.token_to_id:
                raise CbartError("Duplicate vocabulary entry '%s'"% token,
                                 CbartError.ERROR.DATA)
            self.token_to_id[token] = i

    @property
    def size(self):
        return len(self.id_to_token)

    def __len__(self):
        return len(self.id_to_token)

    def __contains__(self, token):
        return token in self.token_to_id

    def id(self, token):
        return self.token_to_id.get(token, UNK)

    def token(self, i):
        return self.id_to_token[i]

    def corpus_tokens(self):
        return self.id_to_token[NUM_SPECIALS:]

    def save(self, path):
        """One line per id in id order, specials included."""

        with io.open(path, 'wt', encoding='utf-8', newline='\n') as fd:
            for token in self.id_to_token:
                fd.write(u"%s\n"% token)

    @classmethod
    def load(cls, path):
        try:
            with io.open(path, 'rt', encoding='utf-8', newline='\n') as fd:
                lines = [line.rstrip('\n') for line in fd]
        except (IOError, OSError, UnicodeDecodeError) as e:
            six.reraise(CbartError,
                        CbartError("Could not read vocab '%s': %s"% (path, e),
                                   CbartError.ERROR.DATA),
                        exc_info()[2])
        if tuple(lines[:NUM_SPECIALS]) != SPECIALS:
            raise CbartError("Vocab file '%s' does not start with the "
                             "special tokens %s"% (path, ' '.join(SPECIALS)),
                             CbartError.ERROR.DATA)
        return cls(lines[NUM_SPECIALS:])


def build_vocab(corpus_lines, min_freq=1, max_size=50000):
    """Keep whitespace tokens seen at least min_freq times, most frequent
    first, ties in lexicographic order, at most max_size ids in total."""

    if not corpus_lines:
        raise CbartError("empty corpus", CbartError.ERROR.DATA)
    if min_freq < 1:
        raise CbartError("min_freq must be >= 1", CbartError.ERROR.USAGE)
    if max_size < NUM_SPECIALS + 1:
        raise CbartError("max_size must be >= %d"% (NUM_SPECIALS + 1),
                         CbartError.ERROR.USAGE)

    counts = Counter()
    for line in corpus_lines:
        counts.update(line.split())
    for special in SPECIALS:
        counts.pop(special, None)
    kept = sorted((t for t, c in counts.items() if c >= min_freq),
                  key=lambda t: (-counts[t], t))
    return Vocab(kept[:max_size - NUM_SPECIALS])


def encode(text, vocab):
    """Whitespace tokens wrapped in BOS/EOS, unknown tokens map to UNK."""

    ids = [vocab.id(t) for t in text.split()]
    # literal special strings in the text are ordinary unknown words
    return [BOS] + [i if i >= NUM_SPECIALS else UNK for i in ids] + [EOS]


def check_sentence(ids):
    """Raise unless ids is BOS, interior tokens, EOS."""

    if len(ids) < 2 or ids[0] != BOS or ids[-1] != EOS:
        raise CbartError("Malformed sentence ids %s: missing <S>/</S>"%
                         list(ids), CbartError.ERROR.DATA)
    for i in ids[1:-1]:
        if i in (PAD, BOS, EOS, MASK):
            raise CbartError("Malformed sentence ids %s: special token "
                             "in the interior"% list(ids),
                             CbartError.ERROR.DATA)


def decode(ids, vocab):
    check_sentence(ids)
    return " ".join(vocab.token(i) for i in ids[1:-1])


class TfIdfTable(object):
    """Inverse document frequencies over a line corpus."""

    def __init__(self, doc_count, doc_freq):
        self.doc_count = doc_count
        self.doc_freq = dict(doc_freq)
        self.score = dict((t, math.log(float(doc_count) / df))
                          for t, df in self.doc_freq.items())

    def idf(self, token_id):
        return self.score.get(token_id, 0.0)

    def sentence_scores(self, ids):
        """TF-IDF of each interior token occurrence of a sentence; the
        sentence length is its interior token count."""

        interior = list(ids[1:-1])
        if not interior:
            return []
        counts = Counter(interior)
        n = float(len(interior))
        return [counts[t] / n * self.idf(t) for t in interior]


def build_tfidf(corpus_lines, vocab):
    if not corpus_lines:
        raise CbartError("empty corpus", CbartError.ERROR.DATA)
    doc_freq = Counter()
    for line in corpus_lines:
        doc_freq.update(set(encode(line, vocab)[1:-1]))
    return TfIdfTable(len(corpus_lines), doc_freq)


def eligible_keyword_positions(sentence, vocab):
    """Interior positions that may serve as a keyword: not UNK, not a
    stopword, at least two characters, first occurrence of its surface
    token."""

    seen = set()
    positions = []
    for pos in range(1, len(sentence) - 1):
        token_id = sentence[pos]
        if token_id == UNK or token_id in seen:
            continue
        token = vocab.token(token_id)
        if len(token) < 2 or token.lower() in STOPWORDS:
            continue
        seen.add(token_id)
        positions.append(pos)
    return positions


def extract_keywords(sentence, n, seed, vocab):
    """Sample n keywords uniformly without replacement, returned in
    sentence order.

    The sampler is numpy.random.default_rng(seed).choice(len(eligible),
    n, replace=False), sorted."""

    check_sentence(sentence)
    if n < 1:
        raise CbartError("n must be >= 1", CbartError.ERROR.USAGE)
    eligible = eligible_keyword_positions(sentence, vocab)
    if len(eligible) < n:
        raise CbartError("insufficient keywords: %d eligible, %d wanted"%
                         (len(eligible), n), CbartError.ERROR.DATA)
    rng = np.random.default_rng(seed)
    picked = sorted(int(i) for i in rng.choice(len(eligible), n,
                                               replace=False))
    return [sentence[eligible[i]] for i in picked]


def derive_seed(seed, index):
    """Seed of the index-th unit of work (corpus line, chain) under a
    run seed, independent of the order the units are processed in."""

    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])
