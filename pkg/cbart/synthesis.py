# Synthetic (X, L, Y^M, Y) construction
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
import json
import math
from collections import namedtuple
from sys import exc_info

import numpy as np
import six

from cbart import threadutil
from cbart.error import CbartError
from cbart.text import PAD, BOS, EOS, MASK, NUM_SPECIALS, encode, \
    check_sentence
from cbart.ui import getglobalui

COPY, REPLACE, INSERT = 0, 1, 2
ACTION_NAMES = ('copy', 'replace', 'insert')

STRATEGIES = ('left', 'middle', 'right', 'random', 'tfidf')

DATASET_FIELDS = ('x', 'l', 'ym', 'y')


class TrainingInstance(namedtuple('TrainingInstance', DATASET_FIELDS)):
    """One supervised quadruple: encoder input x, labels l, decoder
    input ym and decoder target y."""

    __slots__ = ()

    def to_json(self):
        return json.dumps(dict((f, [int(v) for v in getattr(self, f)])
                               for f in DATASET_FIELDS),
                          separators=(',', ':'))

    @classmethod
    def from_json(cls, line):
        obj = json.loads(line)
        return cls(*[list(obj[f]) for f in DATASET_FIELDS])


def check_instance(inst):
    """Raise if one of the structural invariants of inst does not hold."""

    x, l, ym, y = inst
    problems = []
    if len(x) != len(l):
        problems.append("|x| != |l|")
    if any(label not in (COPY, REPLACE, INSERT) for label in l):
        problems.append("unknown label")
    if x and x[0] == BOS and l and l[0] != COPY:
        problems.append("<S> not labeled copy")
    if len(ym) != len(x) + l.count(INSERT):
        problems.append("|ym| != |x| + inserts")
    if len(ym) != len(y):
        problems.append("|ym| != |y|")
    if len(ym) < 2 or ym[0] != EOS or ym[1] != BOS:
        problems.append("ym does not start with </S> <S>")
    if ym.count(MASK) != l.count(INSERT) + l.count(REPLACE):
        problems.append("mask count does not match labels")
    if MASK in y or PAD in y or not y or y[0] != BOS or y[-1] != EOS:
        problems.append("y is not a clean sentence")
    if problems:
        raise CbartError("Invalid training instance (%s): %s"%
                         ('; '.join(problems), inst.to_json()),
                         CbartError.ERROR.DATA)


def subsample(original, rng):
    """Pick the tokens that survive: <S> and </S> always, plus a uniform
    number (1..interior length) of interior tokens chosen uniformly.

    :returns: sorted list of kept indices into original"""

    interior = len(original) - 2
    if interior < 1:
        raise CbartError("Cannot subsample a sentence without tokens",
                         CbartError.ERROR.DATA)
    keep = int(rng.integers(1, interior + 1))
    chosen = rng.choice(interior, keep, replace=False) + 1
    return [0] + sorted(int(i) for i in chosen) + [len(original) - 1]


def is_gap_preceded(kept_indices, j):
    return j > 0 and kept_indices[j] > kept_indices[j - 1] + 1


def replacement_count(rate, eligible):
    """Half-up rounding of rate * eligible."""

    return int(math.floor(rate * eligible + 0.5))


def apply_replacements(original, kept_indices, rate, rng, vocab_size):
    """Corrupt a fraction of the kept interior tokens.

    Only tokens that directly follow their original predecessor are
    eligible, so no position is both gap-preceded and replaced.

    :returns: (x, replaced) where replaced flags each kept position"""

    if not 0 <= rate < 1:
        raise CbartError("replace rate must be in [0, 1)",
                         CbartError.ERROR.USAGE)
    x = [original[i] for i in kept_indices]
    replaced = [False] * len(kept_indices)
    eligible = [j for j in range(1, len(kept_indices) - 1)
                if not is_gap_preceded(kept_indices, j)]
    count = replacement_count(rate, len(eligible))
    if count == 0:
        return x, replaced

    ordinary = vocab_size - NUM_SPECIALS
    if ordinary < 2:
        raise CbartError("Vocabulary too small to supply a distinct "
                         "replacement token", CbartError.ERROR.DATA)
    for pick in sorted(rng.choice(len(eligible), count, replace=False)):
        j = eligible[int(pick)]
        token = x[j]
        if NUM_SPECIALS <= token < vocab_size:
            # Uniform over the ordinary ids other than the original.
            draw = NUM_SPECIALS + int(rng.integers(0, ordinary - 1))
            if draw >= token:
                draw += 1
        else:
            draw = NUM_SPECIALS + int(rng.integers(0, ordinary))
        x[j] = draw
        replaced[j] = True
    return x, replaced


def derive_labels(kept_indices, replaced):
    labels = []
    for j in range(len(kept_indices)):
        if is_gap_preceded(kept_indices, j):
            labels.append(INSERT)
        elif replaced[j]:
            labels.append(REPLACE)
        else:
            labels.append(COPY)
    return labels


def masked_sequence(x, labels):
    """The unshifted decoder sequence U: a mask before every insert
    position and instead of every replace position."""

    out = []
    for token, label in zip(x, labels):
        if label == INSERT:
            out.append(MASK)
            out.append(token)
        elif label == REPLACE:
            out.append(MASK)
        else:
            out.append(token)
    return out


def shift_right(seq):
    """</S> as decoder start, last element dropped."""

    return [EOS] + list(seq[:-1])


def pick_gold(gap, strategy, tfidf_scores, rng):
    """Choose which deleted original token is inserted first.

    :param gap: original token ids deleted before a kept position
    :param tfidf_scores: TF-IDF of each element of gap (tfidf only)
    """

    if strategy == 'left':
        return gap[0]
    if strategy == 'middle':
        return gap[(len(gap) - 1) // 2]
    if strategy == 'right':
        return gap[-1]
    if strategy == 'random':
        return gap[int(rng.integers(0, len(gap)))]
    if strategy == 'tfidf':
        best = 0
        for i in range(1, len(gap)):
            if tfidf_scores[i] > tfidf_scores[best]:
                best = i
        return gap[best]
    raise CbartError("Unknown insertion strategy '%s', choose one of %s"%
                     (strategy, ', '.join(STRATEGIES)),
                     CbartError.ERROR.USAGE)


def build_decoder_pair(x, labels, original, kept_indices, strategy, tfidf,
                       rng):
    """:returns: (ym, y) for encoder input x and labels"""

    unshifted = masked_sequence(x, labels)
    ym = shift_right(unshifted)

    scores = None
    if strategy == 'tfidf':
        # position p of original is element p - 1 of the interior scores
        scores = [0.0] + tfidf.sentence_scores(original) + [0.0]

    y = []
    for j, (token, label) in enumerate(zip(x, labels)):
        if label == INSERT:
            start, stop = kept_indices[j - 1] + 1, kept_indices[j]
            gap = list(original[start:stop])
            gap_scores = scores[start:stop] if scores is not None else None
            y.append(pick_gold(gap, strategy, gap_scores, rng))
            y.append(token)
        elif label == REPLACE:
            y.append(original[kept_indices[j]])
        else:
            y.append(token)
    return ym, y


def make_instance(original, vocab_size, strategy, rate, tfidf, rng):
    kept = subsample(original, rng)
    x, replaced = apply_replacements(original, kept, rate, rng, vocab_size)
    labels = derive_labels(kept, replaced)
    ym, y = build_decoder_pair(x, labels, original, kept, strategy, tfidf,
                               rng)
    return TrainingInstance(x, labels, ym, y)


def sentence_rng(seed, line_index):
    """Generator of one corpus line, independent of processing order."""

    return np.random.default_rng(np.random.SeedSequence([seed, line_index]))


def make_dataset(corpus, vocab, strategy, instances_per_sentence, rate,
                 seed, tfidf=None, namespace=threadutil.WORKER_NAMESPACE):
    """Yield instances_per_sentence instances for every corpus line, in
    corpus order.

    Lines are processed on the worker pool of namespace; every line uses
    its own generator so the output does not depend on the number of
    workers."""

    if instances_per_sentence < 1:
        raise CbartError("instances per sentence must be >= 1",
                         CbartError.ERROR.USAGE)
    if strategy not in STRATEGIES:
        raise CbartError("Unknown insertion strategy '%s', choose one of %s"%
                         (strategy, ', '.join(STRATEGIES)),
                         CbartError.ERROR.USAGE)
    if strategy == 'tfidf' and tfidf is None:
        from cbart.text import build_tfidf
        tfidf = build_tfidf(corpus, vocab)
    ui = getglobalui()

    def one_line(index, line):
        original = encode(line, vocab)
        check_sentence(original)
        if len(original) < 3:
            ui.debug('synth', "Skipping empty line %d"% index)
            return []
        rng = sentence_rng(seed, index)
        return [make_instance(original, vocab.size, strategy, rate, tfidf,
                              rng)
                for _ in range(instances_per_sentence)]

    for instances in threadutil.parallel_map(one_line, corpus, namespace,
                                             name='synth'):
        for inst in instances:
            yield inst


def write_dataset(instances, path):
    """JSON Lines, fields x, l, ym, y in that order.

    :returns: number of instances written"""

    count = 0
    try:
        with io.open(path, 'wt', encoding='utf-8', newline='\n') as fd:
            for inst in instances:
                fd.write(inst.to_json())
                fd.write(u'\n')
                count += 1
    except (IOError, OSError) as e:
        six.reraise(CbartError,
                    CbartError("Could not write dataset '%s': %s"% (path, e),
                               CbartError.ERROR.RUNTIME),
                    exc_info()[2])
    return count


def read_dataset(path):
    instances = []
    try:
        with io.open(path, 'rt', encoding='utf-8') as fd:
            for lineno, line in enumerate(fd, 1):
                if not line.strip():
                    continue
                try:
                    inst = TrainingInstance.from_json(line)
                except (ValueError, KeyError, TypeError) as e:
                    six.reraise(CbartError,
                                CbartError("Corrupt line %d in dataset "
                                           "'%s': %s"% (lineno, path, e),
                                           CbartError.ERROR.DATA),
                                exc_info()[2])
                try:
                    check_instance(inst)
                except CbartError as e:
                    six.reraise(CbartError,
                                CbartError("Line %d in dataset '%s': %s"%
                                           (lineno, path, e.reason),
                                           CbartError.ERROR.DATA),
                                exc_info()[2])
                instances.append(inst)
    except (IOError, OSError) as e:
        six.reraise(CbartError,
                    CbartError("Could not read dataset '%s': %s"% (path, e),
                               CbartError.ERROR.DATA),
                    exc_info()[2])
    return instances
