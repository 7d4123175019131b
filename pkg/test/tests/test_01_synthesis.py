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
import unittest

import numpy as np

from cbart.error import CbartError
from cbart.synthesis import (COPY, REPLACE, INSERT, TrainingInstance,
                             subsample, apply_replacements, derive_labels,
                             build_decoder_pair, masked_sequence, shift_right,
                             make_instance, make_dataset, write_dataset,
                             read_dataset, check_instance, replacement_count,
                             sentence_rng)
from cbart.text import BOS, EOS, MASK, TfIdfTable, build_vocab, encode
from cbart import threadutil

from test.CbartTest import CbartTestLib, toy_corpus


def setUpModule():
    CbartTestLib.create_test_dir(suffix=__name__)

def tearDownModule():
    CbartTestLib.delete_test_dir()


class FixedRng(object):
    """Stands in for a numpy Generator with pre-arranged answers."""

    def __init__(self, integers=(), choices=()):
        self._integers = list(integers)
        self._choices = list(choices)

    def integers(self, low, high=None):
        return self._integers.pop(0)

    def choice(self, n, size, replace=True):
        return np.array(self._choices.pop(0))


# <S> A B C D E F G H I </S> with A=5 ... I=13, K=14
A, B, C, D, E, F, G, H, I, K = range(5, 15)
ORIGINAL = [BOS, A, B, C, D, E, F, G, H, I, EOS]
KEPT = [0, 6, 7, 8, 9, 10]


class TestWorkedExample(unittest.TestCase):
    """<S> A..I </S>: keep F G H I, replace H by K."""

    def setUp(self):
        self.x = [BOS, F, G, K, I, EOS]
        self.replaced = [False, False, False, True, False, False]
        self.labels = derive_labels(KEPT, self.replaced)

    def test_01_subsample(self):
        rng = FixedRng(integers=[4], choices=[[5, 7, 8, 6]])
        self.assertEqual(subsample(ORIGINAL, rng), KEPT)

    def test_02_replacement(self):
        # eligible kept positions are G, H and I
        rng = FixedRng(integers=[K - 5 - 1], choices=[[1]])
        x, replaced = apply_replacements(ORIGINAL, KEPT, 0.34, rng, 20)
        self.assertEqual(x, self.x)
        self.assertEqual(replaced, self.replaced)

    def test_03_labels(self):
        self.assertEqual(self.labels, [0, 2, 0, 1, 0, 0])

    def test_04_decoder_input(self):
        ym, _ = build_decoder_pair(self.x, self.labels, ORIGINAL, KEPT,
                                   'left', None, None)
        self.assertEqual(ym, [EOS, BOS, MASK, F, G, MASK, I])

    def _target(self, strategy, tfidf=None, rng=None):
        _, y = build_decoder_pair(self.x, self.labels, ORIGINAL, KEPT,
                                  strategy, tfidf, rng)
        return y

    def test_05_left(self):
        self.assertEqual(self._target('left'), [BOS, A, F, G, H, I, EOS])

    def test_06_middle(self):
        self.assertEqual(self._target('middle'), [BOS, C, F, G, H, I, EOS])

    def test_07_right(self):
        self.assertEqual(self._target('right'), [BOS, E, F, G, H, I, EOS])

    def test_08_tfidf(self):
        # B occurs in one of four documents, everything else in more
        doc_freq = dict((t, 4) for t in range(5, 15))
        doc_freq.update({B: 1, D: 2})
        table = TfIdfTable(4, doc_freq)
        self.assertEqual(self._target('tfidf', table),
                         [BOS, B, F, G, H, I, EOS])

    def test_09_random(self):
        y = self._target('random', rng=FixedRng(integers=[3]))
        self.assertEqual(y, [BOS, D, F, G, H, I, EOS])
        for seed in range(10):
            y = self._target('random', rng=np.random.default_rng(seed))
            self.assertIn(y[1], (A, B, C, D, E))

    def test_10_tfidf_ties_leftmost(self):
        table = TfIdfTable(4, dict((t, 2) for t in range(5, 15)))
        self.assertEqual(self._target('tfidf', table)[1], A)

    def test_11_instance_invariants(self):
        ym, y = build_decoder_pair(self.x, self.labels, ORIGINAL, KEPT,
                                   'middle', None, None)
        check_instance(TrainingInstance(self.x, self.labels, ym, y))


class TestSynthesisSteps(unittest.TestCase):

    def test_01_keep_all(self):
        rng = FixedRng(integers=[3], choices=[[2, 0, 1]])
        self.assertEqual(subsample([BOS, 5, 6, 7, EOS], rng), [0, 1, 2, 3, 4])

    def test_02_keep_one(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            kept = subsample(ORIGINAL, rng)
            self.assertEqual(kept[0], 0)
            self.assertEqual(kept[-1], len(ORIGINAL) - 1)
            self.assertEqual(kept, sorted(set(kept)))
        rng = FixedRng(integers=[1], choices=[[4]])
        self.assertEqual(len(subsample(ORIGINAL, rng)), 3)

    def test_03_rate_zero(self):
        x, replaced = apply_replacements(ORIGINAL, KEPT, 0.0,
                                         np.random.default_rng(0), 20)
        self.assertEqual(x, [ORIGINAL[i] for i in KEPT])
        self.assertFalse(any(replaced))

    def test_04_rounding(self):
        self.assertEqual(replacement_count(0.15, 4), 1)
        self.assertEqual(replacement_count(0.15, 3), 0)
        self.assertEqual(replacement_count(0.5, 3), 2)

    def test_05_replacement_differs(self):
        kept = list(range(len(ORIGINAL)))
        for seed in range(30):
            x, replaced = apply_replacements(ORIGINAL, kept, 0.5,
                                             np.random.default_rng(seed), 16)
            for j, flag in enumerate(replaced):
                if flag:
                    self.assertNotEqual(x[j], ORIGINAL[j])
                    self.assertGreaterEqual(x[j], 5)
                    self.assertLess(x[j], 16)
                else:
                    self.assertEqual(x[j], ORIGINAL[j])
            self.assertEqual(sum(replaced), 5)

    def test_06_tiny_vocab(self):
        kept = list(range(len(ORIGINAL)))
        self.assertRaises(CbartError, apply_replacements, ORIGINAL, kept,
                          0.5, np.random.default_rng(0), 6)

    def test_07_eos_insert(self):
        kept = [0, 1, 2, 10]
        labels = derive_labels(kept, [False] * 4)
        self.assertEqual(labels, [COPY, COPY, COPY, INSERT])

    def test_08_contiguous(self):
        self.assertEqual(derive_labels([0, 1, 2, 3], [False] * 4),
                         [COPY] * 4)

    def test_09_shift(self):
        self.assertEqual(shift_right([BOS, 5, EOS]), [EOS, BOS, 5])
        self.assertEqual(masked_sequence([BOS, 5, 6, EOS],
                                         [COPY, INSERT, REPLACE, COPY]),
                         [BOS, MASK, 5, MASK, EOS])

    def test_10_unknown_strategy(self):
        x = [BOS, F, G, K, I, EOS]
        labels = [0, 2, 0, 1, 0, 0]
        self.assertRaises(CbartError, build_decoder_pair, x, labels,
                          ORIGINAL, KEPT, 'longest', None, None)

    def test_11_fuzz_invariants(self):
        """Every instance is well formed and its gold inserts come from
        their gap"""
        for seed in range(40):
            rng = np.random.default_rng(seed)
            length = int(rng.integers(1, 12))
            original = [BOS] + [int(t) for t in
                                rng.integers(5, 30, size=length)] + [EOS]
            for strategy in ('left', 'middle', 'right', 'random'):
                kept = subsample(original, rng)
                x, replaced = apply_replacements(original, kept, 0.3, rng, 30)
                labels = derive_labels(kept, replaced)
                ym, y = build_decoder_pair(x, labels, original, kept,
                                           strategy, None, rng)
                check_instance(TrainingInstance(x, labels, ym, y))
                slot = 0
                for j, label in enumerate(labels):
                    if label == INSERT:
                        gap = original[kept[j - 1] + 1:kept[j]]
                        self.assertIn(y[slot], gap)
                        slot += 1
                    slot += 1

    def test_12_left_reconstruction(self):
        """Repeatedly filling the left gold converges to the original"""
        rng = np.random.default_rng(5)
        original = [BOS] + list(range(5, 15)) + [EOS]
        kept = subsample(original, rng)
        for step in range(len(original)):
            labels = derive_labels(kept, [False] * len(kept))
            if all(l == COPY for l in labels):
                break
            grown = []
            for j, label in enumerate(labels):
                if label == INSERT:
                    grown.append(kept[j - 1] + 1)
                grown.append(kept[j])
            kept = grown
        self.assertEqual([original[i] for i in kept], original)


class TestDataset(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.corpus = toy_corpus(6)
        cls.vocab = build_vocab(cls.corpus, 1, 1000)

    def tearDown(self):
        threadutil.init_instance_limit(threadutil.WORKER_NAMESPACE, 1)

    def test_01_per_sentence(self):
        instances = list(make_dataset(self.corpus, self.vocab, 'left', 10,
                                      0.15, 1))
        self.assertEqual(len(instances), 60)
        for inst in instances:
            check_instance(inst)

    def test_02_file_determinism(self):
        a = CbartTestLib.path("a.jsonl")
        b = CbartTestLib.path("b.jsonl")
        write_dataset(make_dataset(self.corpus, self.vocab, 'tfidf', 3, 0.15,
                                   9), a)
        threadutil.init_instance_limit(threadutil.WORKER_NAMESPACE, 4)
        write_dataset(make_dataset(self.corpus, self.vocab, 'tfidf', 3, 0.15,
                                   9), b)
        with open(a, 'rb') as fa, open(b, 'rb') as fb:
            self.assertEqual(fa.read(), fb.read())

    def test_03_json_layout(self):
        path = CbartTestLib.path("c.jsonl")
        count = write_dataset(make_dataset(self.corpus[:1], self.vocab,
                                           'right', 2, 0.15, 0), path)
        self.assertEqual(count, 2)
        line = CbartTestLib.read_lines("c.jsonl")[0]
        self.assertTrue(line.startswith('{"x":['))
        self.assertLess(line.index('"l"'), line.index('"ym"'))
        self.assertLess(line.index('"ym"'), line.index('"y"'))
        self.assertNotIn('.', line)
        self.assertEqual(read_dataset(path)[0].to_json(), line)

    def test_04_keep_all_no_corruption(self):
        original = encode(self.corpus[0], self.vocab)
        rng = FixedRng(integers=[len(original) - 2],
                       choices=[list(range(len(original) - 2))])
        inst = make_instance(original, self.vocab.size, 'left', 0.0, None,
                             rng)
        self.assertEqual(inst.l, [COPY] * len(original))
        self.assertEqual(inst.y, original)
        self.assertEqual(inst.ym[1:] + [EOS], original)

    def test_05_corrupt_dataset(self):
        path = CbartTestLib.write_lines("bad.jsonl", ['{"x": [2, 3]'])
        self.assertRaises(CbartError, read_dataset, path)

    def test_05b_malformed_instances(self):
        good = make_instance(encode(self.corpus[0], self.vocab),
                             self.vocab.size, 'left', 0.15, None,
                             np.random.default_rng(1)).to_json()
        cases = [
            ('{"x":[2,5,6,3],"l":[0,0],"ym":[3,2,5,6],"y":[2,5,6,3]}',
             "|x| != |l|"),
            ('{"x":[2,5,3],"l":[0,0,0],"ym":[3,2,5],"y":[2,5,4]}',
             "y is not a clean sentence"),
            ('{"x":[2,5,3],"l":[0,7,0],"ym":[3,2,5],"y":[2,5,3]}',
             "unknown label"),
        ]
        for bad, problem in cases:
            path = CbartTestLib.write_lines("bad.jsonl", [good, bad])
            with self.assertRaises(CbartError) as cm:
                read_dataset(path)
            self.assertIn("Line 2", cm.exception.reason)
            self.assertIn(problem, cm.exception.reason)
            self.assertEqual(cm.exception.severity, CbartError.ERROR.DATA)

    def test_06_unknown_strategy(self):
        self.assertRaises(CbartError, list,
                          make_dataset(self.corpus, self.vocab, 'longest', 1,
                                       0.15, 0))

    def test_07_sentence_rng(self):
        a = sentence_rng(4, 2).integers(0, 1 << 30, size=4)
        b = sentence_rng(4, 2).integers(0, 1 << 30, size=4)
        self.assertEqual(list(a), list(b))
