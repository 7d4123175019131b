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
import math
import unittest

import numpy as np

from cbart.error import CbartError
from cbart.text import (PAD, UNK, BOS, EOS, MASK, SPECIALS, Vocab,
                        build_vocab, encode, decode, build_tfidf,
                        extract_keywords, eligible_keyword_positions,
                        read_corpus, derive_seed)

from test.CbartTest import CbartTestLib


def setUpModule():
    CbartTestLib.create_test_dir(suffix=__name__)

def tearDownModule():
    CbartTestLib.delete_test_dir()


class TestVocab(unittest.TestCase):

    def test_01_build_order(self):
        """Test build_vocab() frequency order"""
        vocab = build_vocab(["a b a"], 1, 100)
        self.assertEqual(vocab.size, 7)
        self.assertEqual(vocab.id("a"), 5)
        self.assertEqual(vocab.id("b"), 6)
        self.assertEqual(vocab.id_to_token[:5], list(SPECIALS))

    def test_02_min_freq(self):
        vocab = build_vocab(["a b a"], 2, 100)
        self.assertNotIn("b", vocab)
        self.assertEqual(encode("b", vocab), [BOS, UNK, EOS])

    def test_03_max_size(self):
        vocab = build_vocab(["a b a"], 1, 6)
        self.assertEqual(vocab.corpus_tokens(), ["a"])

    def test_04_ties_lexicographic(self):
        vocab = build_vocab(["z y x", "y"], 1, 100)
        self.assertEqual(vocab.corpus_tokens(), ["y", "x", "z"])

    def test_05_empty_corpus(self):
        with self.assertRaises(CbartError) as cm:
            build_vocab([], 1, 100)
        self.assertIn("empty corpus", cm.exception.reason)

    def test_06_specials_never_corpus_tokens(self):
        vocab = build_vocab(["<M> a <S>"], 1, 100)
        self.assertEqual(vocab.corpus_tokens(), ["a"])
        self.assertEqual(encode("<M> a", vocab), [BOS, UNK, 5, EOS])

    def test_07_save_load(self):
        vocab = build_vocab(["the cat sat", "the dog"], 1, 100)
        path = CbartTestLib.path("vocab.txt")
        vocab.save(path)
        lines = CbartTestLib.read_lines("vocab.txt")
        self.assertEqual(lines[:5], ["<PAD>", "<UNK>", "<S>", "</S>", "<M>"])
        loaded = Vocab.load(path)
        self.assertEqual(loaded.id_to_token, vocab.id_to_token)

    def test_08_load_rejects_missing_specials(self):
        path = CbartTestLib.write_lines("bad_vocab.txt", ["a", "b"])
        self.assertRaises(CbartError, Vocab.load, path)


class TestEncoding(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.vocab = build_vocab(["a b a"], 1, 100)

    def test_01_encode(self):
        self.assertEqual(encode("a b", self.vocab), [2, 5, 6, 3])

    def test_02_encode_unknown(self):
        self.assertEqual(encode("a zzz", self.vocab), [2, 5, 1, 3])

    def test_03_roundtrip(self):
        for text in ("a", "a b", "b b a b"):
            self.assertEqual(decode(encode(text, self.vocab), self.vocab),
                             text)

    def test_04_decode_malformed(self):
        self.assertRaises(CbartError, decode, [5, 6, EOS], self.vocab)
        self.assertRaises(CbartError, decode, [BOS, 5, 6], self.vocab)
        self.assertRaises(CbartError, decode, [BOS, MASK, EOS], self.vocab)

    def test_05_read_corpus(self):
        path = CbartTestLib.write_lines("corpus.txt", ["a b", "", "b a"])
        self.assertEqual(read_corpus(path), ["a b", "b a"])

    def test_06_read_missing_corpus(self):
        self.assertRaises(CbartError, read_corpus,
                          CbartTestLib.path("does-not-exist.txt"))


class TestTfIdf(unittest.TestCase):

    def test_01_single_line(self):
        vocab = build_vocab(["a b c"], 1, 100)
        table = build_tfidf(["a b c"], vocab)
        for token in "abc":
            self.assertEqual(table.idf(vocab.id(token)), 0.0)

    def test_02_two_lines(self):
        lines = ["a b", "a c"]
        vocab = build_vocab(lines, 1, 100)
        table = build_tfidf(lines, vocab)
        self.assertAlmostEqual(table.idf(vocab.id("b")), math.log(2), 12)
        self.assertEqual(table.idf(vocab.id("a")), 0.0)

    def test_03_sentence_scores(self):
        lines = ["a b b", "a c"]
        vocab = build_vocab(lines, 1, 100)
        table = build_tfidf(lines, vocab)
        scores = table.sentence_scores(encode("a b b", vocab))
        self.assertEqual(len(scores), 3)
        self.assertEqual(scores[0], 0.0)
        self.assertAlmostEqual(scores[1], 2.0 / 3 * math.log(2), 12)
        self.assertEqual(scores[1], scores[2])

    def test_04_idf_non_negative(self):
        lines = ["a b c", "a b", "a", "d"]
        vocab = build_vocab(lines, 1, 100)
        table = build_tfidf(lines, vocab)
        for token in vocab.corpus_tokens():
            idf = table.idf(vocab.id(token))
            self.assertGreaterEqual(idf, 0.0)
        self.assertGreater(table.idf(vocab.id("a")), 0.0)


class TestKeywords(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.line = "the river crossed ancient valleys beneath quiet mountains"
        cls.vocab = build_vocab([cls.line, "a b"], 1, 100)
        cls.sentence = encode(cls.line, cls.vocab)

    def test_01_eligible(self):
        positions = eligible_keyword_positions(self.sentence, self.vocab)
        words = [self.vocab.token(self.sentence[p]) for p in positions]
        self.assertEqual(words, ["river", "crossed", "ancient", "valleys",
                                 "beneath", "quiet", "mountains"])

    def test_02_all_eligible(self):
        kws = extract_keywords(self.sentence, 7, 3, self.vocab)
        self.assertEqual(kws, self.sentence[2:-1])

    def test_03_seeded_oracle(self):
        """n=2 from five eligible tokens with seed 7"""
        line = "red ship sails over calm blue sea"
        vocab = build_vocab([line], 1, 100)
        sentence = encode(line, vocab)
        eligible = [sentence[p] for p in
                    eligible_keyword_positions(sentence, vocab)]
        self.assertEqual(len(eligible), 6)
        sentence = encode("red ship sails over calm sea", vocab)
        eligible = [sentence[p] for p in
                    eligible_keyword_positions(sentence, vocab)]
        self.assertEqual(len(eligible), 5)
        picked = sorted(int(i) for i in
                        np.random.default_rng(7).choice(5, 2, replace=False))
        expected = [eligible[i] for i in picked]
        self.assertEqual(extract_keywords(sentence, 2, 7, vocab), expected)
        self.assertEqual(extract_keywords(sentence, 2, 7, vocab), expected)

    def test_04_order_preserving(self):
        for seed in range(20):
            kws = extract_keywords(self.sentence, 3, seed, self.vocab)
            it = iter(self.sentence)
            self.assertTrue(all(k in it for k in kws))

    def test_05_insufficient(self):
        sentence = encode("the a b", build_vocab(["the a b"], 1, 100))
        with self.assertRaises(CbartError) as cm:
            extract_keywords(sentence, 1, 0, build_vocab(["the a b"], 1, 100))
        self.assertIn("insufficient keywords", cm.exception.reason)

    def test_06_repeated_surface_token(self):
        vocab = build_vocab(["stone stone river"], 1, 100)
        sentence = encode("stone stone river", vocab)
        self.assertEqual(len(eligible_keyword_positions(sentence, vocab)), 2)

    def test_07_derive_seed(self):
        self.assertEqual(derive_seed(3, 1), derive_seed(3, 1))
        self.assertNotEqual(derive_seed(3, 1), derive_seed(3, 2))
