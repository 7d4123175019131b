# Quality and diversity metrics of generated sentences
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

"""All metrics take sentences as lists of token strings (no <S>/</S>)."""

import io
import json
import math
from collections import Counter, OrderedDict
from dataclasses import dataclass, asdict
from sys import exc_info

import six
import torch

from cbart.error import CbartError
from cbart.synthesis import ACTION_NAMES
from cbart.model import Batch, IGNORE
from cbart.ui import getglobalui

NIST_BETA = math.log(0.5) / math.log(1.5) ** 2
REPETITION_WINDOW = 20
SENTENCE_EPSILON = 1e-9
BREAKDOWN_SIZES = range(1, 7)


def ngrams(seg, n):
    c = Counter()
    for i in range(len(seg) - n + 1):
        c[tuple(seg[i:i + n])] += 1
    return c


def card(c):
    """Cardinality of a multiset."""
    return sum(c.values())


def _check_aligned(hypotheses, references):
    if not hypotheses:
        raise CbartError("empty hypothesis set", CbartError.ERROR.DATA)
    if len(hypotheses) != len(references):
        raise CbartError("mismatched counts: %d hypotheses, %d references"%
                         (len(hypotheses), len(references)),
                         CbartError.ERROR.DATA)


def corpus_bleu(hypotheses, references, max_n=4):
    """Cumulative corpus BLEU, single reference, no smoothing."""

    _check_aligned(hypotheses, references)
    guess, match = Counter(), Counter()
    hyplen = reflen = 0
    for hyp, ref in zip(hypotheses, references):
        for n in range(1, max_n + 1):
            h = ngrams(hyp, n)
            guess[n] += card(h)
            match[n] += card(h & ngrams(ref, n))
        hyplen += len(hyp)
        reflen += len(ref)

    if hyplen == 0:
        return 0.0
    logsum = 0.0
    for n in range(1, max_n + 1):
        if match[n] == 0:
            return 0.0
        logsum += math.log(float(match[n]) / guess[n])
    bleu = math.exp(logsum / max_n)
    if hyplen < reflen:
        bleu *= math.exp(1 - float(reflen) / hyplen)
    return bleu


def nist_information(references, max_n):
    """info(w1..wn) = log2(count(w1..wn-1) / count(w1..wn)) over the
    references; the empty prefix counts every reference token."""

    counts = Counter()
    total = 0
    for ref in references:
        total += len(ref)
        for n in range(1, max_n + 1):
            counts.update(ngrams(ref, n))
    info = {}
    for gram, c in counts.items():
        prefix = counts[gram[:-1]] if len(gram) > 1 else total
        info[gram] = math.log(float(prefix) / c, 2)
    return info


def corpus_nist(hypotheses, references, max_n=4):
    _check_aligned(hypotheses, references)
    info = nist_information(references, max_n)
    score = 0.0
    for n in range(1, max_n + 1):
        gained = 0.0
        guess = 0
        for hyp, ref in zip(hypotheses, references):
            h = ngrams(hyp, n)
            guess += card(h)
            for gram, c in (h & ngrams(ref, n)).items():
                gained += info[gram] * c
        if guess:
            score += gained / guess
    hyplen = sum(len(h) for h in hypotheses)
    reflen = sum(len(r) for r in references)
    if reflen == 0:
        return 0.0
    ratio = min(float(hyplen) / reflen, 1.0)
    if ratio <= 0:
        return 0.0
    return score * math.exp(NIST_BETA * math.log(ratio) ** 2)


def sentence_bleu(hyp, refs, max_n=4):
    """BLEU of one sentence against several references: counts are
    clipped by the largest count in any reference, the brevity penalty
    uses the closest reference length (the shorter one on ties). A zero
    precision counts as SENTENCE_EPSILON."""

    if not hyp:
        return 0.0
    logsum = 0.0
    for n in range(1, max_n + 1):
        h = ngrams(hyp, n)
        guess = card(h)
        maxref = Counter()
        for ref in refs:
            maxref |= ngrams(ref, n)
        precision = float(card(h & maxref)) / guess if guess else 0.0
        logsum += math.log(max(precision, SENTENCE_EPSILON))
    bleu = math.exp(logsum / max_n)
    closest = min((len(r) for r in refs),
                  key=lambda l: (abs(l - len(hyp)), l))
    if len(hyp) < closest:
        bleu *= math.exp(1 - float(closest) / len(hyp))
    return bleu


def self_bleu(sentences, n=4):
    """Mean BLEU of each sentence against all the others."""

    if len(sentences) < 2:
        raise CbartError("self_bleu needs at least 2 sentences",
                         CbartError.ERROR.DATA)
    total = 0.0
    for i, hyp in enumerate(sentences):
        refs = sentences[:i] + sentences[i + 1:]
        total += sentence_bleu(hyp, refs, n)
    return total / len(sentences)


def distinct_n(sentences, n):
    if not sentences:
        raise CbartError("distinct_n needs at least 1 sentence",
                         CbartError.ERROR.DATA)
    unique = set()
    tokens = 0
    for s in sentences:
        unique.update(ngrams(s, n))
        tokens += len(s)
    if tokens == 0:
        return 0.0
    return float(len(unique)) / tokens


def repetition_flag(sentence):
    """Some word three times or some trigram twice within the first 20
    tokens."""

    head = list(sentence[:REPETITION_WINDOW])
    if any(c >= 3 for c in ngrams(head, 1).values()):
        return True
    return any(c >= 2 for c in ngrams(head, 3).values())


def covers(output, keywords):
    """True iff keywords occur in output as an ordered subsequence."""

    it = iter(output)
    return all(any(tok == k for tok in it) for k in keywords)


def keyword_coverage(outputs, keyword_sets):
    if len(outputs) != len(keyword_sets):
        raise CbartError("mismatched counts: %d outputs, %d keyword sets"%
                         (len(outputs), len(keyword_sets)),
                         CbartError.ERROR.DATA)
    if not outputs:
        return 0.0
    hit = sum(1 for o, k in zip(outputs, keyword_sets) if covers(o, k))
    return float(hit) / len(outputs)


@dataclass
class MetricReport:
    bleu2: float
    bleu4: float
    nist2: float
    nist4: float
    self_bleu4: float
    distinct2: float
    distinct4: float
    repetition_rate: float
    keyword_coverage: float
    mean_length: float
    cases: int = 0

    def as_rows(self):
        return [(k, v) for k, v in asdict(self).items() if k != 'cases']


def report(outputs, references, keyword_sets):
    """MetricReport of tokenized outputs against aligned references."""

    _check_aligned(outputs, references)
    if len(outputs) >= 2:
        sb = self_bleu(outputs, 4)
    else:
        getglobalui().warn("Self-BLEU needs at least 2 generations, "
                           "reporting 0")
        sb = 0.0
    return MetricReport(
        bleu2=corpus_bleu(outputs, references, 2),
        bleu4=corpus_bleu(outputs, references, 4),
        nist2=corpus_nist(outputs, references, 2),
        nist4=corpus_nist(outputs, references, 4),
        self_bleu4=sb,
        distinct2=distinct_n(outputs, 2),
        distinct4=distinct_n(outputs, 4),
        repetition_rate=float(sum(1 for o in outputs if repetition_flag(o)))
                        / len(outputs),
        keyword_coverage=keyword_coverage(outputs, keyword_sets),
        mean_length=float(sum(len(o) for o in outputs)) / len(outputs),
        cases=len(outputs))


def evaluate(generations, references):
    """:param generations: records as written by generate (keywords,
                           output, ...)
    :param references: reference sentences, aligned with generations
    :returns: (MetricReport over all cases, OrderedDict constraint count
              -> MetricReport for the counts 1..6 that occur)"""

    outputs = [g['output'].split() for g in generations]
    refs = [r.split() for r in references]
    keywords = [list(g['keywords']) for g in generations]
    overall = report(outputs, refs, keywords)
    breakdown = OrderedDict()
    for size in BREAKDOWN_SIZES:
        picked = [i for i, k in enumerate(keywords) if len(k) == size]
        if picked:
            breakdown[size] = report([outputs[i] for i in picked],
                                     [refs[i] for i in picked],
                                     [keywords[i] for i in picked])
    return overall, breakdown


def read_generations(path):
    records = []
    try:
        with io.open(path, 'rt', encoding='utf-8') as fd:
            for lineno, line in enumerate(fd, 1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    record['output'], record['keywords']
                except (ValueError, KeyError, TypeError) as e:
                    six.reraise(CbartError,
                                CbartError("Corrupt line %d in generations "
                                           "'%s': %s"% (lineno, path, e),
                                           CbartError.ERROR.DATA),
                                exc_info()[2])
                records.append(record)
    except (IOError, OSError) as e:
        six.reraise(CbartError,
                    CbartError("Could not read generations '%s': %s"%
                               (path, e), CbartError.ERROR.DATA),
                    exc_info()[2])
    return records


def classifier_report(model, instances, batch_size=32):
    """Precision, recall and F1 of the action classifier against the
    gold labels of instances.

    :returns: OrderedDict label name -> dict(precision, recall, f1,
              support)"""

    tp, predicted, gold = Counter(), Counter(), Counter()
    model.eval()
    with torch.no_grad():
        for start in range(0, len(instances), batch_size):
            batch = Batch(instances[start:start + batch_size])
            _, logits = model.encoder_forward(batch.x)
            pred = torch.argmax(logits, dim=-1)
            valid = batch.labels.ne(IGNORE)
            for p, g in zip(pred[valid].tolist(),
                            batch.labels[valid].tolist()):
                predicted[p] += 1
                gold[g] += 1
                if p == g:
                    tp[p] += 1
    result = OrderedDict()
    for label, name in enumerate(ACTION_NAMES):
        precision = float(tp[label]) / predicted[label] \
            if predicted[label] else 0.0
        recall = float(tp[label]) / gold[label] if gold[label] else 0.0
        f1 = 2 * precision * recall / (precision + recall) \
            if precision + recall else 0.0
        result[name] = {'precision': precision, 'recall': recall, 'f1': f1,
                        'support': gold[label]}
    return result


def write_report(path, overall, breakdown, classifier=None):
    """UTF-8 TSV: metric rows, then the constraint-count breakdown and,
    when given, the classifier rows."""

    lines = [u"metric\tvalue"]
    for name, value in overall.as_rows():
        lines.append(u"%s\t%.6f"% (name, value))
    lines.append(u"")
    lines.append(u"constraints\tcases\tbleu2\tbleu4\tdistinct2\tdistinct4"
                 u"\trepetition_rate\tkeyword_coverage")
    for size, rep in breakdown.items():
        lines.append(u"%d\t%d\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f"%
                     (size, rep.cases, rep.bleu2, rep.bleu4, rep.distinct2,
                      rep.distinct4, rep.repetition_rate,
                      rep.keyword_coverage))
    if classifier:
        lines.append(u"")
        lines.append(u"label\tprecision\trecall\tf1\tsupport")
        for name, row in classifier.items():
            lines.append(u"%s\t%.6f\t%.6f\t%.6f\t%d"%
                         (name, row['precision'], row['recall'], row['f1'],
                          row['support']))
    try:
        with io.open(path, 'wt', encoding='utf-8', newline='\n') as fd:
            fd.write(u"\n".join(lines) + u"\n")
    except (IOError, OSError) as e:
        six.reraise(CbartError,
                    CbartError("Could not write report '%s': %s"% (path, e),
                               CbartError.ERROR.RUNTIME),
                    exc_info()[2])
    return path
