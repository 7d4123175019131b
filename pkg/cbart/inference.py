# Iterative refinement: label, mask, fill in parallel, repeat
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
from dataclasses import dataclass, asdict
from sys import exc_info

import six
import torch
from torch.nn import functional as F

from cbart import threadutil
from cbart.error import CbartError
from cbart.synthesis import COPY, REPLACE, INSERT, masked_sequence, shift_right
from cbart.text import PAD, BOS, EOS, MASK, UNK, NUM_SPECIALS, derive_seed
from cbart.ui import getglobalui

DECODE_STRATEGIES = ('greedy', 'topk', 'topp')
RANKERS = ('lm', 'decoder')


@dataclass
class DecodeConfig:
    strategy: str = 'greedy'
    k: int = 10
    p: float = 0.9
    num_sequences: int = 1
    theta: float = 2.0
    max_steps: int = 10
    seed: int = 0
    ranker: str = 'lm'
    # divide by theta regardless of the logit sign
    literal_penalty: bool = False
    repetition_penalty: bool = True

    def validate(self):
        if self.strategy not in DECODE_STRATEGIES:
            raise CbartError("strategy must be one of %s"%
                             ', '.join(DECODE_STRATEGIES),
                             CbartError.ERROR.USAGE)
        if self.ranker not in RANKERS:
            raise CbartError("ranker must be one of %s"% ', '.join(RANKERS),
                             CbartError.ERROR.USAGE)
        if self.k < 1:
            raise CbartError("k must be >= 1", CbartError.ERROR.USAGE)
        if not 0 < self.p <= 1:
            raise CbartError("p must be in (0, 1]", CbartError.ERROR.USAGE)
        if self.num_sequences < 1:
            raise CbartError("num_sequences must be >= 1",
                             CbartError.ERROR.USAGE)
        if self.theta < 1:
            raise CbartError("theta must be >= 1", CbartError.ERROR.USAGE)
        if self.max_steps < 1:
            raise CbartError("max_steps must be >= 1", CbartError.ERROR.USAGE)
        return self

    def to_dict(self):
        return asdict(self)


class RefinementState(object):
    """Encoder input X^r of one chain and its keyword flags."""

    def __init__(self, x, protected):
        if len(x) != len(protected):
            raise CbartError("protected flags do not cover the input",
                             CbartError.ERROR.RUNTIME)
        self.x = list(x)
        self.protected = list(protected)
        self.steps = 0
        self.prev_output = None
        self.decoder_passes = 0
        # -log p of the slots filled by the latest decoder pass
        self.last_nll = 0.0
        self.hidden = None

    def keywords(self):
        return [t for t, prot in zip(self.x, self.protected) if prot]


class GenerationResult(object):
    def __init__(self, sentence, steps, decoder_passes, nll=None, chain=0):
        self.sentence = list(sentence)
        self.steps = steps
        self.decoder_passes = decoder_passes
        self.nll = nll
        self.chain = chain
        self.text = None

    def __repr__(self):
        return "<GenerationResult chain %d, %d steps: %s>"% (
            self.chain, self.steps, self.sentence)


def init_input(keywords):
    """x_0 = <S> keywords </S>, keywords protected."""

    keywords = list(keywords)
    if not keywords:
        raise CbartError("empty keywords", CbartError.ERROR.DATA)
    for k in keywords:
        if k < NUM_SPECIALS:
            raise CbartError("keyword id %d is a special token"% k,
                             CbartError.ERROR.DATA)
    return RefinementState([BOS] + keywords + [EOS],
                           [False] + [True] * len(keywords) + [False])


def encode_state(state, model):
    """Encoder pass over X^r; the hidden states are kept on state for the
    decoder pass of the same step.

    :returns: label logits, n x 3"""

    x = torch.tensor([state.x], dtype=torch.long,
                     device=model.tok_embed.weight.device)
    with torch.no_grad():
        hidden, label_logits = model.encoder_forward(x)
    state.hidden = hidden
    return label_logits[0]


def labels_from_logits(label_logits, protected):
    """Argmax (ties to the lower label id) with keyword protection: no
    keyword, <S> or </S> may be replaced, nothing is inserted before
    <S>."""

    labels = [int(i) for i in torch.argmax(label_logits, dim=-1)]
    last = len(labels) - 1
    for pos, label in enumerate(labels):
        if pos == 0:
            labels[pos] = COPY
        elif label == REPLACE and (protected[pos] or pos == last):
            labels[pos] = COPY
    return labels


def predict_labels(state, model):
    return labels_from_logits(encode_state(state, model), state.protected)


def build_masked_input(state, labels):
    """:returns: (ym, mask_positions, next_protected); mask positions and
              flags are in unshifted output coordinates"""

    if len(labels) != len(state.x):
        raise CbartError("labels do not cover the input",
                         CbartError.ERROR.RUNTIME)
    unshifted = masked_sequence(state.x, labels)
    next_protected = []
    for prot, label in zip(state.protected, labels):
        if label == INSERT:
            next_protected.extend((False, prot))
        elif label == REPLACE:
            next_protected.append(False)
        else:
            next_protected.append(prot)
    mask_positions = [t for t, tok in enumerate(unshifted) if tok == MASK]
    return shift_right(unshifted), mask_positions, next_protected


def apply_repetition_penalty(logits, ym_tokens, theta, literal=False):
    """Discount the logits of the non-special tokens of ym_tokens.

    Positive logits are divided by theta, negative ones multiplied,
    unless literal is set (then all are divided)."""

    logits = logits.clone()
    ids = sorted(t for t in set(ym_tokens) if t >= NUM_SPECIALS)
    if not ids or theta == 1:
        return logits
    index = torch.tensor(ids, dtype=torch.long, device=logits.device)
    h = logits[index]
    if literal:
        logits[index] = h / theta
    else:
        logits[index] = torch.where(h > 0, h / theta, h * theta)
    return logits


def _sorted_ids(probs):
    # descending, equal probabilities keep the lower id first
    return torch.sort(probs, descending=True, stable=True)


def top_k_filter(probs, k):
    """:returns: ids of the k most probable tokens, most probable first"""

    _, order = _sorted_ids(probs)
    return order[:min(k, probs.numel())]


def top_p_filter(probs, p):
    """:returns: the shortest most-probable-first prefix of ids whose
              cumulative probability reaches p"""

    values, order = _sorted_ids(probs)
    if p >= 1:
        return order
    count = int((torch.cumsum(values, dim=0) < p).sum()) + 1
    return order[:min(count, probs.numel())]


def slot_distribution(logits, ym, cfg):
    """Penalised distribution of one mask slot; special tokens get
    probability zero."""

    if cfg.repetition_penalty:
        logits = apply_repetition_penalty(logits, ym, cfg.theta,
                                          cfg.literal_penalty)
    logits = logits.to(torch.float64, copy=True)
    logits[:NUM_SPECIALS] = -math.inf
    return F.softmax(logits, dim=-1)


def choose_token(probs, cfg, generator=None):
    if cfg.strategy == 'greedy':
        return int(torch.argmax(probs))
    if cfg.strategy == 'topk':
        support = top_k_filter(probs, cfg.k)
    else:
        support = top_p_filter(probs, cfg.p)
    weights = probs[support]
    weights = weights / weights.sum()
    drawn = torch.multinomial(weights, 1, generator=generator)
    return int(support[int(drawn)])


def fill_masks(state, ym, mask_positions, model, cfg, generator=None):
    """One decoder pass; every mask slot is resolved from it, the other
    slots copy their decoder input.

    :returns: the candidate output sentence"""

    device = model.tok_embed.weight.device
    if state.hidden is None:
        encode_state(state, model)
    ym_t = torch.tensor([ym], dtype=torch.long, device=device)
    x_t = torch.tensor([state.x], dtype=torch.long, device=device)
    with torch.no_grad():
        logits = model.decoder_forward(ym_t, state.hidden, x_t.eq(PAD))[0]
    state.decoder_passes += 1

    output = list(ym[1:]) + [EOS]
    nll = 0.0
    for t in mask_positions:
        probs = slot_distribution(logits[t], ym, cfg)
        token = choose_token(probs, cfg, generator)
        nll -= math.log(max(float(probs[token]), 1e-300))
        output[t] = token
    state.last_nll = nll
    return output


def refine(keywords, model, cfg, generator=None, chain=0):
    """Refine keywords into a sentence.

    Stops when a step reproduces the previous output, when every label
    is Copy, or after cfg.max_steps steps."""

    ui = getglobalui()
    state = init_input(keywords)
    max_positions = model.config.max_positions
    if len(state.x) > max_positions:
        raise CbartError("length overflow: %d keywords do not fit "
                         "max_positions %d"% (len(keywords), max_positions),
                         CbartError.ERROR.USAGE)
    if generator is None:
        generator = torch.Generator().manual_seed(
            chain_seed(cfg.seed, chain))

    while state.steps < cfg.max_steps:
        labels = predict_labels(state, model)
        if all(l == COPY for l in labels):
            ui.debug('refine', "chain %d: all labels Copy after %d steps"%
                     (chain, state.steps))
            break
        ym, mask_positions, next_protected = build_masked_input(state,
                                                                labels)
        if len(ym) > max_positions:
            ui.warn("chain %d: refinement stopped, %d tokens exceed "
                    "max_positions %d"% (chain, len(ym), max_positions))
            break
        output = fill_masks(state, ym, mask_positions, model, cfg,
                            generator)
        state.steps += 1
        ui.debug('refine', "chain %d step %d: %s"% (chain, state.steps,
                                                    output))
        state.x = output
        state.protected = next_protected
        state.hidden = None
        if output == state.prev_output:
            break
        state.prev_output = output

    return GenerationResult(state.x, state.steps, state.decoder_passes,
                            state.last_nll, chain)


def chain_seed(seed, chain):
    return derive_seed(seed, chain)


def lm_nll(lm, sentence):
    return lm.nll(sentence)


def generate_ranked(keywords, model, cfg, lm=None,
                    namespace=threadutil.WORKER_NAMESPACE):
    """Run cfg.num_sequences chains and return the one with the lowest
    NLL, the lowest chain index on ties."""

    cfg.validate()
    n = cfg.num_sequences
    # a single chain needs no ranking
    if cfg.ranker == 'lm' and lm is None and n > 1:
        raise CbartError("ranker 'lm' requires an LM checkpoint",
                         CbartError.ERROR.USAGE)

    def one_chain(index, seed):
        gen = torch.Generator().manual_seed(seed)
        result = refine(keywords, model, cfg, gen, chain=index)
        if cfg.ranker == 'lm':
            result.nll = lm_nll(lm, result.sentence) if lm is not None \
                else None
        return result

    seeds = [chain_seed(cfg.seed, i) for i in range(n)]
    results = threadutil.parallel_map(one_chain, seeds, namespace,
                                      name='chain')
    best = results[0]
    for result in results[1:]:
        if result.nll < best.nll:
            best = result
    return best


def read_constraints(path, vocab):
    """One case per line, keywords separated by tabs.

    :returns: list of (keyword strings, keyword ids)"""

    cases = []
    try:
        with io.open(path, 'rt', encoding='utf-8') as fd:
            for lineno, line in enumerate(fd, 1):
                line = line.rstrip(u'\r\n')
                if not line.strip():
                    continue
                words = line.split(u'\t')
                ids = []
                for word in words:
                    if not word or word.strip() != word or len(word.split()) != 1:
                        raise CbartError("Bad keyword '%s' on line %d of "
                                         "'%s'"% (word, lineno, path),
                                         CbartError.ERROR.DATA)
                    token_id = vocab.id(word)
                    if token_id == UNK or token_id < NUM_SPECIALS:
                        raise CbartError("Keyword '%s' on line %d of '%s' "
                                         "is not in the vocabulary"%
                                         (word, lineno, path),
                                         CbartError.ERROR.DATA)
                    ids.append(token_id)
                cases.append((words, ids))
    except (IOError, OSError) as e:
        six.reraise(CbartError,
                    CbartError("Could not read constraints '%s': %s"%
                               (path, e), CbartError.ERROR.DATA),
                    exc_info()[2])
    return cases

