# Encoder-decoder transformer with the token-level action classifier
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
from dataclasses import dataclass, asdict, fields

import torch
import torch.nn as nn
from torch.nn import functional as F

from cbart.error import CbartError
from cbart.text import PAD, MASK

NUM_LABELS = 3
IGNORE = -100

OBJECTIVES = ('lm', 'mlm')

# Architecture presets for the model-size axis; explicit keys win.
MODEL_SIZES = {
    'base': dict(n_layer=2, n_head=4, d_model=128, d_ff=512),
    'large': dict(n_layer=4, n_head=8, d_model=256, d_ff=1024),
}


@dataclass
class ModelConfig:
    n_layer: int = 2
    n_head: int = 4
    d_model: int = 128
    d_ff: int = 512
    vocab_size: int = 0
    max_positions: int = 128
    dropout: float = 0.1
    objective: str = 'lm'
    causal_mask: bool = True
    alpha: float = 1.0
    # 0 selects a single linear layer over the encoder
    classifier_hidden: int = 0

    def validate(self):
        if self.d_model % self.n_head != 0:
            raise CbartError("d_model must be divisible by n_head",
                             CbartError.ERROR.USAGE)
        if not 0 <= self.dropout < 1:
            raise CbartError("dropout must be in [0, 1)",
                             CbartError.ERROR.USAGE)
        if self.alpha <= 0:
            raise CbartError("alpha must be > 0", CbartError.ERROR.USAGE)
        if self.objective not in OBJECTIVES:
            raise CbartError("objective must be one of %s"%
                             ', '.join(OBJECTIVES), CbartError.ERROR.USAGE)
        for name in ('n_layer', 'n_head', 'd_model', 'd_ff',
                     'max_positions', 'vocab_size'):
            if getattr(self, name) < 1:
                raise CbartError("%s must be >= 1"% name,
                                 CbartError.ERROR.USAGE)
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = set(f.name for f in fields(cls))
        return cls(**dict((k, v) for k, v in d.items() if k in names))


class MultiHeadAttention(nn.Module):

    def __init__(self, d_model, n_head, dropout):
        super().__init__()
        self.n_head = n_head
        self.head_dim = d_model // n_head
        self.wq = nn.Linear(d_model, d_model)
        self.wk = nn.Linear(d_model, d_model)
        self.wv = nn.Linear(d_model, d_model)
        self.wo = nn.Linear(d_model, d_model)
        self.attn_dropout = nn.Dropout(dropout)

    def forward(self, query, key, key_pad_mask, causal=False):
        B, T, E = query.shape
        S = key.size(1)
        q = self.wq(query).view(B, T, self.n_head, self.head_dim).transpose(1, 2)
        k = self.wk(key).view(B, S, self.n_head, self.head_dim).transpose(1, 2)
        v = self.wv(key).view(B, S, self.n_head, self.head_dim).transpose(1, 2)

        scores = torch.matmul(q, k.transpose(-2, -1)) / math.sqrt(self.head_dim)
        blocked = key_pad_mask[:, None, None, :]
        if causal:
            future = torch.ones(T, S, dtype=torch.bool,
                                device=query.device).triu(diagonal=1)
            blocked = blocked | future[None, None, :, :]
        # masked weights are exactly 0 after the softmax
        scores = scores.masked_fill(blocked, float('-inf'))
        attn = self.attn_dropout(F.softmax(scores, dim=-1))
        out = torch.matmul(attn, v).transpose(1, 2).reshape(B, T, E)
        return self.wo(out)


class FeedForward(nn.Module):

    def __init__(self, d_model, d_ff, dropout):
        super().__init__()
        self.w1 = nn.Linear(d_model, d_ff)
        self.w2 = nn.Linear(d_ff, d_model)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x):
        return self.w2(self.dropout(F.gelu(self.w1(x))))


class EncoderLayer(nn.Module):
    """Pre-LN block: bidirectional self-attention, feed-forward."""

    def __init__(self, config):
        super().__init__()
        self.ln1 = nn.LayerNorm(config.d_model)
        self.self_attn = MultiHeadAttention(config.d_model, config.n_head,
                                            config.dropout)
        self.ln2 = nn.LayerNorm(config.d_model)
        self.ff = FeedForward(config.d_model, config.d_ff, config.dropout)
        self.resid_dropout = nn.Dropout(config.dropout)

    def forward(self, x, pad_mask):
        h = self.ln1(x)
        x = x + self.resid_dropout(self.self_attn(h, h, pad_mask))
        return x + self.resid_dropout(self.ff(self.ln2(x)))


class DecoderLayer(nn.Module):
    """Pre-LN block: self-attention, cross-attention over the encoder
    (omitted for the stand-alone language model), feed-forward."""

    def __init__(self, config, cross_attention=True):
        super().__init__()
        self.ln1 = nn.LayerNorm(config.d_model)
        self.self_attn = MultiHeadAttention(config.d_model, config.n_head,
                                            config.dropout)
        self.cross_attention = cross_attention
        if cross_attention:
            self.ln_cross = nn.LayerNorm(config.d_model)
            self.cross_attn = MultiHeadAttention(config.d_model,
                                                 config.n_head,
                                                 config.dropout)
        self.ln2 = nn.LayerNorm(config.d_model)
        self.ff = FeedForward(config.d_model, config.d_ff, config.dropout)
        self.resid_dropout = nn.Dropout(config.dropout)

    def forward(self, x, pad_mask, causal, memory=None, memory_pad_mask=None):
        h = self.ln1(x)
        x = x + self.resid_dropout(self.self_attn(h, h, pad_mask, causal))
        if self.cross_attention:
            x = x + self.resid_dropout(self.cross_attn(
                self.ln_cross(x), memory, memory_pad_mask))
        return x + self.resid_dropout(self.ff(self.ln2(x)))


def init_parameters(module, seed):
    """Deterministic N(0, 0.02) weights, zero biases, unit layer norms.

    Parameters are visited in name order with a private generator so the
    result depends on nothing but the seed."""

    g = torch.Generator().manual_seed(int(seed))
    with torch.no_grad():
        for name, p in sorted(module.named_parameters()):
            if name.endswith('bias'):
                p.zero_()
            elif '.ln' in name or name.startswith('ln') or \
                    name.endswith('_norm.weight'):
                p.fill_(1.0)
            else:
                p.copy_(torch.randn(p.shape, generator=g,
                                    dtype=torch.float64).mul_(0.02))


class Cbart(nn.Module):
    """Encoder with a three-way copy/replace/insert classifier and a
    decoder filling the masked positions."""

    def __init__(self, config, seed=0):
        super().__init__()
        self.config = config.validate()
        d = config.d_model
        # shared by encoder input, decoder input and output projection
        self.tok_embed = nn.Embedding(config.vocab_size, d)
        self.enc_pos = nn.Embedding(config.max_positions, d)
        self.dec_pos = nn.Embedding(config.max_positions, d)
        self.embed_dropout = nn.Dropout(config.dropout)
        self.encoder = nn.ModuleList(EncoderLayer(config)
                                     for _ in range(config.n_layer))
        self.enc_norm = nn.LayerNorm(d)
        self.decoder = nn.ModuleList(DecoderLayer(config)
                                     for _ in range(config.n_layer))
        self.dec_norm = nn.LayerNorm(d)
        if config.classifier_hidden > 0:
            self.classifier = nn.Sequential(
                nn.Linear(d, config.classifier_hidden), nn.GELU(),
                nn.Linear(config.classifier_hidden, NUM_LABELS))
        else:
            self.classifier = nn.Linear(d, NUM_LABELS)
        init_parameters(self, seed)

    def _check_length(self, ids):
        if ids.size(1) > self.config.max_positions:
            raise CbartError("length overflow: sequence of %d tokens, "
                             "max_positions is %d"% (ids.size(1),
                             self.config.max_positions),
                             CbartError.ERROR.RUNTIME)

    def encoder_forward(self, x, pad_mask=None):
        """:returns: (hidden B x n x d_model, label_logits B x n x 3)"""

        self._check_length(x)
        if pad_mask is None:
            pad_mask = x.eq(PAD)
        positions = torch.arange(x.size(1), device=x.device)
        h = self.embed_dropout(self.tok_embed(x) + self.enc_pos(positions))
        for layer in self.encoder:
            h = layer(h, pad_mask)
        h = self.enc_norm(h)
        return h, self.classifier(h)

    def decoder_forward(self, ym, hidden, enc_pad_mask, dec_pad_mask=None,
                        causal_mask=None):
        """:returns: token logits B x m x vocab_size; position 0 holds the
        </S> decoder start."""

        self._check_length(ym)
        if dec_pad_mask is None:
            dec_pad_mask = ym.eq(PAD)
        if causal_mask is None:
            causal_mask = self.config.causal_mask
        positions = torch.arange(ym.size(1), device=ym.device)
        h = self.embed_dropout(self.tok_embed(ym) + self.dec_pos(positions))
        for layer in self.decoder:
            h = layer(h, dec_pad_mask, causal_mask, hidden, enc_pad_mask)
        h = self.dec_norm(h)
        return F.linear(h, self.tok_embed.weight)

    def forward(self, x, ym):
        enc_pad = x.eq(PAD)
        hidden, label_logits = self.encoder_forward(x, enc_pad)
        token_logits = self.decoder_forward(ym, hidden, enc_pad)
        return label_logits, token_logits


class LanguageModel(nn.Module):
    """Decoder-only autoregressive model used to rank candidates."""

    def __init__(self, config, seed=0):
        super().__init__()
        self.config = config.validate()
        d = config.d_model
        self.tok_embed = nn.Embedding(config.vocab_size, d)
        self.dec_pos = nn.Embedding(config.max_positions, d)
        self.embed_dropout = nn.Dropout(config.dropout)
        self.decoder = nn.ModuleList(DecoderLayer(config, cross_attention=False)
                                     for _ in range(config.n_layer))
        self.dec_norm = nn.LayerNorm(d)
        init_parameters(self, seed)

    def forward(self, ids, pad_mask=None):
        if ids.size(1) > self.config.max_positions:
            raise CbartError("length overflow: sequence of %d tokens, "
                             "max_positions is %d"% (ids.size(1),
                             self.config.max_positions),
                             CbartError.ERROR.RUNTIME)
        if pad_mask is None:
            pad_mask = ids.eq(PAD)
        positions = torch.arange(ids.size(1), device=ids.device)
        h = self.embed_dropout(self.tok_embed(ids) + self.dec_pos(positions))
        for layer in self.decoder:
            h = layer(h, pad_mask, True)
        return F.linear(self.dec_norm(h), self.tok_embed.weight)

    def loss(self, ids):
        """Mean next-token cross-entropy over the non-pad targets."""

        logits = self.forward(ids[:, :-1])
        targets = ids[:, 1:].masked_fill(ids[:, 1:].eq(PAD), IGNORE)
        return masked_mean_ce(logits, targets)

    def nll(self, sentence):
        """Total negative log-likelihood of one SentenceIds (natural
        log), summed over every token after <S>."""

        ids = torch.tensor([sentence], dtype=torch.long,
                           device=self.tok_embed.weight.device)
        with torch.no_grad():
            logp = F.log_softmax(self.forward(ids[:, :-1]), dim=-1)
            picked = logp.gather(-1, ids[:, 1:, None]).squeeze(-1)
        return float(-picked.sum())


def masked_mean_ce(logits, targets):
    """Cross-entropy averaged over targets != IGNORE; 0 if there are
    none."""

    total = F.cross_entropy(logits.reshape(-1, logits.size(-1)),
                            targets.reshape(-1), ignore_index=IGNORE,
                            reduction='sum')
    count = int(targets.ne(IGNORE).sum())
    return total / max(count, 1)


def pad_batch(seqs, pad=PAD):
    width = max(len(s) for s in seqs)
    return torch.tensor([list(s) + [pad] * (width - len(s)) for s in seqs],
                        dtype=torch.long)


class Batch(object):
    """Padded tensors of a list of TrainingInstance."""

    def __init__(self, instances, device=None):
        if not instances:
            raise CbartError("empty batch", CbartError.ERROR.RUNTIME)
        self.size = len(instances)
        self.x = pad_batch([i.x for i in instances])
        self.labels = pad_batch([i.l for i in instances], IGNORE)
        self.ym = pad_batch([i.ym for i in instances])
        self.y = pad_batch([i.y for i in instances], IGNORE)
        if device is not None:
            for name in ('x', 'labels', 'ym', 'y'):
                setattr(self, name, getattr(self, name).to(device))

    def decoder_targets(self, objective):
        """Targets of the decoder loss. The prediction at slot t is a
        masked one iff ym[t + 1] is <M>."""

        if objective == 'lm':
            return self.y
        masked = torch.zeros_like(self.ym, dtype=torch.bool)
        masked[:, :-1] = self.ym[:, 1:].eq(MASK)
        return self.y.masked_fill(~masked, IGNORE)


class LossBreakdown(object):
    """l_total = l_encoder + alpha * l_decoder, with the autograd graph
    that produced it. The graph can be back-propagated once."""

    def __init__(self, l_encoder, l_decoder, alpha):
        self.alpha = alpha
        self.encoder_tensor = l_encoder
        self.decoder_tensor = l_decoder
        self.total_tensor = l_encoder + alpha * l_decoder
        self.consumed = False

    @property
    def l_encoder(self):
        return float(self.encoder_tensor)

    @property
    def l_decoder(self):
        return float(self.decoder_tensor)

    @property
    def l_total(self):
        return float(self.total_tensor)

    def as_dict(self):
        return {'l_encoder': self.l_encoder, 'l_decoder': self.l_decoder,
                'l_total': self.l_total}


def compute_loss(model, batch, config=None):
    """Joint loss of a Batch (or a list of instances) under model."""

    config = model.config if config is None else config
    if not isinstance(batch, Batch):
        batch = Batch(batch, model.tok_embed.weight.device)
    label_logits, token_logits = model(batch.x, batch.ym)
    l_encoder = masked_mean_ce(label_logits, batch.labels)
    l_decoder = masked_mean_ce(token_logits,
                               batch.decoder_targets(config.objective))
    return LossBreakdown(l_encoder, l_decoder, config.alpha)


def backward(breakdown, model):
    """Back-propagate l_total once.

    :returns: dict parameter name -> gradient tensor; parameters the
              forward pass did not touch get exact zeros."""

    if breakdown.consumed:
        raise CbartError("forward trace already consumed",
                         CbartError.ERROR.RUNTIME)
    breakdown.consumed = True
    model.zero_grad(set_to_none=True)
    breakdown.total_tensor.backward()
    grads = {}
    for name, p in model.named_parameters():
        grads[name] = p.grad.detach().clone() if p.grad is not None \
            else torch.zeros_like(p)
    return grads
