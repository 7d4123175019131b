# Optimization, training loops and checkpoint selection
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
import os
import random
from collections import OrderedDict
from dataclasses import dataclass, asdict
from sys import exc_info

import six
import torch

from cbart.checkpoint import save_checkpoint, load_checkpoint
from cbart.error import CbartError
from cbart.model import (Batch, Cbart, LanguageModel, ModelConfig,
                         compute_loss, backward, pad_batch)
from cbart.synthesis import read_dataset
from cbart.text import Vocab, encode
from cbart.ui import getglobalui

try:
    import portalocker
except ImportError:
    try:
        import fcntl
    except ImportError:
        pass # Ok if this fails, we can do without.

KIND_CBART = 'cbart'
KIND_LM = 'lm'


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    # global gradient norm; 0 disables clipping
    grad_clip: float = 1.0
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0
    validation_fraction: float = 0.1

    def validate(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise CbartError("beta1 and beta2 must be in (0, 1)",
                             CbartError.ERROR.USAGE)
        if self.eps <= 0:
            raise CbartError("eps must be > 0", CbartError.ERROR.USAGE)
        if self.weight_decay < 0:
            raise CbartError("weight_decay must be >= 0",
                             CbartError.ERROR.USAGE)
        if self.learning_rate <= 0:
            raise CbartError("learning_rate must be > 0",
                             CbartError.ERROR.USAGE)
        if self.epochs < 0:
            raise CbartError("epochs must be >= 0", CbartError.ERROR.USAGE)
        if self.batch_size < 1:
            raise CbartError("batch_size must be >= 1",
                             CbartError.ERROR.USAGE)
        if not 0 <= self.validation_fraction < 1:
            raise CbartError("validation_fraction must be in [0, 1)",
                             CbartError.ERROR.USAGE)
        return self

    def to_dict(self):
        return asdict(self)


def make_optimizer(params, cfg):
    """AdamW with decay decoupled from the adaptive term:
    theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)."""

    return torch.optim.AdamW(list(params), lr=cfg.learning_rate,
                             betas=(cfg.beta1, cfg.beta2), eps=cfg.eps,
                             weight_decay=cfg.weight_decay)


def adamw_step(optimizer, cfg):
    """Check, clip and apply the gradients held by the parameters of
    optimizer, then clear them.

    :returns: the global gradient norm before clipping"""

    params = [p for group in optimizer.param_groups for p in group['params']
              if p.grad is not None]
    for p in params:
        if not bool(torch.isfinite(p.grad).all()):
            raise CbartError("non-finite gradient", CbartError.ERROR.RUNTIME)
    if params:
        norm = torch.linalg.vector_norm(torch.stack(
            [torch.linalg.vector_norm(p.grad) for p in params]))
    else:
        norm = torch.zeros(())
    if cfg.grad_clip > 0 and params:
        torch.nn.utils.clip_grad_norm_(params, cfg.grad_clip)
    optimizer.step()
    optimizer.zero_grad(set_to_none=True)
    return float(norm)


def state_dict_of(model):
    return OrderedDict((name, p.detach().clone())
                       for name, p in model.named_parameters())


def checkpoint_meta(kind, model_config, train_config, vocab, extra=None):
    meta = {'kind': kind,
            'model': model_config.to_dict(),
            'train': train_config.to_dict() if train_config else None,
            'vocab': vocab.corpus_tokens() if vocab is not None else None}
    if extra:
        meta.update(extra)
    return meta


def load_model(path, expect_kind=KIND_CBART):
    """:returns: (model in eval mode, vocab or None, meta)"""

    params, meta = load_checkpoint(path)
    kind = meta.get('kind')
    if kind != expect_kind:
        raise CbartError("Checkpoint '%s' holds a '%s' model, expected '%s'"%
                         (path, kind, expect_kind), CbartError.ERROR.USAGE)
    config = ModelConfig.from_dict(meta['model'])
    model = Cbart(config) if kind == KIND_CBART else LanguageModel(config)
    missing = set(n for n, _ in model.named_parameters()) - set(params)
    if missing:
        raise CbartError("Checkpoint '%s' lacks tensors %s"%
                         (path, ', '.join(sorted(missing))),
                         CbartError.ERROR.RUNTIME)
    model.load_state_dict(params, strict=False)
    model.eval()
    vocab = Vocab(meta['vocab']) if meta.get('vocab') is not None else None
    return model, vocab, meta


class RunDirectory(object):
    """An output directory for per-epoch checkpoints, locked while a
    trainer writes into it."""

    def __init__(self, path):
        self.path = path
        self._lockfd = None
        self._lockfilepath = os.path.join(path, "train.lock")

    def __enter__(self):
        if not os.path.isdir(self.path):
            os.makedirs(self.path)
        self._lockfd = open(self._lockfilepath, 'w')
        try:
            portalocker.lock(self._lockfd,
                             portalocker.LOCK_EX | portalocker.LOCK_NB)
        except NameError:
            # portalocker not available.
            try:
                fcntl.lockf(self._lockfd, fcntl.LOCK_EX|fcntl.LOCK_NB)
            except NameError:
                pass # fnctl not available, disable file locking... :(
            except IOError:
                self._fail_lock()
        except Exception:
            self._fail_lock()
        return self

    def _fail_lock(self):
        self._lockfd.close()
        six.reraise(CbartError,
                    CbartError("Could not lock run directory %s. Is another "
                               "trainer writing into it?"% self.path,
                               CbartError.ERROR.RUNTIME),
                    exc_info()[2])

    def __exit__(self, *args):
        if self._lockfd and not self._lockfd.closed:
            try:
                portalocker.unlock(self._lockfd)
            except NameError:
                pass
            self._lockfd.close()
            try:
                os.unlink(self._lockfilepath)
            except OSError:
                pass
        return False

    def epoch_path(self, epoch):
        return os.path.join(self.path, "epoch-%03d.ckpt"% epoch)

    def best_path(self):
        return os.path.join(self.path, "best.ckpt")

    def write_history(self, history, best_epoch):
        with io.open(os.path.join(self.path, "history.json"), 'wt',
                     encoding='utf-8', newline='\n') as fd:
            fd.write(json.dumps({'epochs': history, 'best_epoch': best_epoch},
                                indent=1, sort_keys=True))
            fd.write(u'\n')


def split_validation(items, fraction):
    """The last fraction of the items, in file order, is held out."""

    n_valid = int(math.floor(len(items) * fraction))
    if n_valid == 0:
        return list(items), []
    return list(items[:-n_valid]), list(items[-n_valid:])


def batches(items, batch_size, rng=None):
    order = list(range(len(items)))
    if rng is not None:
        rng.shuffle(order)
    for start in range(0, len(order), batch_size):
        yield [items[i] for i in order[start:start + batch_size]]


def select_best(history, key='valid_total'):
    """Epoch with the lowest validation loss, earliest on ties; the
    training loss is used when nothing was held out."""

    best = None
    for record in history:
        value = record.get(key)
        if value is None:
            value = record['train_total']
        if best is None or value < best[1]:
            best = (record['epoch'], value)
    return best[0] if best else 0


class _Trainer(object):
    """Shared epoch loop of train() and train_lm()."""

    kind = None

    def __init__(self, model_config, train_config, vocab, out_dir):
        self.model_config = model_config.validate()
        self.train_config = train_config.validate()
        self.vocab = vocab
        self.out_dir = out_dir
        self.ui = getglobalui()

    def build_model(self):
        raise NotImplementedError

    def batch_loss(self, model, items):
        """:returns: (loss tensor, record dict of floats)"""
        raise NotImplementedError

    def evaluate(self, model, items):
        """Example-weighted mean of the loss records over items."""

        totals = {}
        model.eval()
        with torch.no_grad():
            for items_batch in batches(items, self.train_config.batch_size):
                _, record = self.batch_loss(model, items_batch)
                for key, value in record.items():
                    totals[key] = totals.get(key, 0.0) + value * len(items_batch)
        return dict((k, v / len(items)) for k, v in totals.items())

    def run(self, items):
        cfg = self.train_config
        torch.manual_seed(cfg.seed)
        train_items, valid_items = split_validation(items,
                                                    cfg.validation_fraction)
        if not train_items:
            raise CbartError("No training data", CbartError.ERROR.DATA)
        if not valid_items:
            self.ui.warn("No validation data held out; selecting the "
                         "checkpoint by training loss")
        model = self.build_model()
        optimizer = make_optimizer(model.parameters(), cfg)
        rng = random.Random(cfg.seed)
        history = []

        with RunDirectory(self.out_dir) as rundir:
            meta = checkpoint_meta(self.kind, self.model_config, cfg,
                                   self.vocab, {'epoch': 0})
            save_checkpoint(rundir.epoch_path(0), state_dict_of(model), meta)
            record = self.epoch_record(0, model, train_items, valid_items)
            history.append(record)

            for epoch in range(1, cfg.epochs + 1):
                model.train()
                for items_batch in batches(train_items, cfg.batch_size, rng):
                    loss, _ = self.batch_loss(model, items_batch)
                    if not math.isfinite(float(loss)):
                        raise CbartError("non-finite loss at epoch %d: %s"%
                                         (epoch, float(loss)),
                                         CbartError.ERROR.RUNTIME)
                    loss.backward()
                    adamw_step(optimizer, cfg)
                record = self.epoch_record(epoch, model, train_items,
                                           valid_items)
                history.append(record)
                meta = checkpoint_meta(self.kind, self.model_config, cfg,
                                       self.vocab, {'epoch': epoch})
                path = save_checkpoint(rundir.epoch_path(epoch),
                                       state_dict_of(model), meta)
                self.ui.checkpoint_saved(path)

            best_epoch = select_best(history)
            rundir.write_history(history, best_epoch)
            best = rundir.best_path()
            params, meta = load_checkpoint(rundir.epoch_path(best_epoch))
            save_checkpoint(best, params, meta)
        self.ui.info("Best epoch %d, checkpoint %s"% (best_epoch, best))
        return best

    def epoch_record(self, epoch, model, train_items, valid_items):
        record = {'epoch': epoch}
        for prefix, items in (('train', train_items), ('valid', valid_items)):
            if not items:
                continue
            for key, value in self.evaluate(model, items).items():
                record['%s_%s'% (prefix, key)] = value
        self.ui.epoch_done(epoch, record['train_total'],
                           record.get('valid_total'))
        return record


class CbartTrainer(_Trainer):
    kind = KIND_CBART

    def build_model(self):
        return Cbart(self.model_config, seed=self.train_config.seed)

    def batch_loss(self, model, items):
        breakdown = compute_loss(model, Batch(items), self.model_config)
        return breakdown.total_tensor, {'encoder': breakdown.l_encoder,
                                        'decoder': breakdown.l_decoder,
                                        'total': breakdown.l_total}


class LanguageModelTrainer(_Trainer):
    kind = KIND_LM

    def build_model(self):
        return LanguageModel(self.model_config, seed=self.train_config.seed)

    def batch_loss(self, model, items):
        loss = model.loss(pad_batch(items))
        return loss, {'total': float(loss)}


def train(dataset_path, model_config, train_config, out_dir, vocab=None):
    """Train the encoder-decoder on a synthetic dataset file.

    :returns: path of the checkpoint with the lowest validation loss"""

    instances = read_dataset(dataset_path)
    if not instances:
        raise CbartError("Dataset '%s' is empty"% dataset_path,
                         CbartError.ERROR.DATA)
    needed = max(max(len(i.x), len(i.ym)) for i in instances)
    if needed > model_config.max_positions:
        raise CbartError("max_positions (%d) is shorter than the longest "
                         "dataset sequence (%d)"%
                         (model_config.max_positions, needed),
                         CbartError.ERROR.USAGE)
    top = max(max(max(i.x), max(i.y)) for i in instances)
    if top >= model_config.vocab_size:
        raise CbartError("Dataset token id %d exceeds vocab_size %d"%
                         (top, model_config.vocab_size),
                         CbartError.ERROR.DATA)
    return CbartTrainer(model_config, train_config, vocab, out_dir).run(
        instances)


def train_lm(corpus, vocab, model_config, train_config, out_dir):
    """Train the autoregressive ranking model on corpus lines.

    :returns: path of the best LM checkpoint"""

    sentences = [encode(line, vocab) for line in corpus]
    if not sentences:
        raise CbartError("empty corpus", CbartError.ERROR.DATA)
    longest = max(len(s) for s in sentences)
    if longest - 1 > model_config.max_positions:
        raise CbartError("max_positions (%d) is shorter than the longest "
                         "sentence (%d)"% (model_config.max_positions,
                                           longest - 1),
                         CbartError.ERROR.USAGE)
    return LanguageModelTrainer(model_config, train_config, vocab,
                                out_dir).run(sentences)
