# cbart command line front door
# Copyright (C) 2002-2017 John Goerzen & contributors
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

import argparse
import io
import json
import sys
import time
import logging
from sys import exc_info

import six
import torch

import cbart
from cbart.ui import UI_LIST, setglobalui, loglevel_from_env
from cbart import threadutil, synthesis, training, inference, metrics
from cbart.error import CbartError
from cbart.CustomConfig import OPTIONS, ConfigHelperMixin, load_config
from cbart.text import (Vocab, build_vocab, decode, derive_seed, encode,
                        extract_keywords, read_corpus)

PYTHON_VERSION = sys.version.split(' ')[0]


def parse_bool(value):
    v = value.strip().lower()
    if v in ('true', 'yes', '1', 'on'):
        return True
    if v in ('false', 'no', '0', 'off'):
        return False
    raise argparse.ArgumentTypeError("expected true or false, not '%s'"%
                                     value)


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors become CbartError so they share the exit code and
    reporting of every other usage error."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise CbartError("%s: %s"% (self.prog, message),
                         CbartError.ERROR.USAGE)


def _flag(parser, key, **kwargs):
    kwargs.setdefault('dest', key)
    kwargs.setdefault('default', None)
    kind = OPTIONS[key].kind
    if kind == 'bool':
        kwargs.setdefault('type', parse_bool)
        kwargs.setdefault('metavar', '{true,false}')
    elif kind == 'int':
        kwargs.setdefault('type', int)
    elif kind == 'float':
        kwargs.setdefault('type', float)
    flags = kwargs.pop('flags', None) or ['--' + key.replace('_', '-')]
    parser.add_argument(*flags, **kwargs)


def add_model_flags(parser):
    for key in ('model_size', 'n_layer', 'n_head', 'd_model', 'd_ff',
                'max_positions', 'dropout', 'alpha', 'classifier_hidden'):
        _flag(parser, key)
    _flag(parser, 'objective', choices=('lm', 'mlm'))
    _flag(parser, 'causal_mask')


def add_train_flags(parser):
    for key in ('learning_rate', 'beta1', 'beta2', 'eps', 'weight_decay',
                'grad_clip', 'epochs', 'batch_size', 'validation_fraction'):
        _flag(parser, key)


def add_decode_flags(parser):
    _flag(parser, 'strategy', choices=inference.DECODE_STRATEGIES)
    _flag(parser, 'ranker', choices=inference.RANKERS)
    for key in ('k', 'p', 'theta', 'num_sequences', 'max_steps',
                'literal_penalty', 'repetition_penalty'):
        _flag(parser, key)
    _flag(parser, 'checkpoint', help="trained model checkpoint")
    _flag(parser, 'lm_checkpoint', help="language model used for ranking")
    _flag(parser, 'vocab', help="vocabulary, when the checkpoint has none")
    _flag(parser, 'constraints',
          help="keywords, one case per line, tab separated")


class Cbart(ConfigHelperMixin):
    """The main class that encapsulates the command line use of cbart.

    To invoke cbart you would call it with::

      cb = Cbart()
      cb.run()
    """

    def __init__(self, stream=None):
        self.stream = stream
        self.config = None
        self.ui = None

    def getconfig(self):
        return self.config

    def get_env_info(self):
        return "torch v%s, Python v%s"% (torch.__version__, PYTHON_VERSION)

    def run(self):
        """Parse the commandline and invoke everything"""

        sys.exit(self.dispatch(sys.argv[1:]))

    def make_parser(self):
        common = ArgumentParser(add_help=False, allow_abbrev=False)
        common.add_argument("--config", dest="configfile", metavar="FILE",
                            default=None,
                            help="JSON configuration file")
        common.add_argument("-u", "--ui", dest="interface", default='basic',
                            choices=sorted(UI_LIST),
                            help="user interface")
        _flag(common, 'seed')
        _flag(common, 'threads', help="maximum number of worker threads")
        _flag(common, 'logfile', flags=['-l', '--logfile'], metavar='FILE',
              help="log to FILE")

        parser = ArgumentParser(
            prog='cbart', allow_abbrev=False,
            description="%s.\n\n%s"% (cbart.__copyright__,
                                       cbart.__license__))
        parser.add_argument("--version", action="version",
                            version="cbart v%s"% cbart.__version__)
        sub = parser.add_subparsers(dest='command', metavar='COMMAND',
                                    parser_class=ArgumentParser)
        sub.required = True

        def command(name, helptext):
            return sub.add_parser(name, parents=[common], help=helptext,
                                  allow_abbrev=False)

        p = command('vocab', "build a vocabulary from a corpus")
        _flag(p, 'corpus')
        _flag(p, 'out')
        _flag(p, 'min_freq')
        _flag(p, 'max_vocab')

        p = command('synth', "build the synthetic training dataset")
        _flag(p, 'corpus')
        _flag(p, 'vocab')
        _flag(p, 'out')
        _flag(p, 'insertion', flags=['--insertion', '--strategy'],
              choices=synthesis.STRATEGIES)
        _flag(p, 'per_sentence')
        _flag(p, 'replace_rate')

        p = command('keywords', "extract keyword constraints from a corpus")
        _flag(p, 'corpus')
        _flag(p, 'vocab')
        _flag(p, 'out', help="constraints file to write")
        _flag(p, 'references', help="aligned references to write")
        _flag(p, 'num_keywords')

        p = command('train', "train the refinement model")
        _flag(p, 'dataset')
        _flag(p, 'vocab')
        _flag(p, 'out', help="run directory for checkpoints")
        add_model_flags(p)
        add_train_flags(p)

        p = command('train-lm', "train the ranking language model")
        _flag(p, 'corpus')
        _flag(p, 'vocab')
        _flag(p, 'out', help="run directory for checkpoints")
        add_model_flags(p)
        add_train_flags(p)

        p = command('generate', "generate sentences from keywords")
        add_decode_flags(p)
        _flag(p, 'out')

        p = command('bench', "time generation per case")
        add_decode_flags(p)
        _flag(p, 'out')

        p = command('evaluate', "score generations against references")
        _flag(p, 'generations')
        _flag(p, 'references')
        _flag(p, 'checkpoint', help="also report the action classifier")
        _flag(p, 'dataset', help="synthetic data for the classifier report")
        _flag(p, 'out')
        return parser

    def setup_ui(self, interface, environ=None):
        """Replace the start-up UI by the requested one at the CBART_LOG
        level; an invalid CBART_LOG is reported by the start-up UI."""

        level = loglevel_from_env(environ)
        self.ui = UI_LIST[interface](level, self.stream)
        setglobalui(self.ui)

    def dispatch(self, argv, environ=None):
        """Run one subcommand.

        :returns: 0 on success, 1 on usage errors, 2 on other failures"""

        self.ui = UI_LIST['basic'](logging.INFO, self.stream)
        setglobalui(self.ui)
        try:
            try:
                options = self.make_parser().parse_args(argv)
            except SystemExit as e:
                # --help and --version
                return e.code or 0
            self.setup_ui(options.interface, environ)
            self.config = load_config(options.configfile)
            self.config.override(dict(
                (key, getattr(options, key)) for key in OPTIONS
                if hasattr(options, key)))
            logfile = self.config.getpath('logfile')
            if logfile:
                self.ui.setlogfile(logfile)
            self.ui.init_banner()
            self.ui.info(self.get_env_info())

            threadutil.init_instance_limit(threadutil.WORKER_NAMESPACE,
                                           self.getconfint('threads'))
            # our worker threads are the only parallelism
            torch.set_num_threads(1)

            handler = getattr(self, '_cmd_' + options.command.replace('-', '_'))
            self.ui.summary(handler())
        except CbartError as e:
            self.ui.error(e, exc_info()[2])
            return self.ui.terminate(e.exitcode)
        except Exception as e:
            self.ui.error(e, exc_info()[2], msg="Unexpected failure")
            return self.ui.terminate(2)
        return self.ui.terminate(0)

    ################################################## HELPERS

    def _vocab(self):
        return Vocab.load(self.getconfpath('vocab'))

    def _model(self):
        model, vocab, _ = training.load_model(self.getconfpath('checkpoint'),
                                              training.KIND_CBART)
        if vocab is None:
            vocab = self._vocab()
        if vocab.size != model.config.vocab_size:
            raise CbartError("Vocabulary of %d tokens does not match the "
                             "model's %d"% (vocab.size,
                                            model.config.vocab_size),
                             CbartError.ERROR.USAGE)
        lm = None
        if self.getconf('lm_checkpoint') is not None:
            lm, _, _ = training.load_model(self.getconfpath('lm_checkpoint'),
                                           training.KIND_LM)
            if lm.config.vocab_size != model.config.vocab_size:
                raise CbartError("The language model and the checkpoint use "
                                 "different vocabularies",
                                 CbartError.ERROR.USAGE)
        return model, lm, vocab

    def _generate_all(self):
        """:returns: list of (keyword strings, GenerationResult,
                  elapsed milliseconds)"""

        model, lm, vocab = self._model()
        cases = inference.read_constraints(self.getconfpath('constraints'),
                                           vocab)
        cfg = self.config.decode_config()
        if cfg.ranker == 'lm' and lm is None and cfg.num_sequences > 1:
            raise CbartError("ranker 'lm' requires --lm-checkpoint",
                             CbartError.ERROR.USAGE)
        results = []
        for index, (words, ids) in enumerate(cases):
            start = time.perf_counter()
            result = inference.generate_ranked(ids, model, cfg, lm)
            elapsed = (time.perf_counter() - start) * 1000.0
            result.text = decode(result.sentence, vocab)
            self.ui.case_generated(index, words, result)
            results.append((words, result, elapsed))
        return results

    def _write_lines(self, path, lines):
        try:
            with io.open(path, 'wt', encoding='utf-8', newline='\n') as fd:
                for line in lines:
                    fd.write(line)
                    fd.write(u'\n')
        except (IOError, OSError) as e:
            six.reraise(CbartError,
                        CbartError("Could not write '%s': %s"% (path, e),
                                   CbartError.ERROR.RUNTIME),
                        exc_info()[2])

    ################################################## COMMANDS

    def _cmd_vocab(self):
        corpus = read_corpus(self.getconfpath('corpus'))
        vocab = build_vocab(corpus, self.getconfint('min_freq'),
                            self.getconfint('max_vocab'))
        out = self.getconfpath('out', exists=False)
        vocab.save(out)
        return "vocab: %d tokens from %d lines -> %s"% (vocab.size,
                                                        len(corpus), out)

    def _cmd_synth(self):
        corpus = read_corpus(self.getconfpath('corpus'))
        vocab = self._vocab()
        out = self.getconfpath('out', exists=False)
        instances = synthesis.make_dataset(
            corpus, vocab, self.getconf('insertion'),
            self.getconfint('per_sentence'),
            self.getconffloat('replace_rate'), self.getconfint('seed'))
        count = synthesis.write_dataset(instances, out)
        return "synth: %d instances from %d lines (%s) -> %s"% (
            count, len(corpus), self.getconf('insertion'), out)

    def _cmd_keywords(self):
        corpus = read_corpus(self.getconfpath('corpus'))
        vocab = self._vocab()
        out = self.getconfpath('out', exists=False)
        n = self.getconfint('num_keywords')
        seed = self.getconfint('seed')
        constraints, references = [], []
        for index, line in enumerate(corpus):
            sentence = encode(line, vocab)
            try:
                ids = extract_keywords(sentence, n, derive_seed(seed, index),
                                       vocab)
            except CbartError as e:
                self.ui.debug('keywords', "line %d skipped: %s"%
                              (index + 1, e))
                continue
            constraints.append(u"\t".join(vocab.token(i) for i in ids))
            references.append(u" ".join(line.split()))
        self._write_lines(out, constraints)
        refs = self.getconf('references')
        if refs is not None:
            self._write_lines(self.getconfpath('references', exists=False),
                              references)
        return "keywords: %d of %d lines with %d keywords -> %s"% (
            len(constraints), len(corpus), n, out)

    def _cmd_train(self):
        vocab = self._vocab()
        best = training.train(self.getconfpath('dataset'),
                              self.config.model_config(vocab.size),
                              self.config.train_config(),
                              self.getconfpath('out', exists=False), vocab)
        return "train: best checkpoint %s"% best

    def _cmd_train_lm(self):
        corpus = read_corpus(self.getconfpath('corpus'))
        vocab = self._vocab()
        best = training.train_lm(corpus, vocab,
                                 self.config.model_config(vocab.size),
                                 self.config.train_config(),
                                 self.getconfpath('out', exists=False))
        return "train-lm: best checkpoint %s"% best

    def _cmd_generate(self):
        out = self.getconfpath('out', exists=False)
        results = self._generate_all()
        lines = []
        for words, result, elapsed in results:
            record = [('keywords', words), ('output', result.text),
                      ('steps', result.steps),
                      ('decoder_passes', result.decoder_passes),
                      ('nll', result.nll),
                      ('elapsed_ms', round(elapsed, 3))]
            lines.append(json.dumps(dict(record), ensure_ascii=False))
        self._write_lines(out, lines)
        covered = sum(1 for words, result, _ in results
                      if metrics.covers(result.text.split(), words))
        return "generate: %d cases, %d covered -> %s"% (len(results),
                                                       covered, out)

    def _cmd_bench(self):
        out = self.getconfpath('out', exists=False)
        results = self._generate_all()
        lines = [u"case\tkeywords\tsteps\tdecoder_passes\telapsed_ms"]
        for index, (words, result, elapsed) in enumerate(results):
            lines.append(u"%d\t%s\t%d\t%d\t%.3f"% (index, u" ".join(words),
                         result.steps, result.decoder_passes, elapsed))
        n = max(len(results), 1)
        mean_steps = sum(r.steps for _, r, _ in results) / float(n)
        mean_passes = sum(r.decoder_passes for _, r, _ in results) / float(n)
        mean_ms = sum(e for _, _, e in results) / float(n)
        lines.append(u"mean\t\t%.3f\t%.3f\t%.3f"% (mean_steps, mean_passes,
                                                   mean_ms))
        self._write_lines(out, lines)
        return "bench: %d cases, %.2f steps, %.1f ms per case -> %s"% (
            len(results), mean_steps, mean_ms, out)

    def _cmd_evaluate(self):
        generations = metrics.read_generations(
            self.getconfpath('generations'))
        references = read_corpus(self.getconfpath('references'))
        out = self.getconfpath('out', exists=False)
        overall, breakdown = metrics.evaluate(generations, references)
        classifier = None
        if self.getconf('checkpoint') is not None:
            model, _, _ = training.load_model(self.getconfpath('checkpoint'),
                                              training.KIND_CBART)
            instances = synthesis.read_dataset(self.getconfpath('dataset'))
            classifier = metrics.classifier_report(model, instances)
        metrics.write_report(out, overall, breakdown, classifier)
        return "evaluate: %d cases, BLEU-4 %.4f, coverage %.4f -> %s"% (
            overall.cases, overall.bleu4, overall.keyword_coverage, out)
