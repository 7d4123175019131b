# JSON run configuration with typed, validated keys
# Copyright (C) 2003-2016 John Goerzen & contributors
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
import os
from collections import OrderedDict, namedtuple
from sys import exc_info

import six

from cbart.error import CbartError
from cbart.inference import DecodeConfig, DECODE_STRATEGIES, RANKERS
from cbart.model import ModelConfig, MODEL_SIZES, OBJECTIVES
from cbart.synthesis import STRATEGIES
from cbart.text import NUM_SPECIALS
from cbart.training import TrainConfig

Option = namedtuple('Option', 'kind default check')


def _above(limit):
    return lambda v: None if v > limit else "must be > %s"% limit

def _atleast(limit):
    return lambda v: None if v >= limit else "must be >= %s"% limit

def _unit(low_open, high_open):
    """Interval check on [0, 1] with the given open ends."""

    def check(v):
        low_ok = v > 0 if low_open else v >= 0
        high_ok = v < 1 if high_open else v <= 1
        if low_ok and high_ok:
            return None
        return "must be in %s0, 1%s"% ("(" if low_open else "[",
                                       ")" if high_open else "]")
    return check

def _oneof(choices):
    return lambda v: None if v in choices else \
        "must be one of %s"% ", ".join(choices)


# Every key of the configuration file; flags use the same names with
# dashes.
OPTIONS = OrderedDict([
    # model
    ('model_size', Option('str', 'base', _oneof(sorted(MODEL_SIZES)))),
    ('n_layer', Option('int', 2, _atleast(1))),
    ('n_head', Option('int', 4, _atleast(1))),
    ('d_model', Option('int', 128, _atleast(1))),
    ('d_ff', Option('int', 512, _atleast(1))),
    ('max_positions', Option('int', 128, _atleast(3))),
    ('dropout', Option('float', 0.1, _unit(False, True))),
    ('objective', Option('str', 'lm', _oneof(OBJECTIVES))),
    ('causal_mask', Option('bool', True, None)),
    ('alpha', Option('float', 1.0, _above(0))),
    ('classifier_hidden', Option('int', 0, _atleast(0))),
    # optimization
    ('learning_rate', Option('float', 1e-3, _above(0))),
    ('beta1', Option('float', 0.9, _unit(True, True))),
    ('beta2', Option('float', 0.999, _unit(True, True))),
    ('eps', Option('float', 1e-8, _above(0))),
    ('weight_decay', Option('float', 0.01, _atleast(0))),
    ('grad_clip', Option('float', 1.0, _atleast(0))),
    ('epochs', Option('int', 10, _atleast(0))),
    ('batch_size', Option('int', 32, _atleast(1))),
    ('validation_fraction', Option('float', 0.1, _unit(False, True))),
    # synthesis and vocabulary
    ('insertion', Option('str', 'left', _oneof(STRATEGIES))),
    ('per_sentence', Option('int', 10, _atleast(1))),
    ('replace_rate', Option('float', 0.15, _unit(False, True))),
    ('min_freq', Option('int', 1, _atleast(1))),
    ('max_vocab', Option('int', 50000, _above(NUM_SPECIALS))),
    ('num_keywords', Option('int', 3, _atleast(1))),
    # decoding
    ('strategy', Option('str', 'greedy', _oneof(DECODE_STRATEGIES))),
    ('k', Option('int', 10, _atleast(1))),
    ('p', Option('float', 0.9, _unit(True, False))),
    ('num_sequences', Option('int', 1, _atleast(1))),
    ('theta', Option('float', 2.0, _atleast(1))),
    ('max_steps', Option('int', 10, _atleast(1))),
    ('ranker', Option('str', 'lm', _oneof(RANKERS))),
    ('literal_penalty', Option('bool', False, None)),
    ('repetition_penalty', Option('bool', True, None)),
    # run
    ('seed', Option('int', 0, _atleast(0))),
    ('threads', Option('int', 1, _atleast(1))),
    # paths
    ('corpus', Option('path', None, None)),
    ('vocab', Option('path', None, None)),
    ('dataset', Option('path', None, None)),
    ('checkpoint', Option('path', None, None)),
    ('lm_checkpoint', Option('path', None, None)),
    ('constraints', Option('path', None, None)),
    ('references', Option('path', None, None)),
    ('generations', Option('path', None, None)),
    ('out', Option('path', None, None)),
    ('logfile', Option('path', None, None)),
])

ARCHITECTURE_KEYS = ('n_layer', 'n_head', 'd_model', 'd_ff')


def coerce(key, kind, value):
    """Type-check a value of key; ints are accepted for floats."""

    if kind == 'int':
        ok = isinstance(value, six.integer_types) and \
            not isinstance(value, bool)
        what = "an integer"
    elif kind == 'float':
        ok = isinstance(value, (float,) + six.integer_types) and \
            not isinstance(value, bool)
        what = "a number"
        if ok:
            value = float(value)
    elif kind == 'bool':
        ok = isinstance(value, bool)
        what = "true or false"
    else:
        ok = isinstance(value, six.string_types) or \
            (kind == 'path' and value is None)
        what = "a string"
    if not ok:
        raise CbartError("%s must be %s, got %s"% (key, what,
                         json.dumps(value)), CbartError.ERROR.USAGE)
    return value


class RunConfig(object):
    """Merged view of every configuration key: defaults, then the
    configuration file, then command line flags."""

    def __init__(self, source=None):
        self.source = source
        self.values = dict((k, o.default) for k, o in OPTIONS.items())
        # keys set by the file or a flag
        self.explicit = set()

    def has_option(self, key):
        return key in self.explicit

    def get(self, key):
        if key not in OPTIONS:
            raise CbartError("unknown config key '%s'"% key,
                             CbartError.ERROR.USAGE)
        return self.values[key]

    def getdefault(self, key, default):
        """Same as get, but returns the value of `default` if the key
        was not set explicitly."""

        if self.has_option(key):
            return self.get(key)
        return default

    def set(self, key, value):
        if key not in OPTIONS:
            raise CbartError("unknown config key '%s'"% key,
                             CbartError.ERROR.USAGE)
        option = OPTIONS[key]
        value = coerce(key, option.kind, value)
        if option.check is not None:
            problem = option.check(value)
            if problem:
                raise CbartError("%s %s"% (key, problem),
                                 CbartError.ERROR.USAGE)
        self.values[key] = value
        self.explicit.add(key)

    def override(self, values):
        """Apply command line values; None means the flag was absent."""

        for key, value in values.items():
            if value is not None:
                self.set(key, value)

    def apply_xforms(self, string, transforms):
        if string is None:
            return None
        for f in transforms:
            string = f(string)
        return string

    def getpath(self, key):
        xforms = [os.path.expanduser, os.path.expandvars]
        return self.apply_xforms(self.get(key), xforms)

    def requirepath(self, key, exists=True):
        """The path of key, which must be set (and exist, for inputs)."""

        path = self.getpath(key)
        if path is None:
            raise CbartError("missing --%s"% key.replace('_', '-'),
                             CbartError.ERROR.USAGE)
        if exists and not os.path.exists(path):
            raise CbartError("%s '%s' does not exist"% (key, path),
                             CbartError.ERROR.USAGE)
        return path

    def architecture(self):
        """Architecture keys with the model_size preset filling those the
        user did not set."""

        preset = MODEL_SIZES[self.get('model_size')]
        return dict((k, self.getdefault(k, preset[k]))
                    for k in ARCHITECTURE_KEYS)

    def model_config(self, vocab_size):
        cfg = ModelConfig(vocab_size=vocab_size,
                          max_positions=self.get('max_positions'),
                          dropout=self.get('dropout'),
                          objective=self.get('objective'),
                          causal_mask=self.get('causal_mask'),
                          alpha=self.get('alpha'),
                          classifier_hidden=self.get('classifier_hidden'),
                          **self.architecture())
        return cfg.validate()

    def train_config(self):
        return TrainConfig(**dict((k, self.get(k)) for k in
                                  ('learning_rate', 'beta1', 'beta2', 'eps',
                                   'weight_decay', 'grad_clip', 'epochs',
                                   'batch_size', 'seed',
                                   'validation_fraction'))).validate()

    def decode_config(self):
        return DecodeConfig(**dict((k, self.get(k)) for k in
                                   ('strategy', 'k', 'p', 'num_sequences',
                                    'theta', 'max_steps', 'seed', 'ranker',
                                    'literal_penalty',
                                    'repetition_penalty'))).validate()


def load_config(path=None):
    """RunConfig from a JSON object file; None gives the defaults."""

    config = RunConfig(path)
    if path is None:
        return config
    try:
        with io.open(path, 'rt', encoding='utf-8') as fd:
            text = fd.read()
    except (IOError, OSError) as e:
        six.reraise(CbartError,
                    CbartError("Could not read config '%s': %s"% (path, e),
                               CbartError.ERROR.USAGE),
                    exc_info()[2])
    try:
        data = json.loads(text, object_pairs_hook=OrderedDict)
    except ValueError as e:
        six.reraise(CbartError,
                    CbartError("Config '%s' line %d column %d: %s"%
                               (path, e.lineno, e.colno, e.msg),
                               CbartError.ERROR.USAGE),
                    exc_info()[2])
    if not isinstance(data, dict):
        raise CbartError("Config '%s' must hold a JSON object"% path,
                         CbartError.ERROR.USAGE)
    for key, value in data.items():
        config.set(key, value)
    return config


def CustomConfigDefault():
    """Just a constant that won't occur anywhere else.

    This allows us to differentiate if the user has passed in any
    default value to the getconf* functions in ConfigHelperMixin
    derived classes."""

    pass


class ConfigHelperMixin(object):
    """Allow comfortable retrieving of config values.

    A class inheriting from ConfigHelperMixin provides getconfig(),
    returning the RunConfig all getconf* calls read from."""

    def getconfig(self):
        raise NotImplementedError("ConfigHelperMixin.getconfig() "
          "is to be overriden")

    def getconf(self, option, default=CustomConfigDefault):
        if default == CustomConfigDefault:
            return self.getconfig().get(option)
        return self.getconfig().getdefault(option, default)

    def getconfint(self, option, default=CustomConfigDefault):
        return int(self.getconf(option, default))

    def getconffloat(self, option, default=CustomConfigDefault):
        return float(self.getconf(option, default))

    def getconfpath(self, option, exists=True):
        return self.getconfig().requirepath(option, exists)
