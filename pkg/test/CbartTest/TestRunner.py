# Copyright (C) 2012- Sebastian Spaeth & contributors
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
import shutil
import tempfile

from cbart.init import Cbart
from cbart.model import ModelConfig
from cbart.text import build_vocab


class CbartTestLib():
    testdir = None
    """Absolute path of the current temporary test directory"""

    @classmethod
    def create_test_dir(cls, suffix=''):
        """Creates a test directory.

        Note that this is a class method. There can only be one test
        directory at a time. CbartTestLib is not suited for running
        several test modules in parallel."""
        cls.testdir = os.path.abspath(
            tempfile.mkdtemp(prefix='tmp_%s_'% suffix))
        return cls.testdir

    @classmethod
    def delete_test_dir(cls):
        """Deletes the current test directory"""
        if cls.testdir and os.path.isdir(cls.testdir):
            shutil.rmtree(cls.testdir)
        cls.testdir = None

    @classmethod
    def path(cls, name):
        assert cls.testdir is not None
        return os.path.join(cls.testdir, name)

    @classmethod
    def write_lines(cls, name, lines):
        path = cls.path(name)
        with io.open(path, 'wt', encoding='utf-8', newline='\n') as f:
            for line in lines:
                f.write(u"%s\n"% line)
        return path

    @classmethod
    def read_lines(cls, name):
        with io.open(cls.path(name), 'rt', encoding='utf-8') as f:
            return [line.rstrip('\n') for line in f]

    @classmethod
    def write_config(cls, name, values):
        path = cls.path(name)
        with io.open(path, 'wt', encoding='utf-8') as f:
            f.write(json.dumps(values))
        return path

    @staticmethod
    def tiny_config(vocab_size, **overrides):
        """A model small enough to train in a unit test."""

        values = dict(n_layer=1, n_head=2, d_model=16, d_ff=32,
                      vocab_size=vocab_size, max_positions=48, dropout=0.0)
        values.update(overrides)
        return ModelConfig(**values).validate()

    @staticmethod
    def toy_vocab(lines):
        return build_vocab(lines, 1, 50000)

    @classmethod
    def run_cbart(cls, args, environ=None):
        """Runs one cbart subcommand in process.

        :returns: (exit code, output (as unicode))"""
        stream = io.StringIO()
        code = Cbart(stream=stream).dispatch(
            args, environ if environ is not None else {'CBART_LOG': 'warn'})
        return code, stream.getvalue()
