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
import logging
import threading
import time
import unittest

from cbart import threadutil
from cbart.error import CbartError
from cbart.ui import Noninteractive, setglobalui, getglobalui, \
    loglevel_from_env


class TestParallelMap(unittest.TestCase):

    def setUp(self):
        threadutil.init_instance_limit('test', 3)

    def test_01_results_in_item_order(self):
        def slow_square(index, item):
            time.sleep(0.01 * (5 - index))
            return item * item
        self.assertEqual(threadutil.parallel_map(slow_square, range(5),
                                                 'test'),
                         [0, 1, 4, 9, 16])

    def test_02_empty(self):
        self.assertEqual(threadutil.parallel_map(None, [], 'test'), [])

    def test_03_first_failure_by_index(self):
        def fail_odd(index, item):
            if index % 2:
                time.sleep(0.01 * (5 - index))
                raise CbartError("item %d"% index, CbartError.ERROR.DATA)
            return index
        with self.assertRaises(CbartError) as cm:
            threadutil.parallel_map(fail_odd, range(5), 'test')
        self.assertEqual(cm.exception.reason, "item 1")

    def test_04_limit(self):
        threadutil.init_instance_limit('one', 1)
        lock = threading.Lock()
        state = {'running': 0, 'peak': 0}

        def work(index, item):
            with lock:
                state['running'] += 1
                state['peak'] = max(state['peak'], state['running'])
            time.sleep(0.005)
            with lock:
                state['running'] -= 1
        threadutil.parallel_map(work, range(4), 'one')
        self.assertEqual(state['peak'], 1)


class TestUI(unittest.TestCase):

    def tearDown(self):
        setglobalui(None)

    def test_01_loglevel(self):
        self.assertEqual(loglevel_from_env({}), logging.INFO)
        self.assertEqual(loglevel_from_env({'CBART_LOG': ' Debug '}),
                         logging.DEBUG)
        with self.assertRaises(CbartError) as cm:
            loglevel_from_env({'CBART_LOG': 'chatty'})
        self.assertEqual(cm.exception.exitcode, 1)

    def test_02_terminate_reports_queued_errors(self):
        stream = io.StringIO()
        ui = Noninteractive.Basic(logging.WARNING, stream)
        ui.error(CbartError("boom", CbartError.ERROR.RUNTIME))
        self.assertEqual(ui.terminate(0), 2)
        self.assertIn("boom", stream.getvalue())
        self.assertEqual(ui.terminate(0), 0)

    def test_03_quiet(self):
        stream = io.StringIO()
        ui = Noninteractive.Quiet(logging.DEBUG, stream)
        ui.info("hidden")
        ui.summary("hidden too")
        ui.warn("shown")
        self.assertEqual(stream.getvalue(), "shown\n")

    def test_04_default_global_ui(self):
        setglobalui(None)
        self.assertIsInstance(getglobalui(), Noninteractive.Quiet)

    def test_05_thread_debug_log(self):
        ui = Noninteractive.Basic(logging.WARNING, io.StringIO())
        setglobalui(ui)

        def failing(index, item):
            ui.debug('thread', "about to fail")
            raise ValueError("bad item")
        self.assertRaises(ValueError, threadutil.parallel_map, failing, [1])
        # the worker log is dropped once reported
        self.assertEqual([t.name for t in ui.debugmessages],
                         [threading.current_thread().name])
