# UI base class
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

import logging
import os
import sys
import threading
import traceback
from collections import deque
from queue import Queue

import cbart
from cbart.error import CbartError

debugtypes = {'keywords': 'Keyword extraction',
              'synth': 'Synthetic dataset construction',
              'train': 'Training loop and optimizer',
              'refine': 'Refinement steps during generation',
              'thread': 'Threading debugging'}

# Values accepted in the CBART_LOG environment variable.
LOGLEVELS = {'error': logging.ERROR,
             'warn': logging.WARNING,
             'info': logging.INFO,
             'debug': logging.DEBUG}

globalui = None
_globalui_lock = threading.Lock()

def setglobalui(newui):
    """Set the global ui object to be used for logging."""

    global globalui
    globalui = newui

def getglobalui():
    """Return the current ui object.

    Library code and the test-suite may run without the command line
    front door; in that case a quiet UI is installed on first use."""

    global globalui
    if globalui is None:
        with _globalui_lock:
            if globalui is None:
                from cbart.ui.Noninteractive import Quiet
                globalui = Quiet()
    return globalui

def loglevel_from_env(environ=None):
    """Map CBART_LOG to a logging level, INFO when unset."""

    environ = os.environ if environ is None else environ
    value = environ.get('CBART_LOG', 'info').strip().lower()
    if value not in LOGLEVELS:
        raise CbartError("CBART_LOG must be one of %s, not '%s'"%
            (', '.join(sorted(LOGLEVELS)), value), CbartError.ERROR.USAGE)
    return LOGLEVELS[value]


class UIBase(object):
    def __init__(self, loglevel=logging.INFO, stream=None):
        self.debuglist = []
        # debugmessages in a deque(v) per thread(k)
        self.debugmessages = {}
        self.debugmsglen = 15
        self.logfile = None
        self.exc_queue = Queue()
        # saves all occuring exceptions, so we can output them at the end
        self.stream = stream if stream is not None else sys.stdout
        self.logger = logging.getLogger('cbart')
        self.logger.setLevel(loglevel)
        self.logger.propagate = False
        if loglevel <= logging.DEBUG:
            self.debuglist = list(debugtypes)
        self._log_con_handler = self.setup_consolehandler()
        """The console handler (we need access to be able to lock it)."""

    ################################################## UTILS
    def setup_consolehandler(self):
        """Backend specific console handler.

        Sets up things and adds them to self.logger. Handlers left
        behind by a previous UI object are dropped.
        :returns: The logging.Handler() for console output"""

        for handler in list(self.logger.handlers):
            self.logger.removeHandler(handler)
        ch = logging.StreamHandler(self.stream)
        self.formatter = logging.Formatter("%(message)s")
        ch.setFormatter(self.formatter)
        self.logger.addHandler(ch)
        return ch

    def setlogfile(self, logfile):
        """Create file handler which logs to file."""

        fh = logging.FileHandler(logfile, 'at')
        file_formatter = logging.Formatter("%(asctime)s %(levelname)s: "
            "%(message)s", '%Y-%m-%d %H:%M:%S')
        fh.setFormatter(file_formatter)
        self.logger.addHandler(fh)
        self.logfile = logfile
        p_ver = ".".join([str(x) for x in sys.version_info[0:3]])
        msg = "cbart %s starting...\n  Python: %s Platform: %s\n  "\
              "Args: %s"% (cbart.__version__, p_ver, sys.platform,
                            " ".join(sys.argv))
        record = logging.LogRecord('cbart', logging.INFO, __file__,
                                   None, msg, None, None)
        fh.emit(record)

    def info(self, msg):
        """Display a message."""

        self.logger.info(msg)

    def warn(self, msg):
        self.logger.warning(msg)

    def error(self, exc, exc_traceback=None, msg=None):
        """Log a message at severity level ERROR.

        Log Exception 'exc' to error log, possibly prepended by a preceding
        error "msg", detailing at what point the error occurred.

        The exception is also queued so terminate() can repeat every
        failure of the run at the end. One example of such a call:

           ui.error(exc, sys.exc_info()[2], msg="While training epoch 3")
        """
        if msg:
            self.logger.error("ERROR: %s\n  %s"% (msg, exc))
        else:
            self.logger.error("ERROR: %s"% (exc))

        # push exc on the queue for later output
        self.exc_queue.put((msg, exc, exc_traceback))
        if exc_traceback and self.debuglist:
            self.logger.error("".join(traceback.format_tb(exc_traceback)))

    def debug(self, debugtype, msg):
        cur_thread = threading.current_thread()
        if not cur_thread in self.debugmessages:
            self.debugmessages[cur_thread] = deque(maxlen=self.debugmsglen)
        self.debugmessages[cur_thread].append("%s: %s" % (debugtype, msg))

        if debugtype in self.debuglist: # log if we are supposed to do so
            self.logger.debug("[%s]: %s" % (debugtype, msg))

    ################################################## MESSAGES

    def init_banner(self):
        """Called when the command line front door starts."""

        self.logger.info(cbart.banner)

    def summary(self, line):
        """The one-line result of a subcommand, always shown."""

        self.stream.write("%s\n"% line)
        self.stream.flush()

    def epoch_done(self, epoch, train_loss, valid_loss):
        if not self.logger.isEnabledFor(logging.INFO): return
        if valid_loss is None:
            self.logger.info("Epoch %d: train %.4f"% (epoch, train_loss))
        else:
            self.logger.info("Epoch %d: train %.4f, valid %.4f"%
                (epoch, train_loss, valid_loss))

    def checkpoint_saved(self, path):
        self.debug('train', "Wrote checkpoint %s"% path)

    def case_generated(self, index, keywords, result):
        self.debug('refine', "Case %d %s -> '%s' (%d steps)"%
            (index, keywords, result.text, result.steps))

    def getThreadDebugLog(self, thread):
        if thread in self.debugmessages:
            message = "\nLast %d debug messages logged for %s prior to exception:\n"\
                       % (len(self.debugmessages[thread]), thread.name)
            message += "\n".join(self.debugmessages[thread])
        else:
            message = "\nNo debug messages were logged for %s."% \
                thread.name
        return message

    def threadException(self, thread):
        """Called when a worker thread has terminated with an exception."""

        self.debug('thread', "Thread '%s' terminated with exception:\n%s%s"%
            (thread.name, thread.exit_stacktrace,
             self.getThreadDebugLog(thread)))
        self.debugmessages.pop(thread, None)

    def terminate(self, exitstatus=0, errormsg=None):
        """Called at the end of a subcommand.

        :returns: the exit status the process should report."""

        if not self.exc_queue.empty():
            self.warn("ERROR: Exceptions occurred during the run!")
            if exitstatus == 0:
                exitstatus = 2
        while not self.exc_queue.empty():
            msg, exc, exc_traceback = self.exc_queue.get()
            if msg:
                self.warn("ERROR: %s\n  %s"% (msg, exc))
            else:
                self.warn("ERROR: %s"% (exc))
            if exc_traceback and self.debuglist:
                self.warn("\nTraceback:\n%s"% "".join(
                        traceback.format_tb(exc_traceback)))
        if errormsg:
            self.warn('%s\n'% errormsg)
        return exitstatus
