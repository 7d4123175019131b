# Copyright (C) 2026 cbart contributors
# Thread support module
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

from threading import Lock, Thread, BoundedSemaphore
import traceback

import six

from cbart.ui import getglobalui


WORKER_NAMESPACE = 'MAX_WORKERS'

######################################################################
# General utilities
######################################################################

class workerThreads(object):
    """Store the worker threads of one parallel_map() call in start
    order so they can be joined deterministically."""

    def __init__(self):
        self.lock = Lock()
        self.list = []

    def add(self, thread):
        with self.lock:
            self.list.append(thread)

    def wait(self):
        with self.lock:
            threads = list(self.list)
        for thread in threads:
            thread.join()
        return threads


######################################################################
# Exit-notify threads
######################################################################

class ExitNotifyThread(Thread):
    """A daemon thread that remembers how it ended.

    The return value of the target is kept in self.result; an exception
    and its formatted stack trace are kept instead if the target
    raised."""

    def __init__(self, *args, **kwargs):
        super(ExitNotifyThread, self).__init__(*args, **kwargs)
        # These are all child threads that are supposed to go away when
        # the main thread is killed.
        self.daemon = True
        self.result = None
        self._exit_exc = None
        self._exit_excinfo = None
        self._exit_stacktrace = None

    def run(self):
        """Store the result or the exception of the target."""

        try:
            if self._target is not None:
                self.result = self._target(*self._args, **self._kwargs)
        except Exception as e:
            self.set_exit_exception(e, traceback.format_exc(),
                                    e.__traceback__)
        finally:
            del self._target, self._args, self._kwargs

    def set_exit_exception(self, exc, st=None, tb=None):
        """Sets Exception and stacktrace of a thread, so that other
        threads can query its exit status"""

        self._exit_exc = exc
        self._exit_stacktrace = st
        self._exit_excinfo = tb

    @property
    def exit_exception(self):
        """Returns the cause of the exit, one of:
        Exception() -- the thread aborted with this exception
        None -- normal termination."""

        return self._exit_exc

    @property
    def exit_stacktrace(self):
        """Returns a string representing the stack trace if set"""

        return self._exit_stacktrace


######################################################################
# Instance-limited threads
######################################################################

limitedNamespaces = {}
_namespaces_lock = Lock()

def init_instance_limit(limitNamespace, instancemax):
    """Initialize the instance-limited thread implementation.

    Run up to instancemax threads for the given limitNamespace. Calling
    it again with another value replaces the limit; this honors the
    --threads flag of every subcommand."""

    if instancemax < 1:
        instancemax = 1
    with _namespaces_lock:
        limitedNamespaces[limitNamespace] = BoundedSemaphore(instancemax)


class InstanceLimitedThread(ExitNotifyThread):
    def __init__(self, limitNamespace, *args, **kwargs):
        self.limitNamespace = limitNamespace
        super(InstanceLimitedThread, self).__init__(*args, **kwargs)

    def start(self):
        if self.limitNamespace not in limitedNamespaces:
            init_instance_limit(self.limitNamespace, 1)
        # Will block until the semaphore has free slots.
        limitedNamespaces[self.limitNamespace].acquire()
        ExitNotifyThread.start(self)

    def run(self):
        try:
            ExitNotifyThread.run(self)
        finally:
            limitedNamespaces[self.limitNamespace].release()


def parallel_map(func, items, namespace=WORKER_NAMESPACE, name='worker'):
    """Call func(index, item) for every item, at most as many at once as
    the namespace allows.

    :returns: the list of results in item order. The first failing item
              (by index, not by time) has its exception re-raised here
              once all workers are done."""

    items = list(items)
    if not items:
        return []
    if namespace not in limitedNamespaces:
        init_instance_limit(namespace, 1)

    threads = workerThreads()
    for index, item in enumerate(items):
        thread = InstanceLimitedThread(namespace, target=func,
            args=(index, item), name="%s %d"% (name, index))
        # start() blocks while the namespace is saturated.
        thread.start()
        threads.add(thread)
    finished = threads.wait()

    ui = getglobalui()
    for thread in finished:
        if thread.exit_exception is not None:
            ui.threadException(thread)
    for thread in finished:
        if thread.exit_exception is not None:
            six.reraise(type(thread.exit_exception), thread.exit_exception,
                        thread._exit_excinfo)
    return [thread.result for thread in finished]
