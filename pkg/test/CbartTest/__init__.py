# cbart test library
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

__all__ = ['CbartTestLib', 'TextTestRunner', 'TestLoader', 'toy_corpus',
           'pseudo_word', 'SLOW']

__productname__ = 'cbart Test suite'
__version__     = '0'
__copyright__   = "Copyright 2026 cbart contributors"
__license__  = "Licensed under the GNU GPL v2+ (v2 or any later version)"

import os
import unittest
from unittest import TestLoader, TextTestRunner
from .globals import toy_corpus, pseudo_word
from .TestRunner import CbartTestLib

# Long training runs only execute when asked for.
SLOW = os.environ.get('CBART_SLOW', '') == '1'
