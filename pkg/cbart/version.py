__productname__ = 'cbart'
# Expecting trailing "-rcN" or "" for stable releases.
__version__     = "0.3.0"
__copyright__   = "Copyright 2026 cbart contributors"
__author__      = "cbart contributors"
__author_email__= ""
__description__ = "Lexically constrained text generation by parallel refinement"
__license__  = "Licensed under the GNU GPL v2 or any later version"
__bigcopyright__ = """%(__productname__)s %(__version__)s
  %(__license__)s""" % locals()
__homepage__ = None

banner = __bigcopyright__
