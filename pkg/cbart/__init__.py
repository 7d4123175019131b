__all__ = ['Cbart']

from cbart.version import (
        __productname__,
        __version__,
        __copyright__,
        __author__,
        __author_email__,
        __description__,
        __license__,
        __bigcopyright__,
        __homepage__,
        banner
        )

from cbart.error import CbartError
# put this last, so we don't run into circular dependencies using
# e.g. cbart.__version__.
from cbart.init import Cbart
