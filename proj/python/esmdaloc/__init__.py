# (C) Copyright 2026 The esmdaloc Authors
#
# This software is licensed under the terms of the Apache Licence Version 2.0
# which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.

"""ES-MDA with localization.

Ensembles are numpy arrays with one member per column (parameters x members,
data x members).
"""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401

__version__ = "0.1.0"
