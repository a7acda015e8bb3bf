"""edgeplanner: service-usage prediction and MEC offloading simulation.

License
-------
This file is part of edgeplanner
BSD 3-Clause License
"""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("edgeplanner")
except PackageNotFoundError:
    __version__ = "0.0.0"
