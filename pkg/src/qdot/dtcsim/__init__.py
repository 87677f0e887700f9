"""Discrete time crystal simulator for short driven spin chains"""

try:
    from .version import version

    __version__ = version
except ImportError:
    __version__ = "0.0.0"

TOOL_NAME = "qdot-dtcsim"
