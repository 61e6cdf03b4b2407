"""
Exports from this adapter
"""

from .adapter import MemorySourceAdapter  # noqa
