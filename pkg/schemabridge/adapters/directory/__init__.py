"""
Exports from this adapter
"""

from .adapter import DirectorySourceAdapter  # noqa
