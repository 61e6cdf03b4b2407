"""
Public interface exports
"""
from .mediator import BaseMediator  # noqa
