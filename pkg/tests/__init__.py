"""
Use ``tox`` to run these unit tests (alternatively, use ``pytest`` or
``python -m unittest discover tests``).
"""
