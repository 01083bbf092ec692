"""Broad-phonetic-class guided speech enhancement."""
__version__ = "0.1.0"
