"""Coresets for Nadaraya-Watson kernel regression."""

__version__ = '0.1.0'
