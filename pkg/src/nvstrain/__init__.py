"""Strain-resolved zero-field ODMR modelling for single NV centers."""
__version__ = "0.1.0"
