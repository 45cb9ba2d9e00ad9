# This file makes the app directory a Python package
__version__ = "1.0.0"
