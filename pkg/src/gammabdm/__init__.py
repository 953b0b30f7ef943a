"""Symbol calculus and ellipticity checks for shift-generated transmission problems."""
__version__ = "0.1.0"
