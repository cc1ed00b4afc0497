"""Splitting multi-label data sets into size-exact, label-stratified folds."""

__version__ = "0.1.0"
