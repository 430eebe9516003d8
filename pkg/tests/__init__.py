"""Tests package for PCKD."""
