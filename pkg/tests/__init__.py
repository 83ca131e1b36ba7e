"""Test package for randchol."""
