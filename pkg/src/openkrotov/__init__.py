"""Krotov optimal control for open quantum systems."""
