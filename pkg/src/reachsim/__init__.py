"""Trainable muscle-arm simulation framework for prototyping pointing and
button-pressing interaction tasks."""

__version__ = "0.1.0"
