"""Suicidal-ideation classification from acoustic and linguistic features of speech."""

__version__ = "0.1.0"
