"""Lexer, parser, resolver and printer for the mini-Jac dialect."""

from . import ast
from .parser import parse, resolve
from .printer import pretty_print

__all__ = ["ast", "parse", "resolve", "pretty_print"]
