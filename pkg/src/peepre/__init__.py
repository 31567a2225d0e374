"""Precondition inference for peephole rewrites over bitvectors."""
from .driver import InferConfig, InferReport, generalize, infer, search
from .dsl import load, parse_optimization, parse_predicate
from .verify import ExhaustiveBackend

__all__ = ["InferConfig", "InferReport", "ExhaustiveBackend", "generalize", "infer", "load",
           "parse_optimization", "parse_predicate", "search"]
