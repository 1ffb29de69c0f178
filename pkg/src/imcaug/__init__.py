"""Interpolation-based model checking augmented with auxiliary invariants."""

from .lang import parse, ParseError
from .encoder import build_ts
from .engine import Algo, EngineConfig, VerdictReport, run, verify

__all__ = ["parse", "ParseError", "build_ts", "Algo", "EngineConfig", "VerdictReport",
           "run", "verify"]
__version__ = "0.1.0"
