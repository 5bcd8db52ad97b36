"""Relational visualization engine: tables and foreign keys in, faithful SVG out."""

from .compiler import Execution, TaskGraph, compile, execute, run
from .errors import DvlError
from .faithful import FaithfulnessReport, check
from .manifest import load_manifest
from .relcore import Database, ForeignKey, Table, make_table
from .render import render
from .specmodel import PlotSpec, parse_spec, spec_from_json

__version__ = "0.1.0"

__all__ = ["Database", "DvlError", "Execution", "FaithfulnessReport", "ForeignKey", "PlotSpec", "Table",
           "TaskGraph", "check", "compile", "execute", "load_manifest", "make_table", "parse_spec", "render",
           "run", "spec_from_json", "__version__"]
