"""Python access to the gamma_elliptic surface finite element solver."""

import json

from ._core import (
    Error,
    ParseError,
    builtin_cases,
    evaluate,
    mesh_summary,
    solve_builtin,
)
from . import _core

__all__ = [
    "Error",
    "ParseError",
    "builtin_cases",
    "check_conditions",
    "convergence_study",
    "evaluate",
    "mesh_summary",
    "solve_builtin",
]


def convergence_study(name, levels=4, start_resolution=-1):
    """Runs a convergence study on a builtin case and returns the report as a dict."""
    return json.loads(_core.study_json(name, levels, start_resolution))


def check_conditions(name, resolution=2):
    """Well-posedness checks for the coefficients of a builtin case."""
    return json.loads(_core.conditions_json(name, resolution))
