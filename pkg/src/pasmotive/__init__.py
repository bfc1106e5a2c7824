"""Definable sets in Pas's language, their p-adic volumes, and orbital
integrals over definable families, with exact Laurent-polynomial fits in q."""

from .formula import Formula, Sort, Var
from .measure import DefinableSet, VolumeResult, stability_level, stable_volume, volume_exact, volume_montecarlo
from .models import TriBool, eval_residue, eval_valued
from .orbital import OrbitalProblem, load_problem, motive_proxy, orbital_integral
from .parser import parse, parse_source, serialize
from .presburger import decide_bounded, eliminate_quantifiers, enumerate_solutions, uniform_bound
from .qpoly import QPolynomial, fit_laurent
from .separation import separate

__version__ = "0.1.0"

__all__ = [
    "DefinableSet",
    "Formula",
    "OrbitalProblem",
    "QPolynomial",
    "Sort",
    "TriBool",
    "Var",
    "VolumeResult",
    "decide_bounded",
    "eliminate_quantifiers",
    "enumerate_solutions",
    "eval_residue",
    "eval_valued",
    "fit_laurent",
    "load_problem",
    "motive_proxy",
    "orbital_integral",
    "parse",
    "parse_source",
    "separate",
    "serialize",
    "stability_level",
    "stable_volume",
    "uniform_bound",
    "volume_exact",
    "volume_montecarlo",
]
