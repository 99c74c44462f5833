"""Weighted model integration for hybrid probabilistic models by algebraic model counting."""

from .compiler import DdnnfCircuit, compile_formula, model_count, smooth, verify_ddnnf
from .formula import AbstractionMap, Formula, NraAtom, WeightSpec, abstract, canonicalize_atom, eval_formula
from .integrate import WmiResult, attach_densities, integrate
from .model import Model, parse_model
from .pipeline import load_file, solve_file, solve_query, solve_wmi
from .semiring import SemiringElement, amc_evaluate, density_labeling, oplus, otimes

__version__ = "0.1.0"

__all__ = [
    "AbstractionMap", "DdnnfCircuit", "Formula", "Model", "NraAtom", "SemiringElement", "WeightSpec", "WmiResult",
    "abstract", "amc_evaluate", "attach_densities", "canonicalize_atom", "compile_formula", "density_labeling",
    "eval_formula", "integrate", "load_file", "model_count", "oplus", "otimes", "parse_model", "smooth",
    "solve_file", "solve_query", "solve_wmi", "verify_ddnnf",
]
