"""Symbol calculus: parsing, hypotheses, quartic symbols, resonance regions, division."""
from .division import (DivisionError, DivisionPair, check_resonant_vanishing, divide,
                       localized_division, size_constants)
from .expr import EvaluationError, ParseError
from .quartic import (QuarticSymbol, delta4, delta4_sq, energy_bilinear, localized_quartic,
                      mass_bilinear, momentum_bilinear, quartic_mass_symbol,
                      quartic_momentum_symbol, tilde_delta4_sq, xi_avg)
from .resonance import DEFAULT_REGIONS, RegionParams, ResonancePoint, region_weights, resonance
from .symbols import (HypothesisReport, TrilinearSymbol, check_hypotheses, constant_symbol,
                      galilean_shift, parse_symbol, read_symbol_file, symbol_from_table,
                      tabulated_symbol, write_symbol_table)

__all__ = [
    "DivisionError", "DivisionPair", "check_resonant_vanishing", "divide", "localized_division",
    "size_constants", "EvaluationError", "ParseError", "QuarticSymbol", "delta4", "delta4_sq",
    "energy_bilinear", "localized_quartic", "mass_bilinear", "momentum_bilinear",
    "quartic_mass_symbol", "quartic_momentum_symbol", "tilde_delta4_sq", "xi_avg",
    "DEFAULT_REGIONS", "RegionParams", "ResonancePoint", "region_weights", "resonance",
    "HypothesisReport", "TrilinearSymbol", "check_hypotheses", "constant_symbol", "galilean_shift",
    "parse_symbol", "read_symbol_file", "symbol_from_table", "tabulated_symbol",
    "write_symbol_table",
]
