"""Spectral method-of-moments learning for hidden Markov models."""

from .ahk import AhkEstimate, learn_ahk, retry_policy
from .baum_welch import BwConfig, BwEstimate, baum_welch, forward_backward
from .binning import BinSpec, bin_sequence, quantile_bounds, simple_binning
from .errors import (DegenerateMoments, DegenerateQuantiles, DivisionGuard,
                     SpectralError, SpectralInstability)
from .hkz import HkzEstimate, learn_hkz
from .hmm import (HmmModel, TripleSet, builtin_model, load_model, sample_sequence,
                  sample_triples, save_model, sequence_log_likelihood, validate_model)
from .moments import MomentSet, analytic_moments, estimate_moments

__version__ = "0.1.0"
