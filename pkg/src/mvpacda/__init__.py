"""PAC-Bayesian bounds for multi-view domain adaptation with majority votes."""

from .measures import Categorical, kl_bernoulli, kl_categorical, renyi_divergence
from .domains import FiniteDomain, SampleSet, Schema, draw_sample, synth_shift_pair
from .voters import PosteriorEnsemble, ViewHypothesisSet, Voter, build_stump_grid
from .bounds import BoundParams, BoundReport

__version__ = "0.1.0"
