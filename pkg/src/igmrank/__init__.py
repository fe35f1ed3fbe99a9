"""Infinite generalized Mallows models for top-t rankings.

Estimation, sampling, consensus search, conjugate updates and clustering
for orderings over an unbounded item universe.
"""
from .bayes import PriorHyper, map_sigma, posterior_update, sigma_log_score, validate_prior
from .clustering import Clustering, classification_error, ebms, em_mixture, kmeans, solve_scale
from .consensus import bbound_r, greedy_search, local_search, search, sort_rows
from .data import RankingDataset, generate_mixture, load_rankings, save_rankings
from .estimation import FitResult, bic_select, fit_general_theta, fit_single_theta, fit_tied
from .model import IGMParams, ThetaVector, log_likelihood, log_prob, psi, sample
from .rankings import CentralOrdering, codes_of, d_theta, kendall_topt, ordering_from_codes
from .stats import SuffStats, accumulate, lower_triangle_cost, weighted_combine

__version__ = "0.1.0"
