"""Comparison-limited vector quantizers built from banks of sign comparators."""

from clvq.arrangement import (
    Arrangement,
    covector,
    enumerate_regions,
    enumerate_regions_exact_2d,
    is_general_position,
    label,
    max_regions,
    max_regions_central,
    max_regions_parallel,
)
from clvq.baselines import lbg_comparator_matched, lbg_design, lbg_region_matched
from clvq.estimation import Codebook, EstimationParams, estimate_codebook, estimate_entropy, estimate_mse
from clvq.initsearch import GeneticParams, genetic_init, random_init
from clvq.optimizer import DesignReport, OptimizerParams, design, design_multi
from clvq.source import SampleStream, SourceModel, gaussian_rd, source_variance_total

__all__ = [
    "Arrangement",
    "covector",
    "enumerate_regions",
    "enumerate_regions_exact_2d",
    "is_general_position",
    "label",
    "max_regions",
    "max_regions_central",
    "max_regions_parallel",
    "lbg_comparator_matched",
    "lbg_design",
    "lbg_region_matched",
    "Codebook",
    "EstimationParams",
    "estimate_codebook",
    "estimate_entropy",
    "estimate_mse",
    "GeneticParams",
    "genetic_init",
    "random_init",
    "DesignReport",
    "OptimizerParams",
    "design",
    "design_multi",
    "SampleStream",
    "SourceModel",
    "gaussian_rd",
    "source_variance_total",
]

__version__ = "0.1.0"
