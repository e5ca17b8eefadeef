"""Numerics for finitely generated rational semigroups: Julia sets, pressure,
Bowen roots, conformal measures and checks of the open set condition."""
# ruff: noqa: F401
from .catalog import Region, builtin_examples, family_c0, get_example, two_map_family
from .conditions import check_osc, check_semihyperbolicity, koebe_check
from .errors import *  # noqa: F403
from .julia import (PointCloud, Viewport, approximate_julia, box_count_dimension, rasterize,
                    repelling_fixed_point)
from .measure import build_conformal_atoms, conformality_residual, geometric_ratio_report, project_measure
from .pressure import (base_point_select, bowen_root, critical_exponent_estimate, poincare_partial_sums,
                       pressure_estimate, transfer_sum)
from .rational import Polynomial, RationalMap, critical_points, poly_roots, preimages, rmap_derivative, rmap_eval
from .words import (MultiMap, PruningPolicy, build_preimage_tree, compose_apply, sample_backward_orbit,
                    skew_step, word_derivative)

__version__ = "0.1.0"
