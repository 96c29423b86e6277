"""prunemip: train, prune, bound, and globally optimize ReLU surrogate networks.

The pipeline: train a dense masked ReLU regressor, prune it (unstructured
weights or structured nodes), propagate interval-arithmetic big-M bounds,
encode the network as a big-M MILP, and solve it to proven optimality with
an internal branch-and-bound engine.
"""

from .bounds import (BoundsTable, check_monotone_tightening, check_strict_tightening,
                     propagate_ia, width_identity_check, width_summary)
from .data import Dataset, latin_hypercube, load_csv, make_peaks_dataset, mape, peaks, \
    save_csv, split_dataset
from .milp import (MilpModel, ObjectiveSpec, PresolveStats, encode_bigm, export_lp,
                   export_mps, lp_relaxation, parse_constraint_spec, parse_objective)
from .network import (AffineScaling, DenseLayer, MaskedNetwork, layer_from_arrays,
                      load_network, relu, save_network)
from .prune import (PruneConfig, clean_dead_neurons, effective_rate, iterative_prune,
                    node_sparsity, num_iterations, prune_nodes_step, prune_to_sparsity,
                    prune_weights_step)
from .solve import (MilpSolution, SolveLimits, SolveStats, branch_and_bound, root_gap,
                    simplex_solve)
from .train import (AdamState, TrainConfig, adam_step, initialize_network,
                    loss_and_gradients, train_to_convergence)

__version__ = "0.1.0"

__all__ = [
    "AdamState", "AffineScaling", "BoundsTable", "Dataset", "DenseLayer",
    "MaskedNetwork", "MilpModel", "MilpSolution", "ObjectiveSpec", "PresolveStats",
    "PruneConfig", "SolveLimits", "SolveStats", "TrainConfig",
    "adam_step", "branch_and_bound", "check_monotone_tightening",
    "check_strict_tightening", "clean_dead_neurons", "effective_rate", "encode_bigm",
    "export_lp", "export_mps", "initialize_network", "iterative_prune",
    "latin_hypercube", "layer_from_arrays", "load_csv", "load_network",
    "loss_and_gradients", "lp_relaxation", "make_peaks_dataset", "mape",
    "node_sparsity", "num_iterations", "parse_constraint_spec", "parse_objective",
    "peaks", "propagate_ia", "prune_nodes_step", "prune_to_sparsity",
    "prune_weights_step", "relu", "root_gap", "save_csv", "save_network",
    "simplex_solve", "split_dataset", "train_to_convergence", "width_identity_check",
    "width_summary",
]
