"""Haar-tree value approximation and adaptive multiscale TD learning."""

from .approximation import ThresholdResult, best_m_term, reconstruct_S, term_count, threshold, tree_error
from .baselines import ATCConfig, ATCTree, TileCoder, atc_learn
from .dyadic import DyadicCube, ProperTree, children, complete_to_proper_tree, locate, parent, root
from .envs import Acrobot, CartPole, ChainMDP, DyadicStepMRP, chain_mdp, make_env
from .errors import (
    ConfigError,
    DivergenceError,
    DomainError,
    GMSAError,
    LevelError,
    NoParentError,
    PhaseTimeoutError,
    SingularSystemError,
)
from .refinement import GMSAConfig, GMSAReport, refine_basis, run_gmsa
from .td import AtomBasis, PhaseMonitor, TabularBasis, TDState, td_fixed_point_oracle, td_step
from .wavelets import CoeffTree, DyadicStep, WaveletAtom, decompose, detail_Qj, eval_atom, project_Pj

__version__ = "0.1.0"

__all__ = [
    "ATCConfig",
    "ATCTree",
    "Acrobot",
    "AtomBasis",
    "CartPole",
    "ChainMDP",
    "CoeffTree",
    "ConfigError",
    "DivergenceError",
    "DomainError",
    "DyadicCube",
    "DyadicStep",
    "DyadicStepMRP",
    "GMSAConfig",
    "GMSAError",
    "GMSAReport",
    "LevelError",
    "NoParentError",
    "PhaseMonitor",
    "PhaseTimeoutError",
    "ProperTree",
    "SingularSystemError",
    "TDState",
    "TabularBasis",
    "ThresholdResult",
    "TileCoder",
    "WaveletAtom",
    "atc_learn",
    "best_m_term",
    "chain_mdp",
    "children",
    "complete_to_proper_tree",
    "decompose",
    "detail_Qj",
    "eval_atom",
    "locate",
    "make_env",
    "parent",
    "project_Pj",
    "reconstruct_S",
    "refine_basis",
    "root",
    "run_gmsa",
    "td_fixed_point_oracle",
    "td_step",
    "term_count",
    "threshold",
    "tree_error",
]
