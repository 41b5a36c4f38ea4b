"""grownet: growing recurrent control policies with neural developmental
programs, trained end to end by an evolution strategy."""

from .devgraph import DevGraph, GraphFull, init_graph
from .envs import make_env
from .es import EsConfig, EsState, es_ask, es_tell, evaluate
from .metrics import neuronal_diversity
from .ndp import GrowthConfig, InfiniteWeight, NdpLayout, develop, grow_step
from .phenotype import Policy, PolicyDiverged, compile_policy, policy_step, rollout
from .baselines import build_direct, build_one_shot, make_encoding

__version__ = "0.1.0"

__all__ = [
    "DevGraph", "GraphFull", "init_graph",
    "make_env",
    "EsConfig", "EsState", "es_ask", "es_tell", "evaluate",
    "neuronal_diversity",
    "GrowthConfig", "InfiniteWeight", "NdpLayout", "develop", "grow_step",
    "Policy", "PolicyDiverged", "compile_policy", "policy_step", "rollout",
    "build_direct", "build_one_shot", "make_encoding",
    "__version__",
]
