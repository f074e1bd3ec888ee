"""Solution algorithms for the lock family."""
from .fqi import FqiConfig, fqi
from .gc import GcPolicy, LinearThreshold, erm_l0, gc_exact
from .gc_neural import GcNeuralConfig, gc_neural
from .ppo import PpoConfig, ppo
from .translated import TranslatedConfig, actor_critic_translated, fqi_translated
from .tree_search import TreeSearchPolicy, tree_search

__all__ = [
    "FqiConfig", "fqi", "GcPolicy", "LinearThreshold", "erm_l0", "gc_exact", "GcNeuralConfig",
    "gc_neural", "PpoConfig", "ppo", "TranslatedConfig", "actor_critic_translated", "fqi_translated",
    "TreeSearchPolicy", "tree_search",
]
