"""Symbolic interactive object search over hierarchical scene graphs."""

from .agents import AgentSpec, RandomAgent, ScoutAgent, run_episode, select_random, select_scout
from .embeddings import HashProvider, TableProvider, concat, cosine, provider_from_spec
from .environment import Environment, EpisodeSpec, replay, shortest_solution
from .harness import EpisodeRecord, SuiteReport, run_suite, spl, sr_curve, success_rate
from .occupancy import GeodesicEngine, OccupancyGrid, dilate, geodesic, geodesic_to_node, nearest_free
from .scenegraph import Affordance, EdgeKind, NodeKind, SceneGraph, SceneNode, normalize_label
from .scoring import (
    CosineBackend,
    LearnedBackend,
    NodeScore,
    ScoringConfig,
    TableBackend,
    preset,
    score_all,
    update_object_score,
)

__version__ = "0.1.0"

__all__ = [
    "AgentSpec", "Affordance", "CosineBackend", "EdgeKind", "Environment",
    "EpisodeRecord", "EpisodeSpec", "GeodesicEngine", "HashProvider",
    "LearnedBackend", "NodeKind", "NodeScore", "OccupancyGrid", "RandomAgent",
    "SceneGraph", "SceneNode", "ScoringConfig", "ScoutAgent", "SuiteReport",
    "TableBackend", "TableProvider", "concat", "cosine", "dilate", "geodesic",
    "geodesic_to_node", "nearest_free", "normalize_label", "preset",
    "provider_from_spec", "replay", "run_episode", "run_suite", "score_all",
    "select_random", "select_scout", "shortest_solution", "spl", "sr_curve",
    "success_rate", "update_object_score",
]
