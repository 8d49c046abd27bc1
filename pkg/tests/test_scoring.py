import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenesearch.embeddings import HashProvider
from scenesearch.environment import Environment, EpisodeSpec
from scenesearch.relational import init_model
from scenesearch.scoring import (
    CosineBackend,
    LearnedBackend,
    PRESETS,
    ScoringConfig,
    ScoringError,
    TableBackend,
    preset,
    score_all,
    score_frontier,
    score_object,
    score_room,
    update_object_score,
)

from helpers import build_scene, obj

unit_floats = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


class TestConfig:
    def test_shipped_defaults(self):
        config = ScoringConfig()
        assert config.default_room_score == 0.7
        assert config.default_frontier_score == 0.6
        assert config.delta == 0.1
        assert config.w == 0.3

    def test_file_round_trip(self, tmp_path):
        config = ScoringConfig(w=0.4, delta=0.05, frontier_aggregate="mean")
        path = tmp_path / "config.json"
        config.save(path)
        assert ScoringConfig.load(path) == config

    def test_presets_exist_and_override(self):
        assert set(PRESETS) == {"default", "sim-narrow", "sim-wide", "hash"}
        assert preset("sim-narrow").default_room_score == 0.3
        assert preset("sim-narrow").default_frontier_score == 0.25
        assert preset("sim-wide").default_frontier_score == 0.4
        assert preset("hash", delta=0.2).delta == 0.2

    def test_unknown_preset(self):
        with pytest.raises(ValueError, match="unknown preset"):
            preset("frobnicate")

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            ScoringConfig(w=1.5)
        with pytest.raises(ValueError):
            ScoringConfig(frontier_aggregate="median")


PLANTED = TableBackend(
    contain={("kitchen", "plate"): 0.78, ("living room", "plate"): 0.30},
    cooccur={("cabinet", "plate"): 0.94, ("sofa", "plate"): 0.00},
)


class TestBackends:
    def test_table_returns_planted_values_exactly(self):
        assert score_room(PLANTED, "kitchen", "plate") == 0.78
        assert score_object(PLANTED, "cabinet", "plate") == 0.94

    def test_table_normalizes_lookups(self):
        assert PLANTED.score_room(" Kitchen ", "Plate") == 0.78

    def test_table_missing_pair_raises_without_default(self):
        with pytest.raises(ScoringError, match="no planted"):
            PLANTED.score_object("rug", "plate")

    def test_table_default_fallback(self):
        backend = TableBackend(contain={}, cooccur={}, default=0.25)
        assert backend.score_object("rug", "plate") == 0.25

    def test_table_reflexive_rule(self):
        backend = TableBackend(contain={}, cooccur={}, default=0.1, reflexive=True)
        assert backend.score_object("plate", "plate") == 1.0
        assert backend.score_object("rug", "plate") == 0.1

    def test_table_round_trip(self, tmp_path):
        path = tmp_path / "tables.json"
        PLANTED.save(path)
        loaded = TableBackend.load(path)
        assert loaded.contain == PLANTED.contain
        assert loaded.cooccur == PLANTED.cooccur

    def test_cosine_self_query_is_one(self):
        backend = CosineBackend(HashProvider(seed=0))
        assert backend.score_room("kitchen", "kitchen") == 1.0

    def test_cosine_symmetric(self):
        backend = CosineBackend(HashProvider(seed=0))
        assert backend.score_object("sofa", "plate") == backend.score_object("plate", "sofa")

    def test_cosine_in_unit_interval(self):
        backend = CosineBackend(HashProvider(seed=1))
        rng = np.random.default_rng(2)
        for _ in range(50):
            value = backend.score_object(f"a {rng.integers(100)}", f"b {rng.integers(100)}")
            assert 0.0 <= value <= 1.0

    def test_learned_zero_weights_score_half(self):
        provider = HashProvider(seed=0, dim=8)
        cooccur = init_model("cooccur", 8, seed=0)
        contain = init_model("contain", 8, seed=0)
        for model in (cooccur, contain):
            for w in model.weights:
                w[:] = 0.0
        backend = LearnedBackend(provider, cooccur, contain)
        assert backend.score_object("cabinet", "plate") == 0.5
        assert backend.score_room("kitchen", "plate") == 0.5

    def test_learned_wrong_slot_rejected(self):
        provider = HashProvider(seed=0, dim=8)
        contain = init_model("contain", 8, seed=0)
        with pytest.raises(ScoringError, match="slot"):
            LearnedBackend(provider, contain, contain)

    def test_learned_dim_mismatch_rejected(self):
        provider = HashProvider(seed=0, dim=8)
        with pytest.raises(ScoringError, match="dim"):
            LearnedBackend(provider, init_model("cooccur", 4, seed=0),
                           init_model("contain", 8, seed=0))


class TestUpdateRule:
    def test_reference_values(self):
        assert update_object_score(0.78, 0.94, 0.3) == pytest.approx(0.74724)
        assert update_object_score(0.30, 0.94, 0.3) == pytest.approx(0.2874)

    def test_full_room_weight_collapses_to_room_score(self):
        for u_obj in (0.0, 0.3, 1.0):
            assert update_object_score(0.6, u_obj, 1.0) == 0.6

    def test_disabled_influence_returns_object_score(self):
        assert update_object_score(0.9, 0.42, 0.3, room_influence=False) == 0.42

    @given(unit_floats, unit_floats, unit_floats)
    def test_range_closure(self, u_room, u_obj, w):
        assert 0.0 <= update_object_score(u_room, u_obj, w) <= 1.0

    @given(st.floats(1e-9, 1.0), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
    @settings(max_examples=50)
    def test_monotone_in_object_score(self, u_room, u_obj, w):
        # u_room floor keeps the product out of the denormal range, where
        # float multiplication cannot preserve strict ordering
        lower = update_object_score(u_room, u_obj * 0.5, w)
        upper = update_object_score(u_room, u_obj, w)
        assert upper > lower

    def test_out_of_range_input_rejected(self):
        with pytest.raises(ScoringError):
            update_object_score(1.2, 0.5, 0.3)


def spawn_with(scene, goal, query, required_node) -> Environment:
    """Environment whose seeded spawn reveals ``required_node``."""
    for seed in range(32):
        spec = EpisodeSpec(scene_id=scene.scene_id, goal=goal, query=query, spawn_seed=seed)
        env = Environment(scene, spec)
        if required_node in env.reset().revealed:
            return env
    raise AssertionError("no spawn seed reveals the required node")


def kitchen_environment():
    """Spawned kitchen with a cabinet, plus a closed door to a second room."""
    scene = build_scene(
        rooms=[
            {"category": "kitchen", "position": (1.0, 1.0),
             "regions": [[obj("cabinet", (1.0, 1.0), "on", nested=[("plate", "inside")])]]},
            {"category": "pantry", "position": (5.0, 1.0),
             "regions": [[obj("shelf", (5.0, 1.0))]]},
        ],
        doors=[(0, 1, (3.0, 1.0))],
    )
    env = spawn_with(scene, scene.ids["plate"], "plate", scene.ids["cabinet"])
    return scene, env


class TestScoreAll:
    def test_reference_observation_scores(self):
        scene, env = kitchen_environment()
        observation = env.observation()
        scores = score_all(PLANTED, "plate", observation, ScoringConfig())
        kitchen = scene.room_ids[0]
        cabinet = scene.ids["cabinet"]
        pantry = scene.room_ids[1]
        assert scores[kitchen].updated == 0.78
        assert scores[cabinet].updated == pytest.approx(0.74724)
        assert scores[pantry].updated == 0.70
        assert scores[pantry].source == "default_room"

    def test_room_influence_ablation_uses_raw_object_score(self):
        scene, env = kitchen_environment()
        observation = env.observation()
        config = ScoringConfig(room_influence=False)
        scores = score_all(PLANTED, "plate", observation, config)
        assert scores[scene.ids["cabinet"]].updated == 0.94

    def test_ablation_invariant_to_room_scores(self):
        scene, env = kitchen_environment()
        observation = env.observation()
        config = ScoringConfig(room_influence=False)
        other = TableBackend(
            contain={("kitchen", "plate"): 0.01, ("living room", "plate"): 0.30},
            cooccur=dict(PLANTED.cooccur))
        baseline = score_all(PLANTED, "plate", observation, config)
        perturbed = score_all(other, "plate", observation, config)
        cabinet = scene.ids["cabinet"]
        assert baseline[cabinet].updated == perturbed[cabinet].updated

    def test_empty_observation_yields_empty_map(self):
        class Empty:
            frontiers = ()
            unexplored_rooms = ()

            def revealed_nodes(self):
                return iter(())

            def room_of(self, node_id):
                return None

        assert score_all(PLANTED, "plate", Empty(), ScoringConfig()) == {}

    def test_backend_errors_carry_node_context(self):
        scene, env = kitchen_environment()
        empty = TableBackend(contain={}, cooccur={})
        with pytest.raises(ScoringError, match="room node"):
            score_all(empty, "plate", env.observation(), ScoringConfig())


class TestScoreFrontier:
    def frontier_environment(self):
        """One room, two regions; the unexplored region shows as a frontier.

        The frontier centroid (2.5, 1.2) sits within the 2 m radius of the
        revealed cabinet at (1, 1).
        """
        scene = build_scene(rooms=[{
            "category": "kitchen", "position": (2.0, 1.0),
            "regions": [
                [obj("cabinet", (1.0, 1.0), "on", nested=[("plate", "inside")])],
                [obj("shelf", (2.4, 1.0)), obj("crate", (2.6, 1.4))],
            ],
        }])
        env = spawn_with(scene, scene.ids["plate"], "plate", scene.ids["cabinet"])
        return scene, env

    def test_aggregates_max_of_nearby_updated_scores(self):
        scene, env = self.frontier_environment()
        observation = env.observation()
        frontier = observation.frontiers[0]
        value = score_frontier(PLANTED, frontier, observation, ScoringConfig(), "plate")
        assert value == pytest.approx(0.74724)  # cabinet is within 2 m of the frontier

    def test_defaults_when_radius_excludes_everything(self):
        scene, env = self.frontier_environment()
        observation = env.observation()
        frontier = observation.frontiers[0]
        config = ScoringConfig(frontier_radius=0.1)
        assert score_frontier(PLANTED, frontier, observation, config, "plate") == 0.6

    def test_mean_aggregate_mode(self):
        scene, env = self.frontier_environment()
        observation = env.observation()
        frontier = observation.frontiers[0]
        config = ScoringConfig(frontier_aggregate="mean", frontier_radius=50.0)
        value = score_frontier(PLANTED, frontier, observation, config, "plate")
        assert value == pytest.approx(0.74724)  # single revealed object

    def test_scores_of_frontiers_in_score_all(self):
        scene, env = self.frontier_environment()
        observation = env.observation()
        scores = score_all(PLANTED, "plate", observation, ScoringConfig())
        frontier_id = observation.frontiers[0].id
        assert scores[frontier_id].source == "frontier_aggregate"
        assert scores[frontier_id].updated == pytest.approx(0.74724)

    def test_max_aggregation_over_several_objects(self):
        scene = build_scene(rooms=[{
            "category": "kitchen", "position": (1.0, 1.0),
            "regions": [
                [obj("mug", (0.8, 1.0)), obj("jar", (1.0, 1.2)), obj("tin", (1.2, 1.0))],
                [obj("bench", (2.0, 1.0))],
            ],
        }])
        env = spawn_with(scene, scene.ids["bench"], "plate", scene.ids["mug"])
        observation = env.observation()
        backend = TableBackend(
            contain={("kitchen", "plate"): 1.0},
            cooccur={("mug", "plate"): 0.3, ("jar", "plate"): 0.9, ("tin", "plate"): 0.5},
        )
        config = ScoringConfig(w=0.0)  # updated scores equal the raw table values
        frontier = observation.frontiers[0]
        assert score_frontier(backend, frontier, observation, config, "plate") == 0.9


class TestBackendEquivalence:
    def test_trained_scorer_ranks_like_the_planted_tables(self):
        """Distillation fidelity: on pairs whose planted scores differ by at
        least 0.2, the trained scorer agrees with the table ordering on 95%."""
        from scenesearch.datasets import (
            build_contain_dataset,
            build_household_set,
            synth_oracle,
        )
        from scenesearch.relational import TrainConfig, init_model, train

        oracle = synth_oracle(seed=99, n_rooms=3, n_objects=20)
        household = build_household_set(oracle.responses)
        provider = HashProvider(seed=99, dim=16)
        contain = build_contain_dataset(oracle.responses, household, seed=0)
        x, y = contain.vectorize(provider)
        model = train(init_model("contain", 16, seed=0), x, y,
                      config=TrainConfig(seed=0, max_epochs=1500)).model
        learned = LearnedBackend(provider, init_model("cooccur", 16, seed=0), model)
        table = TableBackend(contain=oracle.contain_table, cooccur=oracle.cooccur_table)

        rng = np.random.default_rng(5)
        keys = sorted(oracle.contain_table)
        agree = total = 0
        while total < 400:
            (room_a, query_a), (room_b, query_b) = (
                keys[i] for i in rng.integers(len(keys), size=2))
            gap = oracle.contain_table[(room_a, query_a)] - oracle.contain_table[(room_b, query_b)]
            if abs(gap) < 0.2:
                continue
            total += 1
            learned_gap = (learned.score_room(room_a, query_a)
                           - learned.score_room(room_b, query_b))
            agree += (gap > 0) == (learned_gap > 0)
        assert agree / total >= 0.95
