import json

import numpy as np
import pytest

from scenesearch import synth
from scenesearch.cli import _split_agents, main
from scenesearch.datasets import RelationalDataset
from scenesearch.extraction import AnnotatedScene, ObjectAnnotation
from scenesearch.occupancy import OccupancyGrid
from scenesearch.relational import load_weights
from scenesearch.scenegraph import SceneGraph


class TestAgentSplitting:
    def test_commas_inside_parameters_stay_attached(self):
        text = "scout:delta=0.1,scout:delta=0,room_influence=off,random,similarity:preset=hash"
        assert _split_agents(text) == [
            "scout:delta=0.1",
            "scout:delta=0,room_influence=off",
            "random",
            "similarity:preset=hash",
        ]


@pytest.fixture(scope="module")
def suite_dir(tmp_path_factory):
    directory = tmp_path_factory.mktemp("suite")
    suite = synth.build_suite(seed=1, n_scenes=2, episodes_per_scene=3, n_max=10)
    suite.write(directory)
    return directory


class TestForge:
    def test_synth_mode_writes_datasets(self, tmp_path, capsys):
        cooccur = tmp_path / "cooccur.tsv"
        contain = tmp_path / "contain.tsv"
        responses = tmp_path / "responses.json"
        code = main(["forge", "--synth", "2,3,12", "--seed", "4",
                     "--out-cooccur", str(cooccur), "--out-contain", str(contain),
                     "--out-responses", str(responses)])
        assert code == 0
        assert RelationalDataset.load_tsv(cooccur, "cooccur").rows
        assert RelationalDataset.load_tsv(contain, "contain").rows
        assert json.loads(responses.read_text())["rooms"] == ["room 0", "room 1", "room 2"]

    def test_recorded_mode_round_trips(self, tmp_path):
        responses = tmp_path / "responses.json"
        main(["forge", "--synth", "5,2,8", "--out-responses", str(responses)])
        contain = tmp_path / "contain.tsv"
        code = main(["forge", "--responses", str(responses),
                     "--out-contain", str(contain), "--seed", "0"])
        assert code == 0 and contain.exists()

    def test_needs_a_source(self):
        with pytest.raises(SystemExit):
            main(["forge", "--out-contain", "x.tsv"])


class TestTrainPriors:
    def test_trains_and_saves_loadable_weights(self, tmp_path):
        contain = tmp_path / "contain.tsv"
        main(["forge", "--synth", "3,2,10", "--out-contain", str(contain)])
        weights = tmp_path / "contain.bin"
        code = main(["train-priors", "--relation", "contain", "--data", str(contain),
                     "--embeddings", "hash:7:8", "--out", str(weights),
                     "--epochs", "5", "--seed", "1"])
        assert code == 0
        model = load_weights(weights, relation="contain", embedding_dim=8)
        assert model.provider_fingerprint == "hash:7:8"


class TestExtract:
    def test_builds_a_valid_scene_file(self, tmp_path):
        annotated = AnnotatedScene(
            scene_id="flat",
            objects=[ObjectAnnotation(0, "sofa", np.array([1.0, 1.0, 0.4])),
                     ObjectAnnotation(1, "tv", np.array([2.0, 1.0, 0.8])),
                     ObjectAnnotation(2, "bed", np.array([6.0, 1.0, 0.5]))],
            room_polygons=[(0, np.array([[0.0, 0.0], [4.0, 0.0], [4.0, 4.0], [0.0, 4.0]])),
                           (1, np.array([[4.0, 0.0], [8.0, 0.0], [8.0, 4.0], [4.0, 4.0]]))],
            door_boxes=[(0, (3.9, 1.5, 4.1, 2.5))],
            room_categories={0: "living room", 1: "bedroom"})
        ann_path = tmp_path / "flat.ann.json"
        annotated.save(ann_path)
        grid = OccupancyGrid(0.5, (0.0, 0.0), np.zeros((8, 16), dtype=bool))
        occ_path = tmp_path / "flat.occ"
        grid.save(occ_path)
        out = tmp_path / "flat.sg.json"
        code = main(["extract", "--in", str(ann_path), "--occ", str(occ_path),
                     "--out", str(out), "--seed", "3"])
        assert code == 0
        graph = SceneGraph.load(out)
        assert graph.validate() == []
        assert graph.occupancy is not None


class TestRun:
    def test_full_benchmark_via_cli(self, suite_dir, tmp_path):
        out = tmp_path / "results"
        code = main([
            "run",
            "--scenes", str(suite_dir),
            "--episodes", str(suite_dir / "episodes.json"),
            "--agents", "scout:delta=0.1,random,similarity:preset=hash",
            "--seeds", "2",
            "--backend", f"table:{suite_dir / 'tables.json'}",
            "--embeddings", str(suite_dir / "embeddings.emb"),
            "--out", str(out),
        ])
        assert code == 0
        records = [json.loads(line) for line in (out / "records.jsonl").read_text().splitlines()]
        assert len(records) == 6 * 3 * 2  # episodes x agents x seeds
        summary = (out / "summary.csv").read_text().splitlines()
        assert len(summary) == 4  # header + three agents
        curve = (out / "sr_curve.csv").read_text().splitlines()
        assert curve[0] == "step,agent,fraction"

    def test_learned_backend_via_cli(self, suite_dir, tmp_path):
        cooccur_tsv = tmp_path / "cooccur.tsv"
        contain_tsv = tmp_path / "contain.tsv"
        main(["forge", "--synth", "4,3,12",
              "--out-cooccur", str(cooccur_tsv), "--out-contain", str(contain_tsv)])
        cooccur_bin = tmp_path / "cooccur.bin"
        contain_bin = tmp_path / "contain.bin"
        for relation, data, out in (("cooccur", cooccur_tsv, cooccur_bin),
                                    ("contain", contain_tsv, contain_bin)):
            main(["train-priors", "--relation", relation, "--data", str(data),
                  "--embeddings", "hash:7:8", "--out", str(out), "--epochs", "3"])
        results = tmp_path / "results"
        code = main([
            "run",
            "--scenes", str(suite_dir),
            "--episodes", str(suite_dir / "episodes.json"),
            "--agents", "scout:delta=0.1",
            "--seeds", "1",
            "--backend", f"learned:{cooccur_bin},{contain_bin}",
            "--embeddings", "hash:7:8",
            "--out", str(results),
        ])
        assert code == 0
        assert (results / "records.jsonl").exists()

    def test_unknown_backend_spec(self, suite_dir, tmp_path):
        with pytest.raises(SystemExit):
            main(["run", "--scenes", str(suite_dir),
                  "--episodes", str(suite_dir / "episodes.json"),
                  "--agents", "random", "--backend", "magic:beans",
                  "--out", str(tmp_path / "r")])

    def test_backend_can_come_from_the_config_file(self, suite_dir, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({
            "w": 0.3, "default_room_score": 0.7, "default_frontier_score": 0.6,
            "frontier_radius": 2.0, "delta": 0.1, "room_influence": True,
            "frontier_aggregate": "max",
            "backend": f"table:{suite_dir / 'tables.json'}"}))
        out = tmp_path / "results"
        code = main(["run", "--scenes", str(suite_dir),
                     "--episodes", str(suite_dir / "episodes.json"),
                     "--agents", "random", "--seeds", "1",
                     "--config", str(config), "--out", str(out)])
        assert code == 0 and (out / "summary.csv").exists()

    def test_missing_backend_everywhere_rejected(self, suite_dir, tmp_path):
        with pytest.raises(SystemExit, match="no backend"):
            main(["run", "--scenes", str(suite_dir),
                  "--episodes", str(suite_dir / "episodes.json"),
                  "--agents", "random", "--out", str(tmp_path / "r")])
