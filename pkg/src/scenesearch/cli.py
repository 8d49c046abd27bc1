"""Command line entry points.

Subcommands:
  extract       annotated scene -> scene graph file
  forge         recorded or synthetic oracle responses -> relational TSVs
  train-priors  relational TSV -> trained scorer weight file
  run           benchmark suite -> records.jsonl / summary.csv / sr_curve.csv
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import datasets, relational
from .embeddings import provider_from_spec
from .environment import load_episode_specs
from .extraction import AnnotatedScene, ExtractionConfig, extract
from .harness import load_scene_dir, run_suite
from .occupancy import OccupancyGrid
from .scoring import LearnedBackend, ScoringConfig, TableBackend, load_config_file


def _cmd_extract(args) -> int:
    scene = AnnotatedScene.load(args.input)
    if args.occ:
        scene.occupancy = OccupancyGrid.load(args.occ)
        scene.occupancy_ref = Path(args.occ).name
    config = ExtractionConfig(
        seed=args.seed, k_min=args.kmin, k_max=args.kmax, door_dilation=args.door_dilation)
    graph = extract(scene, config)
    graph.save(args.out)
    print(f"wrote {args.out}: {len(graph.nodes)} nodes, {len(graph.edges)} edges, "
          f"{len(graph.doors)} door links")
    return 0


def _cmd_forge(args) -> int:
    if args.synth:
        try:
            seed, rooms, objects = (int(v) for v in args.synth.split(","))
        except ValueError:
            raise SystemExit("--synth expects seed,rooms,objects")
        oracle = datasets.synth_oracle(seed, rooms, objects)
        responses = oracle.responses
        if args.out_responses:
            responses.save(args.out_responses)
            print(f"wrote {args.out_responses}")
    elif args.responses:
        responses = datasets.OracleResponseSet.load(args.responses)
    else:
        raise SystemExit("forge needs --responses or --synth")
    household = datasets.build_household_set(responses)
    print(f"household set: {len(household)} object labels")
    if args.out_cooccur:
        dataset = datasets.build_cooccur_dataset(responses, household, seed=args.seed)
        dataset.save_tsv(args.out_cooccur)
        print(f"wrote {args.out_cooccur}: {len(dataset)} rows")
    if args.out_contain:
        dataset = datasets.build_contain_dataset(responses, household, seed=args.seed)
        dataset.save_tsv(args.out_contain)
        print(f"wrote {args.out_contain}: {len(dataset)} rows")
    return 0


def _cmd_train_priors(args) -> int:
    provider = provider_from_spec(args.embeddings)
    dataset = datasets.RelationalDataset.load_tsv(args.data, relation=args.relation)
    x_train, y_train = dataset.vectorize(provider, "train")
    x_val, y_val = dataset.vectorize(provider, "val")
    model = relational.init_model(
        relation=args.relation, embedding_dim=provider.dim,
        hidden=tuple(int(h) for h in args.hidden.split(",")),
        seed=args.seed, provider_fingerprint=provider.fingerprint)
    config = relational.TrainConfig(
        lr=args.lr, batch_size=args.batch_size, max_epochs=args.epochs, seed=args.seed)
    result = relational.train(model, x_train, y_train, x_val, y_val, config)
    relational.save_weights(result.model, args.out)
    final_train = result.train_losses[-1] if result.train_losses else float("nan")
    print(f"wrote {args.out}: {result.epochs_run} epochs, "
          f"train loss {final_train:.4f}, val loss {result.final_val_loss:.4f}")
    return 0


def _cmd_run(args) -> int:
    scenes = load_scene_dir(args.scenes)
    episodes = load_episode_specs(args.episodes)
    provider = provider_from_spec(args.embeddings) if args.embeddings else None

    config, config_backend = (load_config_file(args.config) if args.config
                              else (ScoringConfig(), None))
    backend_spec = args.backend or config_backend
    if not backend_spec:
        raise SystemExit("no backend: pass --backend or put one in the config file")

    kind, _, payload = backend_spec.partition(":")
    if kind == "table":
        backend = TableBackend.load(payload)
    elif kind == "learned":
        if provider is None:
            raise SystemExit("learned backend needs --embeddings")
        try:
            cooccur_path, contain_path = payload.split(",")
        except ValueError:
            raise SystemExit("--backend learned expects learned:<cooccur.bin>,<contain.bin>")
        backend = LearnedBackend(
            provider,
            relational.load_weights(cooccur_path, relation="cooccur",
                                    embedding_dim=provider.dim),
            relational.load_weights(contain_path, relation="contain",
                                    embedding_dim=provider.dim))
    else:
        raise SystemExit(f"unknown backend spec {backend_spec!r}")

    agents = _split_agents(args.agents)
    report = run_suite(
        scenes, episodes, agents, seeds=args.seeds, backend=backend,
        provider=provider, config=config, out_dir=args.out,
        dilation_radius=args.dilation_radius)
    for agent, agg in report.aggregates.items():
        print(f"{agent}: SR {agg.sr_mean:.3f}+-{agg.sr_std:.3f}  "
              f"SPL {agg.spl_mean:.3f}+-{agg.spl_std:.3f}  "
              f"steps {agg.steps_mean:.1f}  inference {agg.inference_mean_s * 1e3:.2f} ms")
    print(f"wrote {args.out}/records.jsonl, summary.csv, sr_curve.csv, timings.csv")
    return 0


def _split_agents(text: str) -> list[str]:
    """Split an agent list on the commas that start a new agent spec.

    Needed because agent parameters may themselves contain commas, as in
    ``scout:delta=0,room_influence=off,random``.
    """
    out: list[str] = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        head = chunk.split(":", 1)[0]
        if head in ("scout", "random", "similarity") or not out:
            out.append(chunk)
        else:
            out[-1] += "," + chunk
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scenesearch")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="build a scene graph from an annotated scene")
    p.add_argument("--in", dest="input", required=True, help="annotated scene JSON")
    p.add_argument("--occ", default=None, help="occupancy grid file")
    p.add_argument("--out", required=True, help="output scene graph JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kmin", type=int, default=1)
    p.add_argument("--kmax", type=int, default=5)
    p.add_argument("--door-dilation", type=float, default=0.15)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("forge", help="build relational datasets from oracle responses")
    p.add_argument("--responses", default=None, help="recorded oracle response JSON")
    p.add_argument("--synth", default=None, metavar="SEED,ROOMS,OBJECTS",
                   help="generate a synthetic response set instead")
    p.add_argument("--out-cooccur", default=None)
    p.add_argument("--out-contain", default=None)
    p.add_argument("--out-responses", default=None,
                   help="also write the synthetic response set")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_forge)

    p = sub.add_parser("train-priors", help="train a relational scorer")
    p.add_argument("--relation", choices=("cooccur", "contain"), required=True)
    p.add_argument("--data", required=True, help="TSV dataset")
    p.add_argument("--embeddings", required=True, help="table file or hash:<seed>:<dim>")
    p.add_argument("--out", required=True, help="output weight file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", default="64,32")
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--batch-size", type=int, default=32)
    p.set_defaults(func=_cmd_train_priors)

    p = sub.add_parser("run", help="run a benchmark suite")
    p.add_argument("--scenes", required=True, help="directory of *.sg.json scenes")
    p.add_argument("--episodes", required=True, help="episode spec JSON")
    p.add_argument("--agents", required=True,
                   help='e.g. "scout:delta=0.1,random,similarity:preset=hash"')
    p.add_argument("--seeds", type=int, default=5, help="number of suite seeds (0..n-1)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--backend", default=None,
                   help="table:<tables.json> or learned:<cooccur.bin>,<contain.bin>")
    p.add_argument("--embeddings", default=None, help="table file or hash:<seed>:<dim>")
    p.add_argument("--config", default=None, help="scoring config JSON")
    p.add_argument("--dilation-radius", type=float, default=None)
    p.set_defaults(func=_cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
