"""Pipeline orchestration and the command-line interface.

Four subcommands, all driven by one JSON config file and a master seed:

  gen    scenes -> channels -> exhaustive beam oracle -> detector ->
         encoded per-camera dataset files plus a generation manifest
  train  80/20 split, train one variant, write checkpoint + learning curve
  eval   accuracy/recall of a checkpoint on the held-out test split
  sweep  top-k beam-training rate-ratio table for a checkpoint

Identical config and seed reproduce byte-identical dataset files,
checkpoints and report tables.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .channel import RadioConfig, UpaGeometry, bs_ris_channel, ue_ris_channel
from .codebook import Codebook, build_codebook
from .dataset import Dataset, DatasetMeta, Sample, encode_input, encode_label, load_dataset, save_dataset, split
from .detector import DetectorNoise, detect
from .metrics import (
    SampleLinks,
    SampleOutcome,
    make_report,
    rate_ratio_curve,
    threshold,
    write_curve_csv,
    write_eval_csv,
    write_learning_csv,
    write_records_csv,
)
from .rate import LinkChannels, is_candidate, scene_best_beams
from .scene import ScenarioConfig, generate_scene, project_bbox, street_scenario
from .seeding import substream
from .setnet import TrainConfig, VARIANTS, load_checkpoint, save_checkpoint, train

MANIFEST_NAME = "manifest.json"


@dataclass(eq=False)
class RunConfig:
    """Everything one experiment needs, loadable from a JSON file."""

    scenario: ScenarioConfig
    radio: RadioConfig
    ris_array: UpaGeometry
    codebook_az: int
    codebook_el: int
    noise: DetectorNoise
    train: TrainConfig
    scene_count: int
    u_max: int = 8
    train_fraction: float = 0.8

    def __post_init__(self):
        self.codebook_az = int(self.codebook_az)
        self.codebook_el = int(self.codebook_el)
        self.scene_count = int(self.scene_count)
        self.u_max = int(self.u_max)
        self.train_fraction = float(self.train_fraction)
        self.validate()

    def validate(self) -> None:
        if self.scene_count < 1:
            raise ValueError("scene_count must be >= 1")
        if self.codebook_az < 1 or self.codebook_el < 1:
            raise ValueError("codebook grid must be at least 1x1")
        if self.codebook_az * self.codebook_el > 4096:
            raise ValueError("codebook larger than 4096 beams is not supported")
        if self.u_max < 1:
            raise ValueError("u_max must be >= 1")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly in (0, 1)")
        if not self.scenario.cameras:
            raise ValueError("config needs at least one camera")
        if self.scenario.ue_count_range[1] > self.u_max:
            raise ValueError("ue_count_range max must not exceed u_max")

    @property
    def codebook_size(self) -> int:
        return self.codebook_az * self.codebook_el

    def build_codebook(self) -> Codebook:
        return build_codebook(self.ris_array, self.codebook_az, self.codebook_el)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "radio": self.radio.to_dict(),
            "ris_array": self.ris_array.to_dict(),
            "codebook": {"n_az": self.codebook_az, "n_el": self.codebook_el},
            "detector_noise": self.noise.to_dict(),
            "train": self.train.to_dict(),
            "scene_count": self.scene_count,
            "u_max": self.u_max,
            "train_fraction": self.train_fraction,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return cls(
            scenario=ScenarioConfig.from_dict(d["scenario"]),
            radio=RadioConfig.from_dict(d["radio"]),
            ris_array=UpaGeometry.from_dict(d["ris_array"]),
            codebook_az=d["codebook"]["n_az"],
            codebook_el=d["codebook"]["n_el"],
            noise=DetectorNoise.from_dict(d["detector_noise"]),
            train=TrainConfig.from_dict(d["train"]),
            scene_count=d["scene_count"],
            u_max=d.get("u_max", 8),
            train_fraction=d.get("train_fraction", 0.8),
        )


def street_config(master_seed: int = 0, scene_count: int = 2000, n_cameras: int = 2) -> RunConfig:
    """Default desk-scale experiment on the street scenario."""
    return RunConfig(
        scenario=street_scenario(master_seed, n_cameras),
        radio=RadioConfig(n_taps=48),
        ris_array=UpaGeometry(8, 8),
        codebook_az=8,
        codebook_el=8,
        noise=DetectorNoise(bbox_jitter_std=2.0, miss_prob=0.02, false_positive_rate=0.05, class_confusion_prob=0.02),
        train=TrainConfig(),
        scene_count=scene_count,
    )


def load_config(path) -> tuple[RunConfig, str]:
    """Parse a config file; returns the config and the sha256 of its bytes."""
    raw = Path(path).read_bytes()
    cfg = RunConfig.from_dict(json.loads(raw.decode("utf-8")))
    return cfg, hashlib.sha256(raw).hexdigest()


def save_config(path, cfg: RunConfig) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _effective_seed(cfg: RunConfig, seed: int | None) -> int:
    return cfg.scenario.master_seed if seed is None else int(seed)


def dataset_filename(camera_id: int) -> str:
    return f"dataset_cam{camera_id}.txt"


def cmd_gen(cfg: RunConfig, seed: int | None, out_dir, config_hash: str = "") -> dict:
    """Generate per-camera dataset files and the manifest; returns the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    eff_seed = _effective_seed(cfg, seed)
    scenario = replace(cfg.scenario, master_seed=eff_seed)
    cb = cfg.build_codebook()
    class_count = scenario.class_count

    per_camera: list[list[Sample]] = [[] for _ in scenario.cameras]
    for scene_index in range(cfg.scene_count):
        scene = generate_scene(scenario, scene_index)
        oracle = scene_best_beams(scene, cb, cfg.radio)
        for cam_idx, camera in enumerate(scenario.cameras):
            beam_set = {
                oracle[ue.ue_id]
                for ue in scene.ues
                if ue.ue_id in oracle and project_bbox(camera, ue) is not None
            }
            dets = detect(scene, camera, cfg.noise, substream(scene.scene_seed, "detector", cam_idx))
            features = encode_input(dets, class_count, cfg.u_max, camera)
            label = encode_label(beam_set, cb.size)
            per_camera[cam_idx].append(Sample(scene_index, cam_idx, features, label))

    manifest = {
        "format": "camris-manifest",
        "version": 1,
        "seed": eff_seed,
        "config_hash": config_hash,
        "scene_count": cfg.scene_count,
        "scene_ids": list(range(cfg.scene_count)),
        "cameras": [],
    }
    for cam_idx, camera in enumerate(scenario.cameras):
        meta = DatasetMeta(
            class_count=class_count,
            u_max=cfg.u_max,
            codebook_size=cb.size,
            camera_id=cam_idx,
            image_width=camera.image_width,
            image_height=camera.image_height,
            seed=eff_seed,
            sample_count=len(per_camera[cam_idx]),
        )
        filename = dataset_filename(cam_idx)
        save_dataset(out_dir / filename, Dataset(meta, per_camera[cam_idx]))
        manifest["cameras"].append({"camera_id": cam_idx, "file": filename, "sample_count": meta.sample_count})

    (out_dir / MANIFEST_NAME).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return manifest


def cmd_train(cfg: RunConfig, seed: int | None, out_dir, dataset_path, variant: str):
    """Train one variant on a dataset file; returns (model_path, curve_path)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ds = load_dataset(dataset_path)
    eff_seed = _effective_seed(cfg, seed)
    train_set, test_set = split(ds.samples, cfg.train_fraction, eff_seed)
    train_cfg = replace(cfg.train, seed=eff_seed)
    net, curves = train(variant, train_set, test_set, train_cfg)

    model_path = out_dir / f"model_{variant}_cam{ds.meta.camera_id}.bin"
    save_checkpoint(
        model_path,
        net,
        extra={
            "camera_id": ds.meta.camera_id,
            "dataset_seed": ds.meta.seed,
            "split_seed": eff_seed,
            "train_fraction": cfg.train_fraction,
        },
    )
    curve_path = out_dir / f"curves_{variant}_cam{ds.meta.camera_id}.csv"
    write_learning_csv(curve_path, curves)
    return model_path, curve_path


def _check_compat(meta, header) -> None:
    for field_name, meta_val in (
        ("class_count", meta.class_count),
        ("u_max", meta.u_max),
        ("codebook_size", meta.codebook_size),
    ):
        if header[field_name] != meta_val:
            raise ValueError(
                f"model/dataset mismatch on {field_name}: "
                f"model {header[field_name]}, dataset {meta_val}"
            )


def _test_split_for(ds, header):
    _, test_set = split(ds.samples, header["train_fraction"], header["split_seed"])
    return test_set


def evaluate_scores(samples, score_fn, delta: float = 0.5):
    """Threshold per-sample scores and aggregate the accuracy/recall report.

    `score_fn` maps a sample to its score vector; passing the multi-hot
    label itself acts as a perfect oracle.
    """
    outcomes = []
    for sample in samples:
        scores = np.asarray(score_fn(sample), dtype=float)
        optimal = {int(i) + 1 for i in np.nonzero(sample.label)[0]}
        predicted = threshold(scores, delta)
        outcomes.append(
            SampleOutcome(sample.scene_id, sample.camera_id, tuple(sorted(optimal)), tuple(sorted(predicted)))
        )
    return make_report(outcomes)


def cmd_eval(cfg: RunConfig, seed: int | None, out_dir, dataset_path, model_path):
    """Evaluate a checkpoint on the held-out split; returns (report, csv_path)."""
    del seed  # the split is pinned by the checkpoint header
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ds = load_dataset(dataset_path)
    net, header = load_checkpoint(model_path)
    _check_compat(ds.meta, header)
    test_set = _test_split_for(ds, header)
    report = evaluate_scores(test_set, lambda s: net.forward(s.features))

    stem = Path(model_path).stem
    report_path = out_dir / f"eval_{stem}.csv"
    write_eval_csv(report_path, report)
    write_records_csv(out_dir / f"records_{stem}.csv", report)
    return report, report_path


def build_linked_test_set(cfg: RunConfig, ds, test_samples, cb: Codebook) -> list[SampleLinks]:
    """Rebuild the qualifying-UE channels for held-out samples.

    Scenes are regenerated from the seed recorded in the dataset header, so
    the channels match the ones the oracle labels were computed from.
    """
    scenario = replace(cfg.scenario, master_seed=ds.meta.seed)
    linked = []
    for sample in test_samples:
        scene = generate_scene(scenario, sample.scene_id)
        camera = scenario.cameras[sample.camera_id]
        qualifying = [ue for ue in scene.ues if is_candidate(scene, camera, ue)]
        if not qualifying:
            continue
        bs_values, bs_beam = bs_ris_channel(scene, cb.geom, cfg.radio)
        links = [
            LinkChannels(ue_ris_channel(scene, ue, cb.geom, cfg.radio), bs_values, bs_beam, cfg.radio.snr)
            for ue in qualifying
        ]
        linked.append(SampleLinks(sample.scene_id, sample.camera_id, sample.features, links))
    return linked


def cmd_sweep(cfg: RunConfig, seed: int | None, out_dir, dataset_path, model_path, k_values):
    """Rate-ratio table over sub-codebook sizes; returns (rows, csv_path)."""
    del seed
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ds = load_dataset(dataset_path)
    net, header = load_checkpoint(model_path)
    _check_compat(ds.meta, header)
    cb = cfg.build_codebook()
    if cb.size != ds.meta.codebook_size:
        raise ValueError(
            f"config codebook has {cb.size} beams but the dataset was generated "
            f"with {ds.meta.codebook_size}"
        )
    test_set = _test_split_for(ds, header)
    linked = build_linked_test_set(cfg, ds, test_set, cb)
    rows = rate_ratio_curve(net, linked, cb, k_values)

    csv_path = out_dir / f"sweep_{Path(model_path).stem}.csv"
    write_curve_csv(csv_path, rows)
    return rows, csv_path


def _parse_k_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ValueError(f"bad --k-list {text!r}: {exc}") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="camris",
        description="Camera-aided RIS beam selection: dataset generation, "
        "training, evaluation and top-k sweeps from one config and seed.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON run-config file")
        p.add_argument("--seed", type=int, default=None, help="master seed (default: config value)")
        p.add_argument("--out", required=True, help="output directory")

    p_gen = sub.add_parser("gen", help="generate per-camera dataset files")
    common(p_gen)

    p_train = sub.add_parser("train", help="train one network variant")
    common(p_train)
    p_train.add_argument("--dataset", required=True)
    p_train.add_argument("--variant", required=True, help=f"one of: {', '.join(VARIANTS)}")

    p_eval = sub.add_parser("eval", help="accuracy/recall of a checkpoint")
    common(p_eval)
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--model", required=True)

    p_sweep = sub.add_parser("sweep", help="top-k rate-ratio sweep")
    common(p_sweep)
    p_sweep.add_argument("--dataset", required=True)
    p_sweep.add_argument("--model", required=True)
    p_sweep.add_argument("--k-list", default="1,2,4,8,16,32,64", help="comma-separated k values")

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg, config_hash = load_config(args.config)
        if args.command == "gen":
            manifest = cmd_gen(cfg, args.seed, args.out, config_hash)
            for cam in manifest["cameras"]:
                print(f"wrote {cam['file']} ({cam['sample_count']} samples)")
        elif args.command == "train":
            model_path, curve_path = cmd_train(cfg, args.seed, args.out, args.dataset, args.variant)
            print(f"wrote {model_path}")
            print(f"wrote {curve_path}")
        elif args.command == "eval":
            report, report_path = cmd_eval(cfg, args.seed, args.out, args.dataset, args.model)
            print(f"accuracy={report.accuracy:.4f} recall={report.recall:.4f} n_test={report.n_test}")
            print(f"wrote {report_path}")
        elif args.command == "sweep":
            rows, csv_path = cmd_sweep(
                cfg, args.seed, args.out, args.dataset, args.model, _parse_k_list(args.k_list)
            )
            for k, ratio in rows:
                print(f"k={k} rate_ratio={ratio:.4f}")
            print(f"wrote {csv_path}")
    except (ValueError, OSError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
