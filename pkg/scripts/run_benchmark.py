"""Run the full desk benchmark end to end and print the headline numbers.

Generates the 2000-scene street dataset, trains the three network variants,
evaluates accuracy/recall on the held-out split, and sweeps the top-k
beam-training rate ratio for the sum-pooled network. Everything lands in
--out as plot-ready CSV tables. Takes a few minutes on one CPU.
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from camris.cli import cmd_eval, cmd_gen, cmd_sweep, cmd_train, street_config
from camris.setnet import VARIANTS


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="benchmark_out", help="output directory")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--scenes", type=int, default=2000)
    args = parser.parse_args()

    out = Path(args.out)
    cfg = street_config(master_seed=args.seed, scene_count=args.scenes, n_cameras=1)

    t0 = time.time()
    manifest = cmd_gen(cfg, args.seed, out, "")
    ds_path = out / manifest["cameras"][0]["file"]
    print(f"[{time.time() - t0:6.1f}s] generated {manifest['cameras'][0]['sample_count']} samples")

    set_sum_model = None
    for variant in VARIANTS:
        model_path, _ = cmd_train(cfg, args.seed, out, ds_path, variant)
        report, _ = cmd_eval(cfg, args.seed, out, ds_path, model_path)
        print(
            f"[{time.time() - t0:6.1f}s] {variant:13s} "
            f"accuracy {report.accuracy:.3f}  recall {report.recall:.3f}"
        )
        if variant == "set_sum":
            set_sum_model = model_path

    rows, csv_path = cmd_sweep(
        cfg, args.seed, out, ds_path, set_sum_model, [1, 2, 4, 8, 16, 32, 64]
    )
    print(f"[{time.time() - t0:6.1f}s] top-k rate ratio (set_sum):")
    for k, ratio in rows:
        print(f"    k={k:3d}  {ratio:.4f}")
    print(f"tables in {out}/ (curves_*.csv, eval_*.csv, {csv_path.name})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
