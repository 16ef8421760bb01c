"""Acceptance suite: one test per criterion, each printing a PASS line with
the measured values (run with -s or -rP to see them).

Criteria 1-3 and 6 are fast identity/property checks. Criteria 4 and 5
train the full desk benchmark (M = 64 on an 8x8 panel, 64 beams, 2000
scenes, all three network variants; a few minutes of CPU) through a shared
session fixture. Criterion 7 runs the gen -> train -> eval pipeline twice
end to end and compares bytes.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from camris.channel import RadioConfig, UpaGeometry, delay_channel, freq_channel, PathCluster, array_response
from camris.cli import (
    build_linked_test_set,
    cmd_eval,
    cmd_gen,
    cmd_train,
    evaluate_scores,
    street_config,
)
from camris.codebook import build_codebook
from camris.dataset import load_dataset, split
from camris.metrics import accuracy, rate_ratio_curve, recall, threshold
from camris.rate import LinkChannels, best_beam, cascade
from camris.setnet import TrainConfig, VARIANTS, bce_loss, build_network, train

BENCH_SEED = 7
BENCH_SCENES = 2000


def random_link(rng, k=8, m=16, n=1, snr=2.0):
    h = rng.normal(size=(k, m)) + 1j * rng.normal(size=(k, m))
    big = rng.normal(size=(k, m, n)) + 1j * rng.normal(size=(k, m, n))
    f = rng.normal(size=n) + 1j * rng.normal(size=n)
    f = f / np.linalg.norm(f)
    return LinkChannels(h, big, f, snr)


def diag_form_rate(link, beam):
    """Independent oracle: receive amplitude through the diagonal phase matrix."""
    total = 0.0
    for k in range(link.ue_ris.shape[0]):
        amp = link.ue_ris[k] @ np.diag(beam) @ link.bs_ris[k] @ link.bs_beam
        total += math.log2(1.0 + link.snr * abs(amp) ** 2)
    return total / link.ue_ris.shape[0]


class LabelOracle:
    """Stand-in network that returns a fixed per-sample score lookup."""

    def __init__(self, scores_by_id):
        self.scores_by_id = scores_by_id

    def forward(self, features):
        return self.scores_by_id[id(features)]


@pytest.fixture(scope="session")
def benchmark(tmp_path_factory):
    out = tmp_path_factory.mktemp("benchmark")
    cfg = street_config(master_seed=BENCH_SEED, scene_count=BENCH_SCENES, n_cameras=1)
    cmd_gen(cfg, None, out, "")
    ds = load_dataset(out / "dataset_cam0.txt")
    train_set, test_set = split(ds.samples, cfg.train_fraction, BENCH_SEED)

    nets, curves, reports = {}, {}, {}
    for variant in VARIANTS:
        net, curve = train(variant, train_set, test_set, replace(cfg.train, seed=BENCH_SEED))
        nets[variant] = net
        curves[variant] = curve
        reports[variant] = evaluate_scores(test_set, lambda s: net.forward(s.features))

    cb = cfg.build_codebook()
    linked = build_linked_test_set(cfg, ds, test_set, cb)
    return {
        "cfg": cfg,
        "dataset": ds,
        "test_set": test_set,
        "nets": nets,
        "curves": curves,
        "reports": reports,
        "codebook": cb,
        "linked": linked,
    }


def test_criterion_1_oracle_identity_suite():
    rng = np.random.default_rng(101)

    # Hadamard-form rate vs the diagonal-matrix form, 100 random links.
    from camris.rate import achievable_rate

    worst = 0.0
    for _ in range(100):
        link = random_link(rng, k=4, m=12, n=2)
        g = cascade(link)
        psi = np.exp(1j * rng.uniform(0, 2 * np.pi, 12))
        lhs = g @ psi
        rhs = np.array(
            [link.ue_ris[k] @ np.diag(psi) @ link.bs_ris[k] @ link.bs_beam for k in range(4)]
        )
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-30))))
        rate_rel = abs(achievable_rate(link, psi) - diag_form_rate(link, psi)) / diag_form_rate(
            link, psi
        )
        worst = max(worst, rate_rel)
    assert worst < 1e-12

    # Exhaustive search vs an independently coded brute-force maximizer,
    # 100 instances on a 64-beam codebook.
    geom = UpaGeometry(8, 8)
    cb = build_codebook(geom, 8, 8)
    agreements = 0
    for _ in range(100):
        link = random_link(rng, k=4, m=64)
        brute = 1 + int(np.argmax([diag_form_rate(link, cb.beam(q)) for q in range(1, 65)]))
        agreements += brute == best_beam(link, cb)
    assert agreements == 100
    print(f"\n[criterion 1] PASS: hadamard-vs-diag worst rel err {worst:.2e}; "
          f"best-beam oracle agreement {agreements}/100")


def test_criterion_2_channel_suite():
    rng = np.random.default_rng(102)

    # Parseval between delay taps and the subcarrier spectrum.
    taps = rng.normal(size=(32, 64)) + 1j * rng.normal(size=(32, 64))
    from camris.channel import DelayChannel

    spectrum = freq_channel(DelayChannel(taps), 64).values
    lhs = np.sum(np.abs(spectrum) ** 2)
    rhs = 64 * np.sum(np.abs(taps) ** 2)
    parseval_err = abs(lhs - rhs) / rhs
    assert parseval_err < 1e-9

    # Single-path integer-delay sinc case is exact (unit sample period so
    # the delay-to-sample ratio is exactly representable).
    geom = UpaGeometry(8, 8)
    radio = RadioConfig(n_subcarriers=64, n_taps=32, pathloss=geom.size, sample_period=1.0)
    dc = delay_channel([PathCluster(1.0, 3.0, 0.4, -0.2)], geom, radio)
    expected = array_response(geom, 0.4, -0.2)
    np.testing.assert_array_equal(dc.taps[3], expected * 1.0)
    assert not dc.taps[[d for d in range(32) if d != 3]].any()

    # Matched codebook beam reaches the full aperture gain.
    cb = build_codebook(geom, 8, 8)
    worst_gain_err = 0.0
    for q in (1, 17, 40, 64):
        az, el = cb.steering_angles(q)
        gain = abs(array_response(geom, az, el) @ cb.beam(q))
        worst_gain_err = max(worst_gain_err, abs(gain - geom.size))
    assert worst_gain_err < 1e-9
    print(f"\n[criterion 2] PASS: parseval rel err {parseval_err:.2e}; integer-delay sinc exact; "
          f"matched-beam gain err {worst_gain_err:.2e}")


def test_criterion_3_network_suite():
    rng = np.random.default_rng(103)
    net = build_network("set_sum", 2, 8, 64, (16,))
    net.set_flat_params(rng.normal(0.0, 0.5, net.flat_params().size))

    # Permutation invariance, bit-exact, 1000 random inputs.
    for _ in range(1000):
        v = rng.uniform(-1, 1, (6, 8))
        n_zero = int(rng.integers(0, 4))
        if n_zero:
            v[:, rng.choice(8, size=n_zero, replace=False)] = 0.0
        perm = rng.permutation(8)
        a = net.forward(v)
        b = net.forward(v[:, perm])
        assert np.array_equal(a, b)

    # Padding invariance, bit-exact.
    v = rng.uniform(-1, 1, (6, 8))
    padded = np.concatenate([v, np.zeros((6, 5))], axis=1)
    assert np.array_equal(net.forward(v), net.forward(padded))

    # Gradient vs central finite differences on a tiny net, every parameter.
    worst = 0.0
    for variant in VARIANTS:
        tiny = build_network(variant, 2, 3, 5, (7,))
        tiny.set_flat_params(rng.normal(0.0, 0.5, tiny.flat_params().size))
        v = rng.uniform(-1, 1, (6, 3))
        v[:, 2] = 0.0
        target = (rng.random(5) < 0.4).astype(float)
        _, grads = tiny.loss_and_grads(v[None], target[None])
        flat = np.concatenate([g.ravel() for g in grads])
        theta = tiny.flat_params()
        eps = 1e-6
        for i in range(theta.size):
            up, down = theta.copy(), theta.copy()
            up[i] += eps
            down[i] -= eps
            tiny.set_flat_params(up)
            plus = tiny.sample_loss(v, target)
            tiny.set_flat_params(down)
            minus = tiny.sample_loss(v, target)
            fd = (plus - minus) / (2 * eps)
            worst = max(worst, abs(flat[i] - fd) / max(1.0, abs(fd)))
        tiny.set_flat_params(theta)
    assert worst < 1e-4

    # Loss of all-0.5 scores is ln 2.
    ln2_err = abs(bce_loss(np.full(64, 0.5), (np.arange(64) % 5 == 0).astype(float)) - math.log(2))
    assert ln2_err < 1e-12
    print(f"\n[criterion 3] PASS: permutation/padding invariance exact; "
          f"gradcheck worst rel err {worst:.2e}; ln2 err {ln2_err:.2e}")


def test_criterion_4_learning_trend(benchmark):
    curves = benchmark["curves"]
    reports = benchmark["reports"]
    final = {v: curves[v].test_loss[-1] for v in VARIANTS}

    assert final["set_sum"] <= final["reuse_concat"] <= final["vanilla_fc"], final
    assert final["set_sum"] < math.log(2)

    acc_gap = reports["set_sum"].accuracy - reports["vanilla_fc"].accuracy
    rec_gap = reports["set_sum"].recall - reports["vanilla_fc"].recall
    assert acc_gap >= 0.10, (reports["set_sum"], reports["vanilla_fc"])
    assert rec_gap >= 0.10, (reports["set_sum"], reports["vanilla_fc"])
    print(f"\n[criterion 4] PASS: final test loss "
          f"set_sum {final['set_sum']:.4f} <= reuse_concat {final['reuse_concat']:.4f} "
          f"<= vanilla_fc {final['vanilla_fc']:.4f}; accuracy gap {acc_gap:.3f}, "
          f"recall gap {rec_gap:.3f} (>= 0.10 required)")


def test_criterion_5_rate_ratio_trend(benchmark):
    cb = benchmark["codebook"]
    linked = benchmark["linked"]
    net = benchmark["nets"]["set_sum"]

    k_values = [1, 2, 4, 8, 16, 32, 64]
    curve = rate_ratio_curve(net, linked, cb, k_values)
    ratios = dict(curve)
    values = [ratios[k] for k in k_values]
    assert all(a <= b + 1e-12 for a, b in zip(values, values[1:])), curve
    assert ratios[64] == pytest.approx(1.0, abs=1e-12)
    assert ratios[8] >= 0.95, curve

    # Oracle sanity: scores equal to the ground-truth multi-hot labels reach
    # ratio 1.0 once k covers the largest optimal set.
    labels = {s.scene_id: s.label.astype(float) for s in benchmark["test_set"]}
    lookup = {id(entry.features): labels[entry.scene_id] for entry in linked}
    max_set = max(int(s.label.sum()) for s in benchmark["test_set"])
    oracle_curve = rate_ratio_curve(LabelOracle(lookup), linked, cb, [max_set])
    assert oracle_curve[0][1] == pytest.approx(1.0, rel=1e-12)

    # A random scorer at k = 1 does strictly worse than the trained network.
    rng = np.random.default_rng(105)
    rand_lookup = {id(entry.features): rng.random(cb.size) for entry in linked}
    rand_ratio = rate_ratio_curve(LabelOracle(rand_lookup), linked, cb, [1])[0][1]
    assert rand_ratio < ratios[1]
    print(f"\n[criterion 5] PASS: ratio monotone, 1.0 at k=64, {ratios[8]:.4f} at k=8 "
          f"(>= 0.95 required); oracle hits 1.0 at k={max_set}; "
          f"random k=1 {rand_ratio:.3f} < trained k=1 {ratios[1]:.3f}")


def test_criterion_6_metrics_unit_suite():
    # Precision/recall hand cases.
    assert accuracy([({1, 2}, {1})]) == 1.0
    assert recall([({1, 2}, {1})]) == 0.5
    assert accuracy([({1}, {2, 3})]) == 0.0
    assert accuracy([({2, 3}, {2, 3})]) == 1.0 and recall([({2, 3}, {2, 3})]) == 1.0

    # Threshold at 0.5 with the strict comparison convention.
    assert threshold([0.6, 0.4, 0.5], 0.5) == {1}
    assert threshold(np.full(4, 0.9), 0.5) == {1, 2, 3, 4}
    assert threshold(np.full(4, 0.1), 0.5) == set()
    assert threshold(np.full(4, 0.5), 0.5) == set()
    print("\n[criterion 6] PASS: precision/recall hand cases and threshold conventions exact")


def test_criterion_7_reproducibility(tmp_path):
    cfg = street_config(master_seed=3, scene_count=40, n_cameras=2)
    cfg.train = TrainConfig(epochs=6, batch_size=8, hidden=(16,))

    artifacts = []
    for run in ("a", "b"):
        out = tmp_path / run
        cmd_gen(cfg, 3, out, "confhash")
        ds_path = out / "dataset_cam0.txt"
        model_path, curve_path = cmd_train(cfg, 3, out, ds_path, "set_sum")
        _, report_path = cmd_eval(cfg, 3, out, ds_path, model_path)
        artifacts.append(
            {
                "dataset0": ds_path.read_bytes(),
                "dataset1": (out / "dataset_cam1.txt").read_bytes(),
                "manifest": (out / "manifest.json").read_bytes(),
                "model": model_path.read_bytes(),
                "curves": curve_path.read_bytes(),
                "report": report_path.read_bytes(),
            }
        )
    mismatched = [k for k in artifacts[0] if artifacts[0][k] != artifacts[1][k]]
    assert not mismatched, f"non-deterministic artifacts: {mismatched}"
    print("\n[criterion 7] PASS: gen/train/eval reruns byte-identical "
          f"({', '.join(artifacts[0])})")
