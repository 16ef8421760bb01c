"""camris: desk-scale simulator for camera-aided RIS reflection-beam selection.

Pipeline: synthetic street scenes -> geometric wideband channels ->
exhaustive-search beam oracle -> geometric detector with an imperfection
model -> permutation-invariant beam-set prediction network -> top-k
beam-training rate evaluation.
"""

from .channel import (
    DelayChannel,
    FreqChannel,
    PathCluster,
    RadioConfig,
    UpaGeometry,
    array_response,
    delay_channel,
    delay_channel_matrix,
    freq_channel,
    synth_paths,
)
from .codebook import Codebook, build_codebook
from .dataset import Dataset, DatasetMeta, Sample, encode_input, encode_label, load_dataset, save_dataset, split
from .detector import Detection, DetectorNoise, detect
from .metrics import EvalReport, accuracy, make_report, rate_ratio_curve, recall, threshold
from .rate import (
    BeamSet,
    LinkChannels,
    achievable_rate,
    best_beam,
    cascade,
    scene_beam_set,
    scene_best_beams,
    topk_trained_rate,
)
from .scene import (
    AlignedBox,
    BlockerSpec,
    BoundingBox,
    CameraModel,
    Pose,
    ScenarioConfig,
    Scene,
    UE,
    generate_scene,
    los_visible,
    project_bbox,
    street_scenario,
)
from .setnet import (
    LearningCurves,
    TrainConfig,
    VARIANTS,
    bce_loss,
    build_network,
    load_checkpoint,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"
