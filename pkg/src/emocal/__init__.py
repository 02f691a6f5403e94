"""Emotion-loop confidence calibration toolkit.

Builds minimum-perimeter loops over VAD lexicon points, computes confidence
targets and reward breakdowns for tagged transcripts, provides group-relative
policy arithmetic, and evaluates prediction/confidence files with
calibration metrics under a benchmark harness.
"""

from .bench import EvalReport, Manifest, evaluate, load_manifest, render_report, split_dataset
from .calibsim import SimConfig, SimTrajectory, run_sim
from .confidence import ConfidenceTarget, annotate_record, confidence_target, mean_token_prob
from .errors import EmocalError, FormatViolationError
from .grpo import GrpoConfig, RolloutGroup, RolloutResponse, advantages, grpo_objective, sequence_nll
from .lexicon import Taxonomy, VadLexicon, VadPoint, load_lexicon, load_taxonomy, resolve_points
from .loop import EmotionLoop, build_loop, deserialize_loop, normalized_distance, serialize_loop
from .metrics import MetricsReport, ScoredSample, compute_report
from .reward import RewardBreakdown, RewardConfig, reward_conf, reward_correct, reward_format, score_record
from .transcript import FormatVerdict, Transcript, parse, read_records, serialize, write_records

__version__ = "0.1.0"
