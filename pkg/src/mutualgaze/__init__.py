"""Desk-scale mutual-gaze ("looking at each other") detection pipeline.

The pieces line up with the stages of the problem: link head detections
into tracks, enumerate track pairs over time windows, encode the scene
as Gaussian head maps, classify pairs with a three-branch network built
on a small from-scratch autodiff core, evaluate with ranked average
precision, and aggregate shot scores into social-interaction metrics.
"""

__version__ = "0.1.0"

from .estimator import GeometryFeaturizer, MutualGazeClassifier
from .evaluation import (Protocol, ScoredPair, average_precision,
                         evaluate_frames, evaluate_shots, labels_ap,
                         score_shot, spread_window_scores)
from .geometry import gaze_direction_2d, iou, mutual_gaze
from .headmap import geometry_features, head_map_frame, head_map_sequence
from .network import ModelConfig, MutualGazeNet
from .records import (BoundingBox, HeadDetection, HeadPose, HeadTrack,
                      PairAnnotation, PairLabel, ShotRecord, build_track,
                      validate_dataset)
from .social import average_laeo, episode_rows, friendness, interaction_ap
from .synthetic import (OracleConfig, PairSample, SynthConfig,
                        SyntheticHeadDataset, SyntheticPairDataset,
                        gaze_oracle, generate_dataset, make_pair,
                        mirror_head)
from .tracking import PairWindow, enumerate_pair_windows, link_detections
from .train import TrainConfig, pretrain_headpose, train_laeo

__all__ = [
    "BoundingBox", "GeometryFeaturizer", "HeadDetection", "HeadPose",
    "HeadTrack", "ModelConfig", "MutualGazeClassifier", "MutualGazeNet",
    "OracleConfig", "PairAnnotation", "PairLabel", "PairSample",
    "PairWindow", "Protocol", "ScoredPair", "ShotRecord", "SynthConfig",
    "SyntheticHeadDataset", "SyntheticPairDataset", "TrainConfig",
    "average_laeo", "average_precision", "build_track",
    "enumerate_pair_windows", "episode_rows", "evaluate_frames",
    "evaluate_shots", "friendness", "gaze_direction_2d", "gaze_oracle",
    "generate_dataset", "geometry_features", "head_map_frame",
    "head_map_sequence", "interaction_ap", "iou", "labels_ap",
    "link_detections", "make_pair", "mirror_head", "mutual_gaze",
    "pretrain_headpose", "score_shot", "spread_window_scores",
    "train_laeo", "validate_dataset",
]
