"""Lean-image localization toolkit: synthetic cities, lean renders, datasets, evaluation."""

from ._core import (
    Aoi,
    Camera,
    ConfigError,
    DomainError,
    GridSpec,
    IntegrityError,
    IoError,
    LeanlocError,
    ParseError,
    Pose,
    Scene,
    evaluate,
    generate,
    label_to_pose,
    load_mesh,
    load_sample,
    parse_mesh,
    pose_to_label,
    quat_to_yaw_pitch,
    render,
    shuffle,
    synth_city,
    validity,
    yaw_pitch_to_quat,
)

__all__ = [
    "Aoi",
    "Camera",
    "ConfigError",
    "DomainError",
    "GridSpec",
    "IntegrityError",
    "IoError",
    "LeanlocError",
    "ParseError",
    "Pose",
    "Scene",
    "evaluate",
    "generate",
    "label_to_pose",
    "load_mesh",
    "load_sample",
    "parse_mesh",
    "pose_to_label",
    "quat_to_yaw_pitch",
    "render",
    "shuffle",
    "synth_city",
    "validity",
    "yaw_pitch_to_quat",
]
