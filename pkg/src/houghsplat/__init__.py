"""Instance voting on 3D Gaussian splats.

Each Gaussian carries a learned offset; its position plus offset is a 3D vote
that training pulls toward the center of the instance it belongs to, using
mask centroids from several views as supervision. Clustering the votes then
recovers instances.
"""

from .camera import CameraRig, CameraView, RigSpec, load_cameras, save_cameras
from .clustering import ClusterParams, InstanceTable, build_instance_table, cluster_scene, cluster_votes, filter_background
from .errors import ConfigError, FormatError, HoughSplatError, TrainingError, ValidationError, VersionError
from .evaluation import ari, iou, m_acc, vote_error
from .losses import LossWeights, depth_distortion, vote_loss
from .optimizer import TrainConfig, backward_depth, backward_vote, train
from .raster import render
from .scene import Scene, SyntheticSceneSpec, generate_synthetic_scene, load_scene, save_scene
from .semantics import FeatureBank, SyntheticFeatures, associate_features, pick, query
from .votemaps import LabelMask, VoteMap2D, build_vote_map, label_mask_from_scene

__version__ = "0.1.0"
