"""splatrig: rig and render Gaussian-splat robot scenes from simulator
trajectory logs into (image, action) training datasets."""

from .geometry import RigidTransform, Covariance3, compose, invert, quat_to_rotation, build_covariance, transform_gaussian
from .splat_io import Gaussian3D, SplatScene, parse_splat_ply, write_splat_ply
from .alignment import AlignmentResult, IcpParams, best_fit_transform, icp_align, align_scene_to_robot, rescale_scene
from .segmentation import LinkAssignment, KnnModel, segment_by_aabb, train_knn, classify_links, merge_assignments
from .kinematics import KinematicModel, JointState, FkResult, parse_kinematic_model, forward_kinematics, gripper_fk
from .rigging import SceneRig, ObjectPose, RiggedObject, link_transform, object_transform, pose_scene
from .renderer import Camera, Image, RasterParams, Splat2D, eval_sh, project_gaussian, rasterize, rasterize_reference
from .metrics import psnr, ssim
from .augment import AugmentParams, augment_image
from .trajectory import TrajectoryLog, TrajectoryState, load_trajectory
from .pipeline import RenderedFrame, render_trajectory

__version__ = "0.1.0"
