"""Command-line entry point: align, segment, render-frame, render-traj,
augment, metrics, validate-config.

All randomness flows from --seed; SPLATRIG_LOG sets log verbosity.
Module errors exit 1 with a single-line message; usage errors exit 2.
"""

from __future__ import annotations

import logging
import os
import sys

import click
import numpy as np

from . import config as cfgmod
from .alignment import align_scene_to_robot, load_xyz_points
from .augment import AugmentParams, augment_image
from .kinematics import JointState
from .metrics import psnr, ssim
from .pipeline import frame_plan, load_png, render_trajectory, save_png, frame_filename
from .renderer import rasterize
from .rigging import pose_scene
from .segmentation import (
    classify_links,
    load_labeled_points,
    load_assignment,
    merge_assignments,
    save_assignment,
    segment_by_aabb,
    train_knn,
)
from .trajectory import load_trajectory


def _setup_logging():
    level = os.environ.get("SPLATRIG_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(msg: str):
    click.echo(f"error: {msg}".replace("\n", " "), err=True)
    sys.exit(1)


def _load_cfg(path) -> cfgmod.PipelineConfig:
    try:
        return cfgmod.load_config(path)
    except (OSError, cfgmod.ConfigError) as e:
        _fail(str(e))


def _set_jobs(jobs):
    if jobs:
        import numba

        numba.set_num_threads(jobs)


@click.group()
def main():
    """Kinematic rigging and rendering of Gaussian-splat robot scenes."""
    _setup_logging()


@main.command("validate-config")
@click.argument("config_path", type=click.Path(exists=True))
def validate_config(config_path):
    """Check that a pipeline config and all referenced files parse."""
    cfg = _load_cfg(config_path)
    try:
        for note in cfgmod.validate_config(cfg):
            click.echo(note)
    except Exception as e:
        _fail(str(e))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, help="Alignment JSON path (default: <output_dir>/alignment.json).")
def align(config_path, out_path):
    """Register the cropped splat scene against the robot reference points."""
    cfg = _load_cfg(config_path)
    if cfg.robot_points is None or cfg.crop_box is None:
        _fail("config must set robot_points and crop_box for align")
    try:
        scene = cfgmod.load_scene(cfg)
        with open(cfg.path(cfg.robot_points)) as f:
            ref = load_xyz_points(f.read())
        result = align_scene_to_robot(scene, ref, cfg.crop_box, cfg.icp_init, cfg.icp)
    except Exception as e:
        _fail(str(e))
    out_dir = cfg.path(cfg.output_dir)
    os.makedirs(out_dir, exist_ok=True)
    out_path = out_path or os.path.join(out_dir, "alignment.json")
    cfgmod.save_alignment(result, out_path)
    click.echo(
        f"converged={result.converged} iterations={result.iterations} "
        f"rms={result.rms_residual:.6g} scale={result.scale:.6g} -> {out_path}"
    )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--alignment", "alignment_path", default=None)
@click.option("--out", "out_path", default=None, help="Assignment path (default: <output_dir>/assignment.bin).")
def segment(config_path, alignment_path, out_path):
    """Label every Gaussian: AABB pass for arm links, KNN pass for the gripper."""
    cfg = _load_cfg(config_path)
    out_dir = cfg.path(cfg.output_dir)
    alignment_path = alignment_path or os.path.join(out_dir, "alignment.json")
    try:
        result = cfgmod.load_alignment(alignment_path)
        model = cfgmod.load_model(cfg)
        scene = cfgmod.load_scene(cfg)
        if result.scale != 1.0:
            from .alignment import rescale_scene

            scene = rescale_scene(scene, result.scale)
        link_names = list(cfg.aabb_boxes.keys())
        fk = cfgmod.capture_fk(cfg, model)
        boxes = [cfg.aabb_boxes[name] for name in link_names]
        fk_home = [fk[name] for name in link_names]
        assignment = segment_by_aabb(scene, boxes, fk_home, result.transform)
        if cfg.knn_points and cfg.gripper_region:
            with open(cfg.path(cfg.knn_points)) as f:
                pts, labels = load_labeled_points(f.read())
            knn = train_knn(pts, labels, cfg.knn_k)
            override = classify_links(knn, scene, result.transform, cfg.gripper_region, assignment)
            assignment = merge_assignments(assignment, override, scene,
                                           cfg.gripper_region, result.transform)
    except Exception as e:
        _fail(str(e))
    os.makedirs(out_dir, exist_ok=True)
    out_path = out_path or os.path.join(out_dir, "assignment.bin")
    save_assignment(assignment, out_path)
    counts = {int(l): int(n) for l, n in zip(*np.unique(assignment.labels, return_counts=True))}
    click.echo(f"labels={counts} -> {out_path}")


def _build_rig(cfg):
    alignment = cfgmod.load_alignment(os.path.join(cfg.path(cfg.output_dir), "alignment.json"))
    assignment = load_assignment(os.path.join(cfg.path(cfg.output_dir), "assignment.bin"))
    model = cfgmod.load_model(cfg)
    link_names = list(cfg.aabb_boxes.keys())
    return cfgmod.build_rig(cfg, model, alignment, assignment, link_names), model


@main.command("render-frame")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--traj", "traj_path", required=True, type=click.Path(exists=True))
@click.option("--t", "timestep", required=True, type=int)
@click.option("--camera", "camera_id", required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--jobs", type=int, default=None)
def render_frame(config_path, traj_path, timestep, camera_id, out_path, jobs):
    """Render a single (timestep, camera) frame from a trajectory log."""
    _set_jobs(jobs)
    cfg = _load_cfg(config_path)
    try:
        with open(traj_path) as f:
            log = load_trajectory(f.read())
        state = next((s for s in log.states if s.t == timestep), None)
        if state is None:
            raise ValueError(f"no state with t={timestep} in {traj_path}")
        cameras = cfgmod.load_camera_set(cfg)
        if camera_id not in cameras:
            raise ValueError(f"unknown camera {camera_id!r}")
        rig, model = _build_rig(cfg)
        scene = pose_scene(rig, model, JointState(state.q), state.aperture,
                           state.object_poses, cfg.clamp_limits)
        img = rasterize(scene, cameras[camera_id], cfg.raster)
        save_png(img, out_path)
    except Exception as e:
        _fail(str(e))
    click.echo(f"wrote {out_path}")


@main.command("render-traj")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--traj", "traj_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", default=None, help="Frame directory (default: <output_dir>/frames).")
@click.option("--jobs", type=int, default=None)
@click.option("--dry-run", is_flag=True, help="Print the frame plan without writing files.")
def render_traj(config_path, traj_path, out_dir, jobs, dry_run):
    """Render every (state, camera) pair of a trajectory and write a manifest."""
    _set_jobs(jobs)
    cfg = _load_cfg(config_path)
    try:
        with open(traj_path) as f:
            log = load_trajectory(f.read())
        cameras = cfgmod.load_camera_set(cfg)
        if dry_run:
            for t, cam_id, name in frame_plan(log, cameras):
                click.echo(f"t={t} camera={cam_id} file={name}")
            return
        rig, model = _build_rig(cfg)
        out_dir = out_dir or os.path.join(cfg.path(cfg.output_dir), "frames")
        rows = render_trajectory(log, rig, model, cameras, out_dir, cfg.raster, cfg.clamp_limits)
    except Exception as e:
        _fail(str(e))
    click.echo(f"wrote {len(rows)} frames to {out_dir}")


@main.command()
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Overrides the config seed.")
def augment(config_path, in_dir, out_dir, seed):
    """Augment every PNG frame in a directory, deterministically by seed."""
    cfg = _load_cfg(config_path) if config_path else None
    params = cfg.augment if cfg else AugmentParams()
    if seed is not None:
        from dataclasses import replace

        params = replace(params, seed=seed)
    try:
        os.makedirs(out_dir, exist_ok=True)
        names = sorted(n for n in os.listdir(in_dir) if n.endswith(".png"))
        if not names:
            raise ValueError(f"no PNG frames in {in_dir}")
        for i, name in enumerate(names):
            img = load_png(os.path.join(in_dir, name))
            save_png(augment_image(img, params, i), os.path.join(out_dir, name))
    except Exception as e:
        _fail(str(e))
    click.echo(f"augmented {len(names)} frames to {out_dir}")


@main.command()
@click.option("--ref", "ref_path", required=True, type=click.Path(exists=True))
@click.option("--test", "test_path", required=True, type=click.Path(exists=True))
def metrics(ref_path, test_path):
    """Print PSNR and SSIM between two images."""
    try:
        a = load_png(ref_path)
        b = load_png(test_path)
        p = psnr(a, b)
        s = ssim(a, b)
    except Exception as e:
        _fail(str(e))
    p_str = "inf" if p == float("inf") else f"{p:.4f}"
    click.echo(f"psnr={p_str} ssim={s:.6f}")


if __name__ == "__main__":
    main()
