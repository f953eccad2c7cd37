import os

import numpy as np

from config import VQF_SUFFIX, get_logger
from config.run_config import parse_floats
from services.evaluation import evaluate_progression
from services.mesh import load_mesh, normalize
from services.optimizer import (
    ExactOracleProvider,
    FileSequenceProvider,
    run_trajectory,
)
from services.raycast import build_accel
from services.render import render_grayscale
from services.viewsphere import camera_pose
from services.vqf import compute_vqf, load_vqf
from utils.errors import InvalidParameterError
from utils.image_io import save_gray_image
from utils.storage import discard_lock, write_json

logger = get_logger("commands.optimize")


def _ground_truth(mesh_path, config):
    mesh = normalize(load_mesh(mesh_path))
    vqf = compute_vqf(
        mesh,
        config.grid(),
        config.metric_params(),
        config.resolution,
        config.threads,
        config=config.to_dict(),
    )
    return mesh, vqf


def _pick_start(text, grid_size, seed) -> int:
    if str(text).lower() == "random":
        return int(np.random.default_rng(seed).integers(grid_size))
    try:
        start = int(text)
    except ValueError:
        raise InvalidParameterError(f"--start must be an index or 'random', got '{text}'")
    if not 0 <= start < grid_size:
        raise InvalidParameterError(f"--start {start} out of range [0, {grid_size})")
    return start


def format_steps(trajectory) -> str:
    """Plain-text step table"""
    lines = [f"{'step':>4}  {'index':>5}  {'azimuth':>8}  {'polar':>7}  {'score':>9}"]
    for row in trajectory.to_dict()["steps"]:
        lines.append(
            f"{row['step']:>4}  {row['viewpoint_index']:>5}  {row['azimuth_deg']:8.1f}  "
            f"{row['polar_deg']:7.1f}  {row['score']:9.5f}"
        )
    lines.append(f"converged: {trajectory.converged}")
    return "\n".join(lines)


def handle_optimize_command(args, config) -> int:
    """Run the viewpoint optimizer from a mesh, a stored VQF or a VQF sequence"""
    if args.emit_views and not args.mesh:
        raise InvalidParameterError("--emit-views needs a --mesh source")

    mesh = None
    if args.mesh:
        mesh, vqf = _ground_truth(args.mesh, config)
        provider = ExactOracleProvider(vqf)
        source = {"mode": "exact-oracle", "mesh": args.mesh}
    elif args.vqf:
        provider = ExactOracleProvider(load_vqf(args.vqf))
        source = {"mode": "exact-oracle", "vqf": args.vqf}
    else:
        provider = FileSequenceProvider.from_directory(args.vqf_seq)
        source = {"mode": "file-sequence", "files": provider.paths}

    grid = provider.grid
    if not grid.same_layout(config.grid()):
        logger.warning("OPTIMIZER: Using the grid stored with the VQF instead of the grid flags")
    start = _pick_start(args.start, len(grid), config.seed)

    alpha = 0.0
    agent = None
    if args.agent_pos:
        agent = parse_floats(args.agent_pos, 3, "--agent-pos")
        alpha = config.alpha

    trajectory = run_trajectory(
        provider,
        start,
        config.step_radius,
        config.max_steps,
        config.weights,
        alpha=alpha,
        agent_position=agent,
        sphere_radius=config.sphere_radius,
    )

    data = trajectory.to_dict()
    data["source"] = source
    data["config"] = config.to_dict()
    write_json(args.out, data)
    discard_lock(args.out)
    print(format_steps(trajectory))

    if args.emit_views:
        accel = build_accel(mesh)
        for number, index in enumerate(trajectory.indices):
            image, _ = render_grayscale(
                accel, mesh, camera_pose(grid, index), config.resolution, config.resolution
            )
            save_gray_image(image, os.path.join(args.emit_views, f"step_{number:02d}_view_{index:03d}.png"))
        logger.info(f"OPTIMIZER: Wrote {len(trajectory.steps)} step views to {args.emit_views}")
    return 0


def handle_evaluate_command(args, config) -> int:
    """Mean viewpoint quality per optimization round over seeded random starts"""
    vqfs = []
    for path in args.inputs:
        if path.endswith(VQF_SUFFIX):
            vqfs.append(load_vqf(path))
        else:
            vqfs.append(_ground_truth(path, config)[1])

    report = evaluate_progression(
        vqfs,
        rounds=args.rounds,
        starts_per_mesh=args.starts,
        seed=config.seed,
        step_radius=config.step_radius,
        weights=config.weights,
    )
    print(report.table())
    print(f"final visible ratio >= initial in {report.visible_not_worse_fraction:.1%} of runs")

    if args.out:
        data = report.to_dict()
        data["inputs"] = list(args.inputs)
        data["config"] = config.to_dict()
        write_json(args.out, data)
        discard_lock(args.out)
    return 0
