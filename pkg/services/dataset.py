from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from config import MESH_SUFFIXES, SPLIT_RATIOS, VQF_SUFFIX, get_logger
from services.mesh import load_mesh, normalize
from services.vqf import compute_vqf, save_vqf
from utils.errors import InputError, InvalidParameterError, ViewQualityError
from utils.image_io import save_gray_image, save_mask
from utils.storage import remove_lock_files, write_json

logger = get_logger("dataset")

MANIFEST_NAME = "manifest.json"


@dataclass
class BatchSummary:
    ok: list[str] = field(default_factory=list)
    failed: list[tuple[str, str]] = field(default_factory=list)

    @property
    def succeeded(self) -> bool:
        return not self.failed

    def describe(self) -> str:
        return f"{len(self.ok)} ok, {len(self.failed)} failed"


def list_mesh_files(mesh_dir: str) -> list[str]:
    """Supported mesh files in a directory, sorted by name"""
    if not os.path.isdir(mesh_dir):
        raise InputError(f"Mesh directory not found: {mesh_dir}")
    return [
        os.path.join(mesh_dir, name)
        for name in sorted(os.listdir(mesh_dir))
        if name.lower().endswith(MESH_SUFFIXES) and os.path.isfile(os.path.join(mesh_dir, name))
    ]


def mesh_stem(path: str) -> str:
    """File name without its mesh suffix, the mesh id used for output names"""
    name = os.path.basename(path)
    for suffix in MESH_SUFFIXES:
        if name.lower().endswith(suffix):
            return name[: -len(suffix)]
    return name


def split_dataset(mesh_ids: list[str], seed: int, ratios=SPLIT_RATIOS) -> dict[str, list[str]]:
    """
    Deterministic train/val/test split.

    Counts are floor(ratio * n) for train and val, the test set takes the rest.
    """
    rng = np.random.default_rng(seed)
    order = [mesh_ids[i] for i in rng.permutation(len(mesh_ids))]
    n_train = int(ratios[0] * len(order))
    n_val = int(ratios[1] * len(order))
    return {
        "train": sorted(order[:n_train]),
        "val": sorted(order[n_train : n_train + n_val]),
        "test": sorted(order[n_train + n_val :]),
    }


def generate_dataset(
    mesh_dir: str,
    out_dir: str,
    run_config,
    emit_views: bool = False,
    image_format: str = "png",
) -> BatchSummary:
    """
    Compute and store the VQF of every mesh in a directory.

    A file that fails to load or evaluate is logged and skipped; the rest of
    the batch continues. Files sharing a stem (thing.obj, thing.stl) keep the
    first in name order; the others are recorded as failures.

    Args:
        mesh_dir: Directory with .obj / .stl files
        out_dir: Output directory for <stem>.vqf.json files and the manifest
        run_config: Validated RunConfig
        emit_views: Also write every rendered view and mask under <out_dir>/<stem>/
        image_format: "png" or "pgm"

    Returns:
        BatchSummary
    """
    if image_format not in ("png", "pgm"):
        raise InvalidParameterError(f"--image-format must be png or pgm, got '{image_format}'")

    grid = run_config.grid()
    params = run_config.metric_params()
    paths = list_mesh_files(mesh_dir)
    logger.info(f"BATCH: Processing {len(paths)} mesh files from {mesh_dir}")
    os.makedirs(out_dir, exist_ok=True)

    summary = BatchSummary()
    seen = {}
    for path in paths:
        stem = mesh_stem(path)
        if stem in seen:
            message = f"output name '{stem}' already taken by {seen[stem]}"
            logger.error(f"BATCH_ERROR: {path}: {message}")
            summary.failed.append((path, message))
            continue
        seen[stem] = path
        try:
            mesh = normalize(load_mesh(path))
            view_sink = None
            if emit_views:
                view_dir = os.path.join(out_dir, mesh.name)

                def view_sink(index, image, mask, view_dir=view_dir):
                    save_gray_image(image, os.path.join(view_dir, f"view_{index:03d}.{image_format}"))
                    save_mask(mask, os.path.join(view_dir, f"mask_{index:03d}.{image_format}"))

            vqf = compute_vqf(
                mesh,
                grid,
                params,
                run_config.resolution,
                run_config.threads,
                view_sink=view_sink,
                config=run_config.to_dict(),
            )
            save_vqf(vqf, os.path.join(out_dir, f"{mesh.name}{VQF_SUFFIX}"))
            summary.ok.append(mesh.name)
        except (ViewQualityError, OSError) as e:
            logger.error(f"BATCH_ERROR: {path}: {e}")
            summary.failed.append((path, str(e)))

    manifest = {
        "meshes": summary.ok,
        "failed": [{"file": path, "error": message} for path, message in summary.failed],
        "splits": split_dataset(summary.ok, run_config.seed),
        "split_ratios": list(SPLIT_RATIOS),
        "config": run_config.to_dict(),
    }
    write_json(os.path.join(out_dir, MANIFEST_NAME), manifest)
    remove_lock_files(out_dir)

    logger.info(f"BATCH: {summary.describe()}")
    return summary
