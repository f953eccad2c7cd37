from config import get_logger
from services.dataset import generate_dataset
from services.mesh import load_mesh, normalize
from services.raycast import build_accel
from services.render import render_grayscale
from services.viewsphere import camera_pose
from services.vqf import compute_vqf, describe, save_vqf
from utils.image_io import save_gray_image, save_mask
from utils.storage import discard_lock

logger = get_logger("commands.compute")


def handle_compute_command(args, config) -> int:
    """Compute one mesh's VQF and write it as .vqf.json"""
    mesh = normalize(load_mesh(args.mesh))
    vqf = compute_vqf(
        mesh,
        config.grid(),
        config.metric_params(),
        config.resolution,
        config.threads,
        config=config.to_dict(),
    )
    save_vqf(vqf, args.out)
    discard_lock(args.out)
    logger.info(f"COMPUTE: {describe(vqf)}")
    return 0


def handle_batch_command(args, config) -> int:
    """Compute VQFs for every mesh in a directory; exit 1 if any file failed"""
    summary = generate_dataset(
        args.mesh_dir,
        args.out_dir,
        config,
        emit_views=args.emit_views,
        image_format=args.image_format,
    )
    print(summary.describe())
    for path, message in summary.failed:
        print(f"failed: {path}: {message}")
    return 0 if summary.succeeded else 1


def handle_render_command(args, config) -> int:
    """Render one grid viewpoint of a normalized mesh"""
    mesh = normalize(load_mesh(args.mesh))
    camera = camera_pose(config.grid(), args.view)
    image, mask = render_grayscale(build_accel(mesh), mesh, camera, config.resolution, config.resolution)

    save_gray_image(image, args.out)
    if args.mask:
        save_mask(mask, args.mask)
    logger.info(f"RENDER: View {args.view} of {mesh.name}, mask coverage {mask.coverage:.3f}")
    return 0
