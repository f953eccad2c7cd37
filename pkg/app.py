import argparse
import sys

# Import configuration
from config import logger, set_level

# Import command dispatch
from handlers.command_handler import handle_command
from services.vqf import HEATMAP_CHANNELS


def add_global_flags(parser):
    """Flags shared by every subcommand; None means 'use the configured default'"""
    group = parser.add_argument_group("global options")
    group.add_argument("--grid-az", type=int, help="azimuth samples (default 12)")
    group.add_argument("--grid-pol", type=int, help="polar rings, poles excluded (default 11)")
    group.add_argument("--radius", type=float, help="camera distance, normalized units (default 2.5)")
    group.add_argument("--fov-deg", type=float, help="vertical field of view (default 45)")
    group.add_argument("--res", dest="resolution", type=int, help="render resolution (default 256)")
    group.add_argument("--samples-per-face", type=int, help="visibility samples per face (default 10)")
    group.add_argument("--normal-bins", help="polar x azimuth normal bins (default 8x32)")
    group.add_argument("--gray-bins", type=int, help="gray-level bins (default 256)")
    group.add_argument("--weights", help="channel weights w1,w2,w3 (default 1/3 each)")
    group.add_argument("--step-radius-deg", type=float, help="reachability radius (default 35)")
    group.add_argument("--max-steps", type=int, help="optimizer move limit (default 20)")
    group.add_argument("--alpha", type=float, help="distance penalty weight (default 0.5)")
    group.add_argument("--sphere-radius", type=float, help="waypoint sphere radius in m (default 5)")
    group.add_argument("--threads", type=int, help="worker threads (default 1)")
    group.add_argument("--seed", type=int, help="random seed (default 0)")
    group.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="viewquality",
        description="Viewpoint quality fields over a spherical camera grid and reachable-aware view planning",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    compute = commands.add_parser("compute", help="compute the VQF of one mesh")
    compute.add_argument("mesh", help=".obj or .stl file")
    compute.add_argument("--out", required=True, help="output .vqf.json path")

    batch = commands.add_parser("batch", help="compute VQFs for a directory of meshes")
    batch.add_argument("mesh_dir")
    batch.add_argument("out_dir")
    batch.add_argument("--emit-views", action="store_true", help="write every view image and mask")
    batch.add_argument("--image-format", choices=("png", "pgm"), default="png")

    render = commands.add_parser("render", help="render one grid view of a mesh")
    render.add_argument("mesh")
    render.add_argument("--view", type=int, default=0, help="linear viewpoint index")
    render.add_argument("--out", required=True, help="grayscale image (.png or .pgm)")
    render.add_argument("--mask", help="optional mask image path")

    optimize = commands.add_parser("optimize", help="run the reachable-aware viewpoint optimizer")
    source = optimize.add_mutually_exclusive_group(required=True)
    source.add_argument("--mesh", help="ground-truth mode: compute the VQF of this mesh")
    source.add_argument("--vqf", help="ground-truth mode from a stored VQF")
    source.add_argument("--vqf-seq", help="directory of per-step VQF estimates, consumed in name order")
    optimize.add_argument("--start", default="random", help="start viewpoint index or 'random'")
    optimize.add_argument("--out", required=True, help="trajectory JSON path")
    optimize.add_argument("--agent-pos", help="x,y,z agent position in m; enables waypoint weighting")
    optimize.add_argument("--emit-views", help="directory for the rendered view of every step (needs --mesh)")

    evaluate = commands.add_parser("evaluate", help="mean quality per optimization round")
    evaluate.add_argument("inputs", nargs="+", help=".vqf.json files or meshes")
    evaluate.add_argument("--rounds", type=int, default=9)
    evaluate.add_argument("--starts", type=int, default=10, help="random starts per input")
    evaluate.add_argument("--out", help="optional JSON report path")

    compare = commands.add_parser("compare", help="composite loss of a predicted VQF against ground truth")
    compare.add_argument("pred")
    compare.add_argument("truth")
    compare.add_argument("--lambdas", default="0.3,0.4,0.3", help="l1,dssim,silog weights")
    compare.add_argument("--silog-lambda", type=float, default=0.85)
    compare.add_argument("--out", help="optional JSON report path")

    heatmap = commands.add_parser("heatmap", help="export one VQF channel as an image")
    heatmap.add_argument("vqf")
    heatmap.add_argument("--channel", choices=HEATMAP_CHANNELS, default="combined")
    heatmap.add_argument("--out", required=True, help="image path (.png or .pgm)")
    heatmap.add_argument("--scale", type=int, default=1, help="nearest-neighbour upscaling factor")

    for subparser in (compute, batch, render, optimize, evaluate, compare, heatmap):
        add_global_flags(subparser)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        set_level(args.log_level)
    logger.debug(f"CLI: Running '{args.command}'")
    return handle_command(args)


# Start the app
if __name__ == "__main__":
    sys.exit(main())
