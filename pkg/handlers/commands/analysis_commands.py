import json

from config import get_logger
from config.run_config import parse_floats
from services.vqf import channel_heatmap, compare_vqf, load_vqf
from utils.image_io import save_heatmap
from utils.storage import discard_lock, write_json

logger = get_logger("commands.analysis")


def handle_compare_command(args, config) -> int:
    """Print the composite loss of a predicted VQF against ground truth as JSON"""
    lambdas = parse_floats(args.lambdas, 3, "--lambdas")
    report = compare_vqf(load_vqf(args.pred), load_vqf(args.truth), lambdas, args.silog_lambda)

    data = report.to_dict()
    print(json.dumps(data, indent=2))
    if args.out:
        write_json(args.out, data)
        discard_lock(args.out)
    return 0


def handle_heatmap_command(args, config) -> int:
    """Export one VQF channel as an n_pol x n_az grayscale image"""
    vqf = load_vqf(args.vqf)
    save_heatmap(channel_heatmap(vqf, args.channel, config.weights), args.out, args.scale)
    return 0
