import os
from dotenv import load_dotenv

# Load environment variables first - this should be at the very top
load_dotenv()

# Malformed numeric environment values; the command layer reports them as configuration errors
INVALID_SETTINGS = []


def env_number(name, default, cast=int):
    """Read a numeric environment variable, falling back to default when unset or malformed"""
    raw = os.getenv(name)
    if raw is None:
        return cast(default)
    try:
        return cast(raw)
    except ValueError:
        INVALID_SETTINGS.append(f"{name}={raw!r} is not a valid {cast.__name__}")
        return cast(default)


# ----- LOGGING CONFIGURATION -----

LOG_LEVEL = os.getenv("VQF_LOG_LEVEL", "INFO").upper()
LOG_FILE = os.getenv("VQF_LOG_FILE")  # None = log to standard error only

# ----- VIEWPOINT GRID CONFIGURATION -----

# 12 azimuth x 11 polar = 132 candidate viewpoints, poles excluded
GRID_AZ = env_number("VQF_GRID_AZ", "12")
GRID_POL = env_number("VQF_GRID_POL", "11")
GRID_RADIUS = env_number("VQF_RADIUS", "2.5", float)  # normalized units
FOV_DEG = env_number("VQF_FOV_DEG", "45", float)

# ----- METRIC CONFIGURATION -----

RESOLUTION = env_number("VQF_RESOLUTION", "256")
SAMPLES_PER_FACE = env_number("VQF_SAMPLES_PER_FACE", "10")
NORMAL_BINS = os.getenv("VQF_NORMAL_BINS", "8x32")  # polar x azimuth
GRAY_BINS = env_number("VQF_GRAY_BINS", "256")

# Ray-casting tolerances (normalized units)
RAY_EPSILON = 1e-6
OCCLUSION_OFFSET = 1e-4
FRONT_EPS = 1e-9  # relative to the distance to the camera
DEGENERATE_AREA = 1e-12

# ----- OPTIMIZER CONFIGURATION -----

DEFAULT_WEIGHTS = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
STEP_RADIUS_DEG = env_number("VQF_STEP_RADIUS_DEG", "35", float)
MAX_STEPS = env_number("VQF_MAX_STEPS", "20")
ALPHA = env_number("VQF_ALPHA", "0.5", float)
SPHERE_RADIUS = env_number("VQF_SPHERE_RADIUS", "5.0", float)  # meters

# ----- LOSS CONFIGURATION -----

LOSS_LAMBDAS = (0.3, 0.4, 0.3)
SILOG_LAMBDA = 0.85
SILOG_EPSILON = 1e-6
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2

# ----- DATASET CONFIGURATION -----

SPLIT_RATIOS = (0.70, 0.05, 0.25)  # train / val / test
MESH_SUFFIXES = (".obj", ".stl")

# ----- RUNTIME CONFIGURATION -----

THREADS = env_number("VQF_THREADS", "1")
SEED = env_number("VQF_SEED", "0")
LOCK_TIMEOUT = 30  # seconds to wait for a file lock

# ----- FILE FORMAT -----

VQF_SCHEMA_VERSION = 1
VQF_CHANNELS = ("occlusion_ratio", "normal_entropy", "visual_entropy")
VQF_SUFFIX = ".vqf.json"
