# Re-export everything from sub-modules so `from config import X` works everywhere.
# RunConfig lives in config.run_config and is imported from there (it depends on services).

from config.settings import (
    LOG_LEVEL,
    LOG_FILE,
    INVALID_SETTINGS,
    GRID_AZ,
    GRID_POL,
    GRID_RADIUS,
    FOV_DEG,
    RESOLUTION,
    SAMPLES_PER_FACE,
    NORMAL_BINS,
    GRAY_BINS,
    RAY_EPSILON,
    OCCLUSION_OFFSET,
    FRONT_EPS,
    DEGENERATE_AREA,
    DEFAULT_WEIGHTS,
    STEP_RADIUS_DEG,
    MAX_STEPS,
    ALPHA,
    SPHERE_RADIUS,
    LOSS_LAMBDAS,
    SILOG_LAMBDA,
    SILOG_EPSILON,
    SSIM_C1,
    SSIM_C2,
    SPLIT_RATIOS,
    MESH_SUFFIXES,
    THREADS,
    SEED,
    LOCK_TIMEOUT,
    VQF_SCHEMA_VERSION,
    VQF_CHANNELS,
    VQF_SUFFIX,
)

from config.logging_setup import (
    log_formatter,
    stream_handler,
    file_handler,
    root_logger,
    get_logger,
    set_level,
    logger,
)
