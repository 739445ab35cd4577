"""Around-device input engine: reflected-hand detection, calibration and gestures."""

import json

from glasshands._core import (
    GlassHandsError,
    Pipeline,
    apply_homography,
    classify_zone,
    estimate_homography,
    exit_code,
    process_trajectory,
    reflect_point,
    render_frame,
    run_offline,
)

__all__ = [
    "GlassHandsError",
    "Pipeline",
    "apply_homography",
    "classify_zone",
    "estimate_homography",
    "exit_code",
    "process_trajectory",
    "reflect_point",
    "render_frame",
    "run_offline",
    "events",
]


def events(trajectory, config=None, session="offline"):
    """Process a trajectory (dict or JSON text) and return the events as dicts."""
    text = trajectory if isinstance(trajectory, str) else json.dumps(trajectory)
    cfg = None if config is None else (config if isinstance(config, str) else json.dumps(config))
    result = process_trajectory(text, cfg, session)
    return [json.loads(line) for line in result["events"]]
