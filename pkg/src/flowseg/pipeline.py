"""Windowed segmentation pipeline.

The video is split into consecutive windows of ``window_size`` frames.
Per window: dense flow on the first two frames seeds a segmentation map,
group forces are estimated from it, and the remaining frames are covered
by stochastic propagation instead of further flow computation, yielding
window_size - 1 maps per window. Leftover frames that do not fill a whole
window are skipped (and reported).

Frames and windows are numbered 1-based in all public outputs.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from time import perf_counter
from typing import Iterable, Iterator, Sequence

from .config import ConfigDict, format_config
from .dynamics import ForceAblation, LangevinParams, NoiseSource, estimate_group_forces, propagate_map
from .errors import InputError, SourceError
from .flow import FlowParams, compute_dense_flow
from .io import Frame
from .keypoints import (
    DEFAULT_BIN_COUNT,
    DEFAULT_MAGNITUDE_THRESHOLD,
    DEFAULT_MIN_GROUP_SIZE,
    DEFAULT_PEAK_MIN_FRACTION,
    SegmentationMap,
    segment_flow,
)

log = logging.getLogger(__name__)

PHASE_FLOW = "flow"
PHASE_KEYPOINT = "keypoint"
PHASE_LANGEVIN = "langevin"
PHASE_SKIPPED = "skipped"


@dataclass
class PipelineConfig:
    window_size: int
    seed: int = 0
    flow: FlowParams = field(default_factory=FlowParams)
    magnitude_threshold: float = DEFAULT_MAGNITUDE_THRESHOLD
    bin_count: int = DEFAULT_BIN_COUNT
    peak_min_fraction: float = DEFAULT_PEAK_MIN_FRACTION
    min_group_size: int = DEFAULT_MIN_GROUP_SIZE
    langevin: LangevinParams = field(default_factory=LangevinParams)
    ablation: ForceAblation = field(default_factory=ForceAblation)
    dilation_radius: int = 3
    write_overlays: bool = True

    def __post_init__(self):
        if self.window_size < 3:
            raise InputError("window_size must be >= 3 (2 seed frames + 1 propagated)")
        if self.dilation_radius < 0:
            raise InputError("dilation_radius must be >= 0")

    @classmethod
    def from_config(cls, cfg: ConfigDict, seed_override: int | None = None) -> "PipelineConfig":
        flow = FlowParams(
            pyramid_levels=cfg.get_int("flow_pyramid_levels", 3),
            window_radius=cfg.get_int("flow_window_radius", 4),
            iterations=cfg.get_int("flow_iterations", 4),
            downscale=cfg.get_int("flow_downscale", 2),
        )
        langevin = LangevinParams(
            gamma_x=cfg.get_float("gamma_x", 0.8),
            gamma_y=cfg.get_float("gamma_y", 0.8),
            xi_d_x=cfg.get_float("xi_d_x", 0.1),
            xi_d_y=cfg.get_float("xi_d_y", 0.5),
            dt=cfg.get_float("dt", 1.0),
            confinement_stiffness=cfg.get_float("confinement_stiffness", 0.05),
            sqrt_dt_noise=cfg.get_bool("sqrt_dt_noise", False),
        )
        ablation = ForceAblation(
            external=cfg.get_bool("force_external", True),
            drift_confine=cfg.get_bool("force_drift_confine", True),
            disturbance=cfg.get_bool("force_disturbance", True),
        )
        seed = cfg.get_int("seed", 0) if seed_override is None else seed_override
        return cls(
            window_size=cfg.get_int("window_size"),
            seed=seed,
            flow=flow,
            magnitude_threshold=cfg.get_float("magnitude_threshold", DEFAULT_MAGNITUDE_THRESHOLD),
            bin_count=cfg.get_int("bin_count", DEFAULT_BIN_COUNT),
            peak_min_fraction=cfg.get_float("peak_min_fraction", DEFAULT_PEAK_MIN_FRACTION),
            min_group_size=cfg.get_int("min_group_size", DEFAULT_MIN_GROUP_SIZE),
            langevin=langevin,
            ablation=ablation,
            dilation_radius=cfg.get_int("dilation_radius", 3),
            write_overlays=cfg.get_bool("write_overlays", True),
        )

    def to_dict(self) -> dict:
        return {
            "window_size": self.window_size,
            "seed": self.seed,
            "flow_pyramid_levels": self.flow.pyramid_levels,
            "flow_window_radius": self.flow.window_radius,
            "flow_iterations": self.flow.iterations,
            "flow_downscale": self.flow.downscale,
            "magnitude_threshold": self.magnitude_threshold,
            "bin_count": self.bin_count,
            "peak_min_fraction": self.peak_min_fraction,
            "min_group_size": self.min_group_size,
            "gamma_x": self.langevin.gamma_x,
            "gamma_y": self.langevin.gamma_y,
            "xi_d_x": self.langevin.xi_d_x,
            "xi_d_y": self.langevin.xi_d_y,
            "dt": self.langevin.dt,
            "confinement_stiffness": self.langevin.confinement_stiffness,
            "sqrt_dt_noise": self.langevin.sqrt_dt_noise,
            "force_external": self.ablation.external,
            "force_drift_confine": self.ablation.drift_confine,
            "force_disturbance": self.ablation.disturbance,
            "dilation_radius": self.dilation_radius,
            "write_overlays": self.write_overlays,
        }

    def manifest_text(self, extra: dict | None = None, header: str | None = None) -> str:
        values = dict(self.to_dict())
        if extra:
            values.update(extra)
        return format_config(values, header=header)


@dataclass(frozen=True)
class PhaseTiming:
    frame_index: int
    phase: str
    milliseconds: float


@dataclass
class RunResult:
    maps: list[tuple[int, SegmentationMap]]
    timings: list[PhaseTiming]
    windows: list[tuple[int, int]]  # inclusive 1-based (first, last) frame per window
    skipped_frames: list[int]

    def window_number_of(self, frame_index: int) -> int:
        for number, (first, last) in enumerate(self.windows, start=1):
            if first <= frame_index <= last:
                return number
        raise InputError(f"frame {frame_index} belongs to no window")

    def phase_ms(self, phase: str) -> float:
        return sum(t.milliseconds for t in self.timings if t.phase == phase)


def _process_window(
    window_frames: Sequence[Frame],
    window_number: int,
    first_frame: int,
    cfg: PipelineConfig,
) -> tuple[list[tuple[int, SegmentationMap]], list[PhaseTiming]]:
    timings = []

    t0 = perf_counter()
    flow = compute_dense_flow(window_frames[0], window_frames[1], cfg.flow)
    timings.append(PhaseTiming(first_frame, PHASE_FLOW, (perf_counter() - t0) * 1e3))

    t0 = perf_counter()
    seg = segment_flow(
        flow,
        magnitude_threshold=cfg.magnitude_threshold,
        bin_count=cfg.bin_count,
        peak_min_fraction=cfg.peak_min_fraction,
        min_group_size=cfg.min_group_size,
        frame_index=first_frame + 1,
    )
    params = cfg.ablation.apply_params(cfg.langevin)
    forces = {
        g.id: cfg.ablation.apply_forces(estimate_group_forces(g, cfg.langevin))
        for g in seg.groups
    }
    timings.append(PhaseTiming(first_frame + 1, PHASE_KEYPOINT, (perf_counter() - t0) * 1e3))

    maps = [(first_frame + 1, seg)]
    noise = NoiseSource(cfg.seed, stream=window_number)
    current = seg
    for k in range(cfg.window_size - 2):
        t0 = perf_counter()
        current = propagate_map(current, forces, params, noise, steps=1, step_offset=k)[0]
        frame = first_frame + 2 + k
        timings.append(PhaseTiming(frame, PHASE_LANGEVIN, (perf_counter() - t0) * 1e3))
        maps.append((frame, current))
    return maps, timings


def _check_uniform_dims(frames: Sequence[Frame]) -> None:
    dims = {(f.width, f.height) for f in frames}
    if len(dims) > 1:
        raise InputError(f"inconsistent frame dimensions: {sorted(dims)}")


def segment_video(frames: Sequence[Frame], cfg: PipelineConfig, jobs: int = 1) -> RunResult:
    """Run the full windowed pipeline over an in-memory frame sequence."""
    total = len(frames)
    if total < cfg.window_size:
        raise InputError(
            f"need at least window_size={cfg.window_size} frames, got {total}"
        )
    _check_uniform_dims(frames)
    w = cfg.window_size
    window_count = total // w

    def run(window_idx: int):
        first = window_idx * w + 1
        return _process_window(frames[window_idx * w : (window_idx + 1) * w], window_idx + 1, first, cfg)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_window = list(pool.map(run, range(window_count)))
    else:
        per_window = [run(i) for i in range(window_count)]

    maps: list[tuple[int, SegmentationMap]] = []
    timings: list[PhaseTiming] = []
    for window_maps, window_timings in per_window:
        maps.extend(window_maps)
        timings.extend(window_timings)

    skipped = list(range(window_count * w + 1, total + 1))
    for frame in skipped:
        timings.append(PhaseTiming(frame, PHASE_SKIPPED, 0.0))
    if skipped:
        log.info(
            "skipping %d leftover frame(s) %s (pad the input to a multiple of %d)",
            len(skipped), skipped, w,
        )
    windows = [(i * w + 1, (i + 1) * w) for i in range(window_count)]
    return RunResult(maps=maps, timings=timings, windows=windows, skipped_frames=skipped)


def stream_windows(
    source: Iterable[Frame], cfg: PipelineConfig
) -> Iterator[tuple[int, list[tuple[int, SegmentationMap]]]]:
    """Incrementally yield (window_number, maps) keeping at most one window
    of frames in memory. Matches segment_video output exactly."""
    it = iter(source)
    window_number = 0
    dims: tuple[int, int] | None = None
    while True:
        buffered: list[Frame] = []
        for _ in range(cfg.window_size):
            try:
                buffered.append(next(it))
            except StopIteration:
                if buffered:
                    log.info("skipping %d leftover frame(s) at end of stream", len(buffered))
                return
            except Exception as exc:
                raise SourceError(
                    f"frame source failed inside window {window_number + 1}: {exc}",
                    last_window=window_number,
                ) from exc
        _check_uniform_dims(buffered)
        if dims is None:
            dims = (buffered[0].width, buffered[0].height)
        elif (buffered[0].width, buffered[0].height) != dims:
            raise InputError(
                f"inconsistent frame dimensions across windows: {dims} vs "
                f"{(buffered[0].width, buffered[0].height)}"
            )
        window_number += 1
        first = (window_number - 1) * cfg.window_size + 1
        maps, _ = _process_window(buffered, window_number, first, cfg)
        yield window_number, maps


def replace_seed(cfg: PipelineConfig, seed: int) -> PipelineConfig:
    return replace(cfg, seed=seed)
