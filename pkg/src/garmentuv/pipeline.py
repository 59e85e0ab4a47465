"""End-to-end digitization: annotated image -> completed UV atlas.

Shared by the CLI and the preview service so that a full-resolution
preview is byte-identical to a batch run with the same configuration.

Per-panel order of operations: direct panels are transferred and then
inpainted to completion; derived panels (back fill, mirror fill) are
produced from completed sources afterwards, since both derivations
require hole-free input.  A panel whose warp cannot be fitted degrades
to an all-hole panel with a warning unless ``strict`` is set.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InpaintError, InsufficientLandmarksError, ValidationError
from .inpaint import BackFillStrategy, InpaintRequest, fill_back_panel, inpaint, mirror_fill
from .model import (
    FILL_BACK,
    FILL_DIRECT,
    FILL_MIRROR,
    AnnotationSet,
    GarmentSchema,
    SegMask,
    anchors_for,
)
from .transfer import PanelTexture, UvAtlas, compose_atlas, transfer_panel

BACK_SOURCE_PANEL = "front"


@dataclass(frozen=True)
class PipelineConfig:
    lam: float = 0.0
    inpaint_method: str = "diffusion"
    inpaint_max_iters: int = 5000
    inpaint_tol: float = 0.25
    inpaint_patch_size: int = 16
    backfill: BackFillStrategy = field(default_factory=BackFillStrategy)
    strict: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.jobs < 1:
            raise ValidationError(f"jobs must be >= 1, got {self.jobs}")


@dataclass
class DigitizeResult:
    atlas: UvAtlas  # post-inpaint, holes filled where possible
    pre_atlas: UvAtlas  # direct transfers only, holes visible
    report: dict


def digitize(
    image: np.ndarray,
    mask: SegMask,
    ann: AnnotationSet,
    schema: GarmentSchema,
    config: PipelineConfig | None = None,
) -> DigitizeResult:
    config = config or PipelineConfig()
    warnings: list[str] = []
    panel_reports: dict[str, dict] = {}
    t_start = time.perf_counter()

    def fail_or_warn(message: str):
        if config.strict:
            raise ValidationError(message)
        warnings.append(message)

    # 1. Transfer every direct panel (parallel when requested; results
    #    keyed by name so ordering never affects output bytes).
    direct = list(schema.direct_panels)

    def run_transfer(panel):
        t0 = time.perf_counter()
        try:
            pairs = anchors_for(panel, schema, ann)
            tex = transfer_panel(image, mask, pairs, panel, schema.atlas_size,
                                 config.lam)
        except InsufficientLandmarksError as exc:
            tex = PanelTexture.all_hole(
                panel.name, panel.pixel_size(schema.atlas_size), str(exc)
            )
        return panel.name, tex, time.perf_counter() - t0

    if config.jobs > 1 and len(direct) > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(run_transfer, direct))
    else:
        results = [run_transfer(p) for p in direct]

    pre_textures = {name: tex for name, tex, _ in results}
    timings = {f"transfer.{name}": dt for name, _, dt in results}

    # 2. Complete direct panels.
    completed: dict[str, PanelTexture] = {}
    for panel in direct:
        tex = pre_textures[panel.name]
        report = {
            "fill_role": FILL_DIRECT,
            "hole_fraction": tex.hole_fraction,
        }
        if tex.error_cause:
            report["error"] = tex.error_cause
            fail_or_warn(f"panel '{panel.name}': {tex.error_cause}")
            completed[panel.name] = tex
        elif not tex.valid.all():
            t0 = time.perf_counter()
            try:
                completed[panel.name] = inpaint(
                    InpaintRequest(
                        tex,
                        method=config.inpaint_method,
                        max_iters=config.inpaint_max_iters,
                        tol=config.inpaint_tol,
                        patch_size=config.inpaint_patch_size,
                    )
                )
            except InpaintError as exc:
                report["error"] = str(exc)
                fail_or_warn(f"panel '{panel.name}': {exc}")
                completed[panel.name] = tex
            timings[f"inpaint.{panel.name}"] = time.perf_counter() - t0
        else:
            completed[panel.name] = tex
        panel_reports[panel.name] = report

    # 3. Derive back-fill panels from the completed front.
    for panel in schema.panels:
        if panel.fill_role != FILL_BACK:
            continue
        source = completed.get(BACK_SOURCE_PANEL)
        report = {"fill_role": FILL_BACK, "hole_fraction": 1.0}
        if source is None or not source.valid.all():
            fail_or_warn(
                f"panel '{panel.name}': no completed '{BACK_SOURCE_PANEL}' "
                "panel to copy from"
            )
            completed[panel.name] = PanelTexture.all_hole(
                panel.name, panel.pixel_size(schema.atlas_size), "no source"
            )
        else:
            t0 = time.perf_counter()
            completed[panel.name] = fill_back_panel(
                source, config.backfill, panel, schema.atlas_size
            )
            timings[f"backfill.{panel.name}"] = time.perf_counter() - t0
            report["hole_fraction"] = 0.0
        panel_reports[panel.name] = report

    # 4. Mirror-fill panels from their completed sources.
    for panel in schema.panels:
        if panel.fill_role != FILL_MIRROR:
            continue
        source = completed.get(panel.mirror_of)
        report = {"fill_role": FILL_MIRROR, "hole_fraction": 1.0}
        if source is None or not source.valid.all():
            fail_or_warn(
                f"panel '{panel.name}': mirror source '{panel.mirror_of}' "
                "is not complete"
            )
            completed[panel.name] = PanelTexture.all_hole(
                panel.name, panel.pixel_size(schema.atlas_size), "no source"
            )
        else:
            completed[panel.name] = mirror_fill(source, panel, schema.atlas_size)
            report["hole_fraction"] = 0.0
        panel_reports[panel.name] = report

    atlas = compose_atlas([completed[p.name] for p in schema.panels], schema)
    pre_atlas = compose_atlas(
        [pre_textures[p.name] for p in schema.panels if p.name in pre_textures],
        schema,
    )
    report = {
        "garment_kind": schema.garment_kind,
        "image_id": ann.image_id,
        "atlas_size": list(schema.atlas_size),
        "panels": panel_reports,
        "warnings": warnings,
        "timings": {k: round(v, 6) for k, v in sorted(timings.items())},
        "total_seconds": round(time.perf_counter() - t_start, 6),
    }
    return DigitizeResult(atlas=atlas, pre_atlas=pre_atlas, report=report)
