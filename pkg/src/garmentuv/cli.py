"""Command-line pipeline driver.

Verbs: digitize, synth, eval, export, serve.  Exit codes: 0 success,
1 validation failure, 2 I/O failure, 3 internal error.
"""

from __future__ import annotations

import functools
import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from .errors import GarmentUvError, ValidationError
from .imageio import read_rgba, write_png
from .inpaint import BackFillStrategy
from .metrics import MetricReport, nmse, psnr, ssim
from .model import (
    GarmentSchema,
    load_annotations,
    load_default_schema,
    load_mask,
    load_schema,
)
from .pipeline import PipelineConfig, digitize
from .synth import SynthConfig, emit_dataset, generate

EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_INTERNAL = 3


def resolve_schema(value: str, atlas_size: int | None) -> GarmentSchema:
    if value.endswith(".json") or "/" in value or "\\" in value:
        path = Path(value)
        if not path.exists():
            raise FileNotFoundError(f"file not found: {path}")
        schema = load_schema(path)
    else:
        schema = load_default_schema(value)
    if atlas_size:
        schema = schema.with_atlas_size((atlas_size, atlas_size))
    return schema


def mapped_exit_codes(fn):
    """Map exception classes onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
        except (FileNotFoundError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_IO)
        except GarmentUvError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INTERNAL)

    return wrapper


def write_json_atomic(path: Path, payload) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                   encoding="utf-8")
    tmp.replace(path)


@click.group()
def cli():
    """Digitize garments from catalog images into UV texture atlases."""


def pipeline_options(fn):
    fn = click.option("--schema", "schema_ref", default="tshirt", show_default=True,
                      help="Garment kind (tshirt, trousers) or a schema JSON path.")(fn)
    fn = click.option("--atlas-size", type=int, default=None,
                      help="Override the schema's square atlas size in pixels.")(fn)
    fn = click.option("--lambda", "lam", type=float, default=0.0, show_default=True,
                      help="Warp regularization strength.")(fn)
    fn = click.option("--inpaint", "inpaint_method", default="diffusion",
                      type=click.Choice(["diffusion", "patch_replicate"]),
                      show_default=True)(fn)
    fn = click.option("--inpaint-tol", type=float, default=0.25, show_default=True,
                      help="Diffusion convergence tolerance, 8-bit units.")(fn)
    fn = click.option("--inpaint-max-iters", type=int, default=5000,
                      show_default=True)(fn)
    fn = click.option("--patch-size", type=int, default=16, show_default=True)(fn)
    fn = click.option("--backfill", default="copy_front", show_default=True,
                      type=click.Choice(["copy_front", "uniform_gradient_patch"]))(fn)
    fn = click.option("--strict", is_flag=True,
                      help="Fail instead of degrading panels to holes.")(fn)
    fn = click.option("--jobs", type=int, default=1, show_default=True)(fn)
    return fn


def build_pipeline_config(lam, inpaint_method, inpaint_tol, inpaint_max_iters,
                          patch_size, backfill, strict, jobs):
    return PipelineConfig(
        lam=lam,
        inpaint_method=inpaint_method,
        inpaint_tol=inpaint_tol,
        inpaint_max_iters=inpaint_max_iters,
        inpaint_patch_size=patch_size,
        backfill=BackFillStrategy(backfill, patch_size=patch_size),
        strict=strict,
        jobs=jobs,
    )


def _find_item_file(directory: Path, image_id: str, suffixes) -> Path:
    for suffix in suffixes:
        candidate = directory / f"{image_id}{suffix}"
        if candidate.exists():
            return candidate
    raise FileNotFoundError(
        f"file not found: {directory}/{image_id}{suffixes[0]}"
    )


def _digitize_one(image_path, ann_path, mask_path, schema, config, out_dir):
    if not Path(image_path).exists():
        raise FileNotFoundError(f"file not found: {image_path}")
    if not Path(mask_path).exists():
        raise FileNotFoundError(f"file not found: {mask_path}")
    image = read_rgba(image_path)
    mask = load_mask(mask_path)
    ann = load_annotations(ann_path, schema)
    result = digitize(image, mask, ann, schema, config)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_png(out_dir / f"{ann.image_id}.atlas.png", result.atlas.pixels)
    holes = np.where(result.pre_atlas.valid, 255, 0).astype(np.uint8)
    write_png(out_dir / f"{ann.image_id}.holes.png", holes)
    write_json_atomic(out_dir / f"{ann.image_id}.report.json", result.report)
    return result


@cli.command("digitize")
@click.argument("image", type=click.Path())
@click.argument("annotations", type=click.Path(exists=True))
@click.argument("mask", type=click.Path())
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@pipeline_options
@mapped_exit_codes
def cmd_digitize(image, annotations, mask, out, schema_ref, atlas_size, lam,
                 inpaint_method, inpaint_tol, inpaint_max_iters, patch_size,
                 backfill, strict, jobs):
    """Digitize one annotated image, or a directory of annotations.

    In directory mode IMAGE and MASK are directories searched for
    <image_id>.image.png / <image_id>.mask.png (or <image_id>.png).
    """
    schema = resolve_schema(schema_ref, atlas_size)
    config = build_pipeline_config(lam, inpaint_method, inpaint_tol,
                                   inpaint_max_iters, patch_size, backfill,
                                   strict, jobs)
    out_dir = Path(out)
    ann_path = Path(annotations)

    if ann_path.is_dir():
        docs = sorted(ann_path.glob("*.json"))
        docs = [d for d in docs if d.name != "manifest.json"]
        if not docs:
            raise ValidationError(f"no annotation documents in {ann_path}")
        failures = 0
        for doc in docs:
            try:
                image_id = json.loads(doc.read_text())["image_id"]
                img = _find_item_file(Path(image), image_id, (".image.png", ".png"))
                msk = _find_item_file(Path(mask), image_id, (".mask.png", ".png"))
                result = _digitize_one(img, doc, msk, schema, config, out_dir)
                for w in result.report["warnings"]:
                    click.echo(f"warning [{image_id}]: {w}", err=True)
                click.echo(f"ok {image_id}")
            except (GarmentUvError, OSError, KeyError, json.JSONDecodeError) as exc:
                failures += 1
                click.echo(f"failed {doc.name}: {exc}", err=True)
                if strict:
                    raise ValidationError(f"strict mode: {doc.name}: {exc}") from exc
        click.echo(f"digitized {len(docs) - failures}/{len(docs)} items")
        if failures == len(docs):
            raise ValidationError("every item in the batch failed")
    else:
        result = _digitize_one(image, ann_path, mask, schema, config, out_dir)
        for w in result.report["warnings"]:
            click.echo(f"warning: {w}", err=True)
        click.echo(f"wrote atlas to {out_dir}")


@cli.command("synth")
@click.option("--out", required=True, type=click.Path())
@click.option("--schema", "schema_ref", default="tshirt", show_default=True)
@click.option("--atlas-size", type=int, default=512, show_default=True)
@click.option("--count", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--texture", default="checks", show_default=True,
              type=click.Choice(["solid", "stripes", "checks", "gradient",
                                 "perlin_noise", "logo_stamp"]))
@click.option("--warp-magnitude", type=float, default=0.0, show_default=True)
@click.option("--occluders", type=int, default=0, show_default=True)
@click.option("--occluder-size", nargs=2, type=float, default=(0.04, 0.10),
              show_default=True)
@click.option("--lighting-modes", type=int, default=1, show_default=True)
@click.option("--image-size", nargs=2, type=int, default=(768, 1024),
              show_default=True, help="Width and height of generated images.")
@mapped_exit_codes
def cmd_synth(out, schema_ref, atlas_size, count, seed, texture, warp_magnitude,
              occluders, occluder_size, lighting_modes, image_size):
    """Generate a synthetic dataset with exact ground truth."""
    schema = resolve_schema(schema_ref, atlas_size)
    config = SynthConfig(
        seed=seed,
        count=count,
        garment_kind=schema.garment_kind,
        texture_family=texture,
        warp_magnitude=warp_magnitude,
        occluder_count=occluders,
        occluder_size_range=tuple(occluder_size),
        lighting_modes=lighting_modes,
        image_size=tuple(image_size),
    )
    manifest = emit_dataset(generate(config, schema), out)
    click.echo(f"wrote {len(manifest['entries'])} files to {out}")


def _metric_value(v: float):
    return "inf" if math.isinf(v) else v


@cli.command("eval")
@click.argument("pred_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("gt_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--schema", "schema_ref", default="tshirt", show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="Write the JSONL report here instead of stdout.")
@mapped_exit_codes
def cmd_eval(pred_dir, gt_dir, schema_ref, out):
    """Compare predictions against ground truth, pairing files by image id.

    Annotation documents (*.annotations.json) are scored with NMSE;
    atlas images (*.atlas.png) with PSNR and SSIM.  One JSONL record per
    item plus one aggregate record per metric.
    """
    schema = resolve_schema(schema_ref, None)
    pred, gt = Path(pred_dir), Path(gt_dir)
    records = []
    reports = {m: MetricReport(m) for m in ("nmse", "psnr", "ssim")}

    for pred_doc in sorted(pred.glob("*.annotations.json")):
        gt_doc = gt / pred_doc.name
        if not gt_doc.exists():
            continue
        p = load_annotations(pred_doc, schema)
        g = load_annotations(gt_doc, schema)
        value = nmse(p, g)
        reports["nmse"].details.append(value)
        records.append({"image_id": p.image_id, "metric": "nmse", "value": value})

    for pred_png in sorted(pred.glob("*.atlas.png")):
        gt_png = gt / pred_png.name
        if not gt_png.exists():
            continue
        a = read_rgba(pred_png)
        b = read_rgba(gt_png)
        image_id = pred_png.name[: -len(".atlas.png")]
        both_valid = (a[:, :, 3] == 255) & (b[:, :, 3] == 255)
        p_val = psnr(a, b, both_valid) if both_valid.any() else psnr(a, b)
        s_val = ssim(a, b)
        reports["psnr"].details.append(p_val)
        reports["ssim"].details.append(s_val)
        records.append(
            {"image_id": image_id, "metric": "psnr", "value": _metric_value(p_val)}
        )
        records.append({"image_id": image_id, "metric": "ssim", "value": s_val})

    if not records:
        raise ValidationError("no overlapping items between the two directories")

    records.sort(key=lambda r: (r["metric"], r["image_id"]))
    for name in sorted(reports):
        report = reports[name]
        if not report.count:
            continue
        records.append(
            {
                "metric": name,
                "aggregate": _metric_value(report.value),
                "count": report.count,
            }
        )
    lines = "\n".join(json.dumps(r, sort_keys=True) for r in records) + "\n"
    if out:
        Path(out).write_text(lines, encoding="utf-8")
        click.echo(f"wrote report to {out}")
    else:
        click.echo(lines, nl=False)


@cli.command("export")
@click.option("--atlas", "atlas_path", required=True, type=click.Path())
@click.option("--mesh", "mesh_path", required=True, type=click.Path())
@click.option("--skeleton", "skeleton_path", required=True, type=click.Path())
@click.option("--pose", "pose_path", type=click.Path(), default=None,
              help="Pose JSON; omit to export the rest pose.")
@click.option("--schema", "schema_ref", default="tshirt", show_default=True)
@click.option("--hold-frames", type=int, default=10, show_default=True)
@click.option("--transition-frames", type=int, default=20, show_default=True)
@click.option("--name", default="garment", show_default=True)
@click.option("--out", required=True, type=click.Path())
@mapped_exit_codes
def cmd_export(atlas_path, mesh_path, skeleton_path, pose_path, schema_ref,
               hold_frames, transition_frames, name, out):
    """Apply an atlas to the template mesh, repose it, and export OBJ."""
    from .mesh import (
        Pose,
        PoseSequence,
        export_textured,
        load_mesh,
        pose_frames,
        quat_normalize,
        rest_pose,
        skin,
    )
    from .transfer import UvAtlas

    for p in (atlas_path, mesh_path, skeleton_path):
        if not Path(p).exists():
            raise FileNotFoundError(f"file not found: {p}")
    mesh = load_mesh(mesh_path, skeleton_path)
    pixels = read_rgba(atlas_path)
    schema = resolve_schema(schema_ref, None)
    schema = schema.with_atlas_size((pixels.shape[1], pixels.shape[0]))
    rects = {
        p.name: p.pixel_rect(schema.atlas_size) for p in schema.panels
    }
    atlas = UvAtlas(
        size=(pixels.shape[1], pixels.shape[0]),
        pixels=pixels,
        valid=pixels[:, :, 3] == 255,
        panel_rects=rects,
    )

    rest = rest_pose(mesh)
    if pose_path:
        doc = json.loads(Path(pose_path).read_text(encoding="utf-8"))
        rotations = dict(rest.rotations)
        for joint, quat in doc.get("rotations", {}).items():
            if joint not in rotations:
                raise ValidationError(f"pose references unknown joint '{joint}'")
            rotations[joint] = quat_normalize(quat)
        target = Pose(rotations=rotations,
                      root_translation=doc.get("root_translation", (0, 0, 0)))
    else:
        target = rest

    seq = PoseSequence((rest, rest_pose(mesh), target), hold_frames,
                       transition_frames)
    final = pose_frames(mesh, seq)[-1]
    posed = skin(mesh, final)
    paths = export_textured(mesh, posed, atlas, out, name)
    click.echo("wrote " + ", ".join(str(p) for p in paths))


@cli.command("serve")
@click.option("--workspace", required=True, type=click.Path(exists=True,
              file_okay=False))
@click.option("--schema", "schema_ref", default="tshirt", show_default=True)
@click.option("--atlas-size", type=int, default=None)
@click.option("--port", type=int, default=7860, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--seed-defaults", is_flag=True,
              help="Serve a canonical landmark layout for unannotated images.")
@click.option("--ui-dir", type=click.Path(file_okay=False), default=None,
              help="Serve a built annotator UI from this directory at /.")
@mapped_exit_codes
def cmd_serve(workspace, schema_ref, atlas_size, port, host, seed_defaults, ui_dir):
    """Run the local annotation/preview service."""
    from .service import serve

    schema = resolve_schema(schema_ref, atlas_size)
    click.echo(f"serving {workspace} on http://{host}:{port}")
    serve(workspace, schema, host=host, port=port, seed_defaults=seed_defaults,
          ui_dir=ui_dir)


def main():
    cli()


if __name__ == "__main__":
    main()
