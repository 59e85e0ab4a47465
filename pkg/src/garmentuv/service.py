"""Local annotation + live-preview service for the annotator UI.

Loopback-only by design: a single-annotator desk tool, no auth.

Endpoints (bodies are the JSON document formats from docs/formats.md):

    GET  /api/images                 -> [{id, width, height}]
    GET  /api/images/<id>            -> PNG
    GET  /api/annotations/<id>       -> {revision, annotations}
    PUT  /api/annotations/<id>       -> {revision}; 409 on stale revision
    POST /api/preview                -> PNG atlas + X-Hole-Fraction-* headers
    GET  /api/schema/<garment_kind>  -> schema document

Workspace layout:

    workspace/images/<id>.png        (or <id>.image.png)
    workspace/masks/<id>.png         (optional; defaults to all-garment)
    workspace/annotations/<id>.json  ({"revision": n, "annotations": doc})

Previews default to the pre-inpaint atlas with holes drawn as a
checkerboard, since hole geometry is the feedback an annotator needs;
pass {"inpaint": true, "checkerboard": false} for the completed atlas,
which is byte-identical to the batch digitize output at the same
configuration.
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import GarmentUvError, ValidationError
from .imageio import encode_png, read_rgba
from .model import (
    GarmentSchema,
    SegMask,
    annotations_to_doc,
    load_annotations,
    load_default_schema,
    load_mask,
    schema_to_doc,
    validate_annotations,
)
from .pipeline import PipelineConfig, digitize
from .synth import canonical_landmark_positions

CHECKER_SIZE = 8
CHECKER_DARK = (88, 88, 88, 255)
CHECKER_LIGHT = (144, 144, 144, 255)


class HttpError(Exception):
    def __init__(self, status: int, payload: dict):
        super().__init__(payload)
        self.status = status
        self.payload = payload


class Workspace:
    """Image registry + versioned annotation store for one directory."""

    def __init__(self, root, schema: GarmentSchema, seed_defaults: bool = False):
        self.root = Path(root)
        self.schema = schema
        self.seed_defaults = seed_defaults
        self._lock = threading.Lock()
        (self.root / "annotations").mkdir(parents=True, exist_ok=True)

    # -- images

    def image_ids(self) -> list[str]:
        images = self.root / "images"
        ids = set()
        if images.is_dir():
            for p in images.glob("*.png"):
                name = p.name
                ids.add(name[:-10] if name.endswith(".image.png") else p.stem)
        return sorted(ids)

    def image_path(self, image_id: str) -> Path:
        base = self.root / "images"
        for candidate in (base / f"{image_id}.png", base / f"{image_id}.image.png"):
            if candidate.exists():
                return candidate
        raise HttpError(404, {"error": f"unknown image '{image_id}'"})

    def image_size(self, image_id: str) -> tuple[int, int]:
        with Image.open(self.image_path(image_id)) as im:
            return im.size

    def mask_for(self, image_id: str) -> SegMask:
        base = self.root / "masks"
        for candidate in (base / f"{image_id}.png", base / f"{image_id}.mask.png"):
            if candidate.exists():
                return load_mask(candidate)
        return SegMask.full_garment(self.image_size(image_id))

    # -- annotations

    def _ann_path(self, image_id: str) -> Path:
        if not re.fullmatch(r"[A-Za-z0-9._-]+", image_id):
            raise HttpError(422, {"errors": [f"invalid image id '{image_id}'"]})
        return self.root / "annotations" / f"{image_id}.json"

    def get_annotations(self, image_id: str) -> dict:
        path = self._ann_path(image_id)
        if path.exists():
            return json.loads(path.read_text(encoding="utf-8"))
        if self.seed_defaults:
            self.image_path(image_id)  # 404 for unknown images
            return {"revision": 0, "annotations": self.default_layout(image_id)}
        raise HttpError(404, {"error": f"no annotations for '{image_id}'"})

    def put_annotations(self, image_id: str, body: dict) -> dict:
        if "annotations" not in body:
            raise HttpError(422, {"errors": ["missing field 'annotations'"]})
        doc = body["annotations"]
        try:
            ann = load_annotations(doc, self.schema)
        except GarmentUvError as exc:
            raise HttpError(422, {"errors": [str(exc)]}) from exc
        if ann.image_id != image_id:
            raise HttpError(
                422,
                {"errors": [f"document image_id '{ann.image_id}' != '{image_id}'"]},
            )
        path = self._ann_path(image_id)
        with self._lock:
            current = 0
            if path.exists():
                current = json.loads(path.read_text(encoding="utf-8"))["revision"]
            sent = body.get("revision", 0)
            if sent != current:
                raise HttpError(
                    409, {"error": "stale revision", "current_revision": current}
                )
            record = {"revision": current + 1, "annotations": annotations_to_doc(ann)}
            tmp = path.with_name(path.name + ".tmp")
            tmp.write_text(json.dumps(record, indent=2) + "\n", encoding="utf-8")
            tmp.replace(path)
        return {"revision": record["revision"]}

    def default_layout(self, image_id: str) -> dict:
        size = self.image_size(image_id)
        positions = canonical_landmark_positions(self.schema, size)
        return {
            "format_version": 1,
            "image_id": image_id,
            "image_size": [size[0], size[1]],
            "garment_kind": self.schema.garment_kind,
            "landmarks": [
                {"id": i, "x": positions[i][0], "y": positions[i][1], "visible": True}
                for i in sorted(positions)
            ],
        }

    # -- preview

    def preview(self, body: dict) -> tuple[bytes, dict]:
        image_id = body.get("image_id")
        if not image_id:
            raise HttpError(422, {"errors": ["missing field 'image_id'"]})
        image = read_rgba(self.image_path(image_id))
        doc = body.get("annotations")
        if doc is None:
            doc = self.get_annotations(image_id)["annotations"]
        try:
            ann = load_annotations(doc, self.schema)
            validate_annotations(ann, self.schema)
        except GarmentUvError as exc:
            raise HttpError(422, {"errors": [str(exc)]}) from exc
        if ann.image_size != tuple(image.shape[1::-1]):
            raise HttpError(
                422,
                {"errors": [
                    f"annotation image_size {list(ann.image_size)} does not match "
                    f"image {image.shape[1]}x{image.shape[0]}"
                ]},
            )

        atlas_size = int(body.get("atlas_size", 512))
        schema = self.schema.with_atlas_size((atlas_size, atlas_size))
        config = PipelineConfig(lam=float(body.get("lambda", 0.0)))
        mask = self.mask_for(image_id)
        result = digitize(image, mask, ann, schema, config)

        inpainted = bool(body.get("inpaint", False))
        atlas = result.atlas if inpainted else result.pre_atlas
        pixels = atlas.pixels
        if not inpainted and body.get("checkerboard", True):
            pixels = _with_checkerboard(atlas)

        headers = {}
        total_px = 0
        hole_px = 0
        for name, info in result.report["panels"].items():
            headers[f"X-Hole-Fraction-{name}"] = f"{info['hole_fraction']:.6f}"
            x0, y0, x1, y1 = atlas.panel_rects.get(name, (0, 0, 0, 0))
            area = (x1 - x0) * (y1 - y0)
            total_px += area
            hole_px += info["hole_fraction"] * area
        total = hole_px / total_px if total_px else 1.0
        headers["X-Hole-Fraction-Total"] = f"{total:.6f}"
        return encode_png(pixels), headers


def _with_checkerboard(atlas) -> np.ndarray:
    pixels = atlas.pixels.copy()
    h, w = pixels.shape[:2]
    in_panel = np.zeros((h, w), dtype=bool)
    for x0, y0, x1, y1 in atlas.panel_rects.values():
        in_panel[y0:y1, x0:x1] = True
    holes = in_panel & ~atlas.valid
    if holes.any():
        ys, xs = np.nonzero(holes)
        board = ((ys // CHECKER_SIZE) + (xs // CHECKER_SIZE)) % 2
        pixels[ys, xs] = np.where(
            board[:, None] == 0, CHECKER_DARK, CHECKER_LIGHT
        ).astype(np.uint8)
    return pixels


def make_handler(workspace: Workspace, ui_dir: str | None = None):
    ui_root = Path(ui_dir) if ui_dir else None

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet by default
            pass

        # -- plumbing

        def _send(self, status: int, body: bytes, content_type: str,
                  extra: dict | None = None):
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            for key, value in (extra or {}).items():
                self.send_header(key, value)
            self.end_headers()
            self.wfile.write(body)

        def _send_json(self, status: int, payload: dict, extra=None):
            self._send(status, json.dumps(payload).encode(), "application/json",
                       extra)

        def _read_body(self) -> dict:
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length) if length else b"{}"
            try:
                return json.loads(raw)
            except json.JSONDecodeError as exc:
                raise HttpError(422, {"errors": [f"malformed JSON body: {exc}"]})

        def _dispatch(self, method: str):
            try:
                handled = self._route(method)
            except HttpError as exc:
                self._send_json(exc.status, exc.payload)
                return
            except ValidationError as exc:
                self._send_json(422, {"errors": [str(exc)]})
                return
            except Exception as exc:  # internal only: validation is handled above
                self._send_json(500, {"error": f"internal: {exc}"})
                return
            if not handled:
                self._send_json(404, {"error": f"no route for {self.path}"})

        # -- routes

        def _route(self, method: str) -> bool:
            path = self.path.split("?", 1)[0]
            if method == "GET" and path == "/api/images":
                items = [
                    {
                        "id": i,
                        "width": workspace.image_size(i)[0],
                        "height": workspace.image_size(i)[1],
                    }
                    for i in workspace.image_ids()
                ]
                self._send_json(200, {"images": items})
                return True
            m = re.fullmatch(r"/api/images/([A-Za-z0-9._-]+)", path)
            if method == "GET" and m:
                data = workspace.image_path(m.group(1)).read_bytes()
                self._send(200, data, "image/png")
                return True
            m = re.fullmatch(r"/api/annotations/([A-Za-z0-9._-]+)", path)
            if m and method == "GET":
                self._send_json(200, workspace.get_annotations(m.group(1)))
                return True
            if m and method == "PUT":
                result = workspace.put_annotations(m.group(1), self._read_body())
                self._send_json(200, result)
                return True
            if method == "POST" and path == "/api/preview":
                png, headers = workspace.preview(self._read_body())
                self._send(200, png, "image/png", headers)
                return True
            m = re.fullmatch(r"/api/schema/([A-Za-z0-9._-]+)", path)
            if method == "GET" and m:
                kind = m.group(1)
                if kind == workspace.schema.garment_kind:
                    self._send_json(200, schema_to_doc(workspace.schema))
                    return True
                try:
                    self._send_json(200, schema_to_doc(load_default_schema(kind)))
                except GarmentUvError:
                    self._send_json(404, {"error": f"unknown garment '{kind}'"})
                return True
            if method == "GET" and ui_root is not None:
                return self._serve_static(path)
            return False

        def _serve_static(self, path: str) -> bool:
            rel = "index.html" if path == "/" else path.lstrip("/")
            target = (ui_root / rel).resolve()
            if not str(target).startswith(str(ui_root.resolve())):
                return False
            if not target.is_file():
                return False
            types = {
                ".html": "text/html",
                ".js": "text/javascript",
                ".css": "text/css",
                ".svg": "image/svg+xml",
                ".png": "image/png",
            }
            self._send(200, target.read_bytes(),
                       types.get(target.suffix, "application/octet-stream"))
            return True

        # -- verbs

        def do_GET(self):
            self._dispatch("GET")

        def do_PUT(self):
            self._dispatch("PUT")

        def do_POST(self):
            self._dispatch("POST")

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, PUT, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

    return Handler


def create_server(
    workspace_dir,
    schema: GarmentSchema,
    host: str = "127.0.0.1",
    port: int = 7860,
    seed_defaults: bool = False,
    ui_dir: str | None = None,
) -> ThreadingHTTPServer:
    workspace = Workspace(workspace_dir, schema, seed_defaults=seed_defaults)
    handler = make_handler(workspace, ui_dir=ui_dir)
    return ThreadingHTTPServer((host, port), handler)


def serve(workspace_dir, schema, host="127.0.0.1", port=7860, seed_defaults=False,
          ui_dir=None):
    server = create_server(workspace_dir, schema, host, port, seed_defaults, ui_dir)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
