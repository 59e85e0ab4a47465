import numpy as np
import pytest
from scipy import ndimage

from garmentuv.errors import ExtentMismatchError, SchemaError
from garmentuv.model import (
    MASK_GARMENT,
    MASK_OCCLUDER,
    Anchor,
    GarmentSchema,
    Panel,
    SegMask,
)
from garmentuv.tps import ControlPairs
from garmentuv.transfer import PanelTexture, compose_atlas, transfer_panel

import oracles


def rgba_noise(rng, w, h):
    img = rng.integers(0, 256, size=(h, w, 4), dtype=np.uint8)
    img[:, :, 3] = 255
    return img


def quad_panel(name="front", rect=(0.0, 0.0, 0.5, 0.5)):
    u0, v0, u1, v1 = rect
    um, vm = (u0 + u1) / 2, (v0 + v1) / 2
    return Panel(
        name=name,
        uv_rect=rect,
        fill_role="direct",
        anchors=(
            Anchor(0, u0 + 0.01, v0 + 0.01),
            Anchor(1, u1 - 0.01, v0 + 0.01),
            Anchor(2, um, vm),
        ),
    )


class TestTransferPanel:
    def test_identity_integer_offset_is_bit_exact(self):
        rng = np.random.default_rng(0)
        image = rgba_noise(rng, 64, 64)
        mask = SegMask.full_garment((64, 64))
        panel = quad_panel(rect=(0.0, 0.0, 0.5, 0.5))
        atlas_size = (64, 64)  # panel extent 32x32
        src = np.array([(4.0, 4.0), (28.0, 4.0), (4.0, 28.0), (28.0, 28.0)])
        pairs = ControlPairs(src, src + np.array([10.0, 6.0]))
        tex = transfer_panel(image, mask, pairs, panel, atlas_size)
        assert tex.valid.all()
        assert np.array_equal(tex.pixels[:, :, :3], image[6:38, 10:42, :3])
        assert (tex.pixels[:, :, 3] == 255).all()

    def test_background_mask_yields_all_hole(self):
        rng = np.random.default_rng(1)
        image = rgba_noise(rng, 64, 64)
        mask = SegMask(np.zeros((64, 64), dtype=np.uint8))
        panel = quad_panel()
        src = np.array([(4.0, 4.0), (28.0, 4.0), (4.0, 28.0), (28.0, 28.0)])
        tex = transfer_panel(image, mask, ControlPairs(src, src + 8.0), panel, (64, 64))
        assert not tex.valid.any()
        assert (tex.pixels == 0).all()

    def test_occluder_hole_matches_oracle_preimage(self):
        # Forward-map every UV pixel centre through an independently
        # fitted spline and require the hole footprints to agree within
        # one pixel of dilation.
        rng = np.random.default_rng(2)
        image = rgba_noise(rng, 100, 100)
        labels = np.full((100, 100), MASK_GARMENT, dtype=np.uint8)
        labels[30:70, 40:80] = MASK_OCCLUDER
        mask = SegMask(labels)

        # Warp chosen so every panel pixel lands inside the image: the
        # only holes are the occluder preimage.
        panel = quad_panel(rect=(0.0, 0.0, 0.625, 0.625))  # 40x40 at atlas 64
        sources = [(5.0, 5.0), (35.0, 5.0), (5.0, 35.0), (35.0, 35.0)]
        targets = [(20.0, 20.0), (80.0, 22.0), (18.0, 78.0), (82.0, 80.0)]
        pairs = ControlPairs(np.array(sources), np.array(targets))
        tex = transfer_panel(image, mask, pairs, panel, (64, 64))

        w, a = oracles.tps_fit(sources, targets)
        expected = np.zeros((40, 40), dtype=bool)
        for y in range(40):
            for x in range(40):
                qx, qy = oracles.tps_eval(sources, w, a, (x + 0.5, y + 0.5))
                expected[y, x] = 40.0 <= qx <= 80.0 and 30.0 <= qy <= 70.0
        actual = ~tex.valid
        assert not (actual & ~ndimage.binary_dilation(expected)).any()
        assert not (expected & ~ndimage.binary_dilation(actual)).any()

    def test_out_of_image_samples_become_holes(self):
        rng = np.random.default_rng(3)
        image = rgba_noise(rng, 40, 40)
        mask = SegMask.full_garment((40, 40))
        panel = quad_panel()
        src = np.array([(4.0, 4.0), (28.0, 4.0), (4.0, 28.0), (28.0, 28.0)])
        # Push the warp halfway off the right edge of the image.
        tex = transfer_panel(
            image, mask, ControlPairs(src, src + np.array([24.0, 0.0])), panel, (64, 64)
        )
        assert tex.valid[:, :10].all()
        assert not tex.valid[:, -10:].any()

    def test_insufficient_pairs_degrade_to_tagged_all_hole(self):
        image = rgba_noise(np.random.default_rng(4), 32, 32)
        mask = SegMask.full_garment((32, 32))
        panel = quad_panel()
        src = np.array([(1.0, 1.0), (9.0, 1.0), (5.0, 9.0)])
        collinear = np.array([(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)])
        tex = transfer_panel(
            image, mask, ControlPairs(collinear, collinear), panel, (64, 64)
        )
        assert not tex.valid.any()
        assert "singular" in tex.error_cause
        del src

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        image = rgba_noise(rng, 64, 64)
        mask = SegMask.full_garment((64, 64))
        panel = quad_panel()
        src = np.array([(4.0, 4.0), (28.0, 4.0), (4.0, 28.0), (28.0, 28.0)])
        tgt = src + rng.uniform(-3, 3, src.shape) + 12.0
        pairs = ControlPairs(src, tgt)
        a = transfer_panel(image, mask, pairs, panel, (64, 64))
        b = transfer_panel(image, mask, pairs, panel, (64, 64))
        assert np.array_equal(a.pixels, b.pixels)
        assert np.array_equal(a.valid, b.valid)

    def test_hole_pixels_are_zeroed(self):
        tex = PanelTexture(
            panel_name="p",
            pixels=np.full((4, 4, 4), 200, dtype=np.uint8),
            valid=np.zeros((4, 4), dtype=bool),
        )
        assert (tex.pixels == 0).all()


def two_panel_schema():
    return GarmentSchema(
        garment_kind="custom",
        landmark_names=("a", "b", "c"),
        atlas_size=(64, 64),
        panels=(
            Panel(
                name="left",
                uv_rect=(0.0, 0.0, 0.5, 0.5),
                fill_role="direct",
                anchors=(Anchor(0, 0.1, 0.1), Anchor(1, 0.4, 0.1), Anchor(2, 0.2, 0.4)),
            ),
            Panel(name="right", uv_rect=(0.5, 0.0, 1.0, 0.5), fill_role="back_fill"),
        ),
    )


class TestComposeAtlas:
    def test_disjoint_panels(self):
        schema = two_panel_schema()
        rng = np.random.default_rng(6)
        lt = PanelTexture(
            "left", rng.integers(0, 255, (32, 32, 4), dtype=np.uint8),
            np.ones((32, 32), dtype=bool),
        )
        rt = PanelTexture(
            "right", rng.integers(0, 255, (32, 32, 4), dtype=np.uint8),
            np.ones((32, 32), dtype=bool),
        )
        atlas = compose_atlas([lt, rt], schema)
        assert np.array_equal(atlas.pixels[0:32, 0:32], lt.pixels)
        assert np.array_equal(atlas.pixels[0:32, 32:64], rt.pixels)
        assert not atlas.valid[32:, :].any()
        assert (atlas.pixels[32:, :] == 0).all()

    def test_empty_panel_list(self):
        atlas = compose_atlas([], two_panel_schema())
        assert (atlas.pixels == 0).all()
        assert not atlas.valid.any()

    def test_extent_mismatch_rejected(self):
        schema = two_panel_schema()
        bad = PanelTexture(
            "left", np.zeros((16, 16, 4), dtype=np.uint8), np.ones((16, 16), dtype=bool)
        )
        with pytest.raises(ExtentMismatchError):
            compose_atlas([bad], schema)

    def test_unknown_panel_rejected(self):
        schema = two_panel_schema()
        bad = PanelTexture(
            "mystery", np.zeros((32, 32, 4), dtype=np.uint8),
            np.ones((32, 32), dtype=bool),
        )
        with pytest.raises(SchemaError, match="unknown panel"):
            compose_atlas([bad], schema)
