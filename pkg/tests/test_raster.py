"""Raster container, bit-exact file I/O, tiling round trips, manifests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandopt.raster import (Raster, RasterFormatError, load_raster,
                            read_manifest, reconstruct, save_raster, tile,
                            write_manifest)


def random_raster(rng, h=13, w=9, d=3, with_mask=True):
    data = rng.standard_normal((h, w, d)).astype(np.float32)
    mask = (rng.uniform(0, 1, (h, w)) > 0.5).astype(np.uint8) if with_mask else None
    return Raster(data=data, mask=mask)


class TestRasterType:
    def test_mask_shape_must_match(self, rng):
        with pytest.raises(ValueError, match="mask shape"):
            Raster(data=np.zeros((4, 4, 2), np.float32), mask=np.zeros((3, 4)))

    def test_mask_values_binary(self):
        with pytest.raises(ValueError, match="0 or 1"):
            Raster(data=np.zeros((2, 2, 1), np.float32),
                   mask=np.full((2, 2), 7))

    def test_non_finite_rejected(self):
        data = np.zeros((2, 2, 1), np.float32)
        data[0, 0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            Raster(data=data)


class TestFileRoundTrip:
    def test_round_trip_bitwise(self, rng, tmp_path):
        r = random_raster(rng)
        path = tmp_path / "a.rst"
        save_raster(r, path)
        back = load_raster(path)
        assert back.data.tobytes() == r.data.tobytes()
        assert back.mask.tobytes() == r.mask.tobytes()

    def test_round_trip_without_mask(self, rng, tmp_path):
        r = random_raster(rng, with_mask=False)
        path = tmp_path / "b.rst"
        save_raster(r, path)
        back = load_raster(path)
        assert back.mask is None
        assert back.data.tobytes() == r.data.tobytes()

    def test_truncated_payload_rejected(self, rng, tmp_path):
        path = tmp_path / "c.rst"
        save_raster(random_raster(rng), path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-7])
        with pytest.raises(RasterFormatError, match="expected .* got"):
            load_raster(path)

    def test_length_mismatch_error_names_byte_counts(self, rng, tmp_path):
        path = tmp_path / "d.rst"
        save_raster(random_raster(rng, h=2, w=2, d=1), path)
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(RasterFormatError) as err:
            load_raster(path)
        assert "20" in str(err.value) and "22" in str(err.value)

    def test_malformed_header_rejected(self, tmp_path):
        path = tmp_path / "e.rst"
        path.write_bytes(b"not-a-raster height=2\n\x00\x00")
        with pytest.raises(RasterFormatError, match="magic"):
            load_raster(path)
        path.write_bytes(b"raster height=2 width=2\n\x00")
        with pytest.raises(RasterFormatError, match="header fields"):
            load_raster(path)

    def test_dimension_overflow_rejected(self, tmp_path):
        path = tmp_path / "f.rst"
        path.write_bytes(b"raster height=999999999 width=999999999 bands=99 "
                         b"dtype=f32 order=HWC has_mask=0\n")
        with pytest.raises(RasterFormatError, match="overflow"):
            load_raster(path)

    def test_missing_header_line(self, tmp_path):
        path = tmp_path / "g.rst"
        path.write_bytes(b"raster height=2")
        with pytest.raises(RasterFormatError, match="header"):
            load_raster(path)


class TestTiling:
    def test_64x64_tile_32_gives_4_tiles(self, rng):
        tiles, layout = tile(rng.standard_normal((64, 64, 3)), 32)
        assert tiles.shape == (4, 32, 32, 3)
        assert (layout.rows, layout.cols) == (2, 2)

    def test_paper_scale_single_tile(self, rng):
        tiles, _ = tile(rng.standard_normal((96, 96, 12)), 96)
        assert tiles.shape == (1, 96, 96, 12)

    def test_padding_shape_arithmetic(self, rng):
        tiles, layout = tile(rng.standard_normal((100, 70, 2)), 32)
        assert tiles.shape == (4 * 3, 32, 32, 2)
        out = reconstruct(tiles, layout)
        assert out.shape == (100, 70, 2)

    @settings(max_examples=40, deadline=None)
    @given(h=st.integers(2, 70), w=st.integers(2, 70), t=st.integers(2, 40),
           channels=st.integers(0, 3), seed=st.integers(0, 2 ** 16))
    def test_round_trip_bitwise(self, h, w, t, channels, seed):
        r = np.random.default_rng(seed)
        shape = (h, w) if channels == 0 else (h, w, channels)
        x = r.standard_normal(shape).astype(np.float32)
        tiles, layout = tile(x, t)
        assert reconstruct(tiles, layout).tobytes() == x.tobytes()

    def test_small_tile_size_rejected(self, rng):
        with pytest.raises(ValueError, match="tile_size"):
            tile(rng.standard_normal((8, 8)), 1)

    def test_layout_mismatch_rejected(self, rng):
        tiles, layout = tile(rng.standard_normal((64, 64)), 32)
        with pytest.raises(ValueError, match="layout"):
            reconstruct(tiles[:2], layout)


class TestManifest:
    def test_round_trip(self, tmp_path):
        entries = [("train", "a.rst"), ("train", "b dir/b.rst"), ("test", "c.rst")]
        path = tmp_path / "manifest.txt"
        write_manifest(entries, path)
        assert read_manifest(path) == entries

    def test_bad_role_rejected_on_write(self, tmp_path):
        with pytest.raises(ValueError, match="train|test"):
            write_manifest([("validate", "x.rst")], tmp_path / "m.txt")

    def test_malformed_line_rejected_on_read(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text("train\ta.rst\nbogus line\n", encoding="utf-8")
        with pytest.raises(ValueError, match="malformed"):
            read_manifest(path)
