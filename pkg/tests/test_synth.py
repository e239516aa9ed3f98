"""Tests for the synthetic generator, PGM I/O and dataset directories."""

import json

import numpy as np
import pytest

from autodiff import Grid
from synth import (
    SynthSpec,
    decode_pgm,
    encode_pgm,
    generate,
    generate_one,
    load_dataset,
    read_manifest,
    read_pgm,
    write_dataset,
    write_pgm,
)
from synth.dataset import IMAGES_DIR, LABELS_DIR, MANIFEST, list_maps
from synth.generator import region_boundaries
from synth.pgm import quantize
from utils.config import ConfigError


@pytest.fixture
def spec():
    return SynthSpec(image_size=24, num_images=6, seed=11)


class TestSynthSpec:
    """Tests for generator settings validation."""

    def test_defaults_valid(self):
        SynthSpec().validate()

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"image_size": 8},
            {"num_images": 0},
            {"min_shapes": 3, "max_shapes": 2},
            {"max_amplitude": 0.5},
            {"min_period": 1},
            {"max_period": 7},
            {"annotators": 0},
            {"annotator_jitter": -1},
            {"kinds": ("hexagon",)},
            {"kinds": ()},
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ConfigError):
            SynthSpec(**kwargs).validate()

    def test_small_image_message(self):
        with pytest.raises(ConfigError, match="image_size 8"):
            generate(SynthSpec(image_size=8))


class TestGenerator:
    """Tests for image, edge and consensus generation."""

    def test_shapes_and_ranges(self, spec):
        for sample in generate(spec):
            assert sample.image.shape == (24, 24, 1)
            assert sample.consensus.shape == (24, 24, 1)
            assert sample.edges.dtype == bool
            assert 0.0 <= sample.image.data.min() and sample.image.data.max() <= 1.0

    def test_same_seed_identical(self, spec):
        first, second = generate(spec), generate(spec)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.image.data, b.image.data)
            np.testing.assert_array_equal(a.consensus.data, b.consensus.data)

    def test_seed_changes_images(self, spec):
        a = generate_one(spec, 0)
        b = generate_one(SynthSpec(image_size=24, num_images=6, seed=12), 0)
        assert not np.array_equal(a.image.data, b.image.data)

    def test_image_independent_of_count(self, spec):
        many = generate(spec)
        one = generate_one(SynthSpec(image_size=24, num_images=1, seed=11), 3)
        np.testing.assert_array_equal(many[3].image.data, one.image.data)

    def test_single_exact_annotator_is_binary_edges(self):
        spec = SynthSpec(image_size=32, num_images=5, annotators=1, annotator_jitter=0, seed=2)
        for sample in generate(spec):
            np.testing.assert_array_equal(sample.consensus.plane(), sample.edges.astype(np.float64))

    def test_consensus_levels(self, spec):
        for sample in generate(spec):
            levels = sample.consensus.plane() * spec.annotators
            np.testing.assert_allclose(levels, np.round(levels), atol=1e-12)

    def test_edge_fraction(self):
        for sample in generate(SynthSpec(num_images=8, seed=4)):
            fraction = sample.edges.mean()
            assert 0.0 < fraction < 0.25

    def test_edges_are_one_pixel_wide(self, spec):
        for sample in generate(spec):
            e = sample.edges
            assert not (e[:-1, :-1] & e[1:, :-1] & e[:-1, 1:] & e[1:, 1:]).any()

    def test_single_kind(self):
        spec = SynthSpec(image_size=20, num_images=3, kinds=("circle",), seed=5)
        assert all(s.edges.any() for s in generate(spec))


class TestRegionBoundaries:
    """Tests for boundary extraction from a region map."""

    def test_square(self):
        regions = np.zeros((10, 10), dtype=np.int64)
        regions[3:7, 3:7] = 1
        edges, owner = region_boundaries(regions)
        assert edges.any()
        assert set(np.unique(owner[edges])) == {1}
        assert not edges[0, :].any() and not edges[:, 0].any()

    def test_uniform_has_no_edges(self):
        edges, _ = region_boundaries(np.zeros((6, 6), dtype=np.int64))
        assert not edges.any()


class TestPgm:
    """Tests for Netpbm graymap encoding and decoding."""

    def test_quantization(self):
        data = encode_pgm(Grid([[0.0, 1.0, 0.5, 0.5]]))
        assert data == b"P5\n4 1\n255\n" + bytes([0, 255, 128, 128])

    def test_quantize_rounds_half_up(self):
        assert quantize(np.array([0.0, 0.5, 1.0, 0.3 / 255])).tolist() == [0, 128, 255, 0]

    def test_decode_scales(self):
        grid = decode_pgm(b"P5\n2 2\n255\n" + bytes([0, 51, 204, 255]))
        np.testing.assert_allclose(grid.plane(), [[0.0, 0.2], [0.8, 1.0]])

    def test_ascii_with_comments(self):
        grid = decode_pgm(b"P2\n# a comment\n3 1\n# another\n4\n0 2 4\n")
        np.testing.assert_allclose(grid.plane(), [[0.0, 0.5, 1.0]])

    def test_sixteen_bit(self):
        payload = np.array([0, 32768, 65535], dtype=">u2").tobytes()
        grid = decode_pgm(b"P5\n3 1\n65535\n" + payload)
        np.testing.assert_allclose(grid.plane(), [[0.0, 32768 / 65535, 1.0]])

    def test_file_round_trip(self, tmp_path):
        values = np.arange(12, dtype=np.float64).reshape(3, 4) / 255.0
        path = tmp_path / "nested" / "map.pgm"
        write_pgm(Grid(values), path)
        np.testing.assert_allclose(read_pgm(path).plane(), values, atol=1e-12)

    @pytest.mark.parametrize(
        "data, match",
        [
            (b"P6\n1 1\n255\n\x00", "bad magic"),
            (b"P5\nx 1\n255\n\x00", "width"),
            (b"P5\n2 2\n255\n\x00\x00", "truncated"),
            (b"P5\n1 1\n70000\n\x00", "maxval"),
            (b"P2\n2 1\n4\n1\n", "truncated"),
            (b"P2\n1 1\n4\n9\n", "exceeds"),
        ],
    )
    def test_decode_errors(self, data, match):
        with pytest.raises(ValueError, match=match):
            decode_pgm(data)

    def test_encode_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            encode_pgm(Grid([[1.5]]))

    def test_encode_rejects_multichannel(self):
        with pytest.raises(ValueError, match="single-channel"):
            encode_pgm(Grid(np.zeros((2, 2, 2))))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_pgm(tmp_path / "absent.pgm")


class TestDataset:
    """Tests for dataset directory layout."""

    def test_write_and_load(self, spec, tmp_path):
        samples = generate(spec)
        write_dataset(samples, spec, tmp_path)
        assert len(list_maps(tmp_path / IMAGES_DIR)) == spec.num_images
        assert len(list_maps(tmp_path / LABELS_DIR)) == spec.num_images

        items = load_dataset(tmp_path)
        assert [item.name for item in items] == ["0000", "0001", "0002", "0003", "0004", "0005"]
        for item, sample in zip(items, samples):
            np.testing.assert_allclose(item.image.plane(), sample.image.plane(), atol=0.5 / 255 + 1e-12)
            np.testing.assert_allclose(item.consensus.plane(), sample.consensus.plane(), atol=0.5 / 255 + 1e-12)

    def test_manifest(self, spec, tmp_path):
        write_dataset(generate(spec), spec, tmp_path)
        manifest = read_manifest(tmp_path)
        assert manifest["count"] == 6
        assert manifest["seed"] == 11
        assert manifest["spec"]["image_size"] == 24
        assert json.loads((tmp_path / MANIFEST).read_text()) == manifest

    def test_rewrite_is_byte_identical(self, spec, tmp_path):
        write_dataset(generate(spec), spec, tmp_path / "a")
        write_dataset(generate(spec), spec, tmp_path / "b")
        for sub in (IMAGES_DIR, LABELS_DIR):
            for path in list_maps(tmp_path / "a" / sub):
                assert path.read_bytes() == (tmp_path / "b" / sub / path.name).read_bytes()

    def test_images_only(self, spec, tmp_path):
        write_dataset(generate(spec), spec, tmp_path)
        assert all(item.consensus is None for item in load_dataset(tmp_path, with_labels=False))

    def test_missing_label(self, spec, tmp_path):
        write_dataset(generate(spec), spec, tmp_path)
        (tmp_path / LABELS_DIR / "0002.pgm").unlink()
        with pytest.raises(FileNotFoundError, match="0002"):
            load_dataset(tmp_path)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset(tmp_path / "nope")

    def test_empty_directory(self, tmp_path):
        (tmp_path / IMAGES_DIR).mkdir()
        with pytest.raises(ValueError, match="No images"):
            load_dataset(tmp_path)
