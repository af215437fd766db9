import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fecseg import IngestionError, ParameterError, PointCloud
from fecseg.io import (PALETTE, UNLABELED_RGB, CloudFormat, FormatError, detect_format,
                       label_colors, read_cloud, read_labels, write_cloud, write_colored_ply,
                       write_labels)


def test_kitti_two_points(tmp_path):
    p = tmp_path / "scan.bin"
    p.write_bytes(struct.pack("<8f", 1, 2, 3, 0.5, -4, 5.5, 6, 0.25))
    cloud = read_cloud(p)
    assert cloud.xyz.tolist() == [[1, 2, 3], [-4, 5.5, 6]]
    assert cloud.intensity.tolist() == [0.5, 0.25]


def test_kitti_truncated_reports_offset(tmp_path):
    p = tmp_path / "scan.bin"
    p.write_bytes(b"\0" * 37)
    with pytest.raises(FormatError) as err:
        read_cloud(p)
    assert err.value.offset == 32
    assert "32" in str(err.value)


def test_kitti_non_finite_record(tmp_path):
    p = tmp_path / "scan.bin"
    p.write_bytes(struct.pack("<12f", 0, 0, 0, 0, 1, 1, 1, 0, 2, float("nan"), 2, 0))
    with pytest.raises(IngestionError) as err:
        read_cloud(p)
    assert err.value.record == 2


def test_csv_examples(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("0,0,0\n1,0,0\n")
    assert read_cloud(p).xyz.tolist() == [[0, 0, 0], [1, 0, 0]]
    p.write_text("x,y,z,intensity\n0,1,2,9\n3,4,5,8\n")
    cloud = read_cloud(p)
    assert cloud.xyz.tolist() == [[0, 1, 2], [3, 4, 5]]
    assert cloud.intensity.tolist() == [9, 8]
    p.write_text("x,y,z\n")
    assert len(read_cloud(p)) == 0


def test_csv_errors(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("0,0\n")
    with pytest.raises(FormatError):
        read_cloud(p)
    p.write_text("0,0,0\n1,2\n")
    with pytest.raises(FormatError):
        read_cloud(p)
    p.write_text("0,0,0\n1,inf,0\n")
    with pytest.raises(IngestionError) as err:
        read_cloud(p)
    assert err.value.record == 1


def test_sentinel_order(tmp_path):
    xyz = np.column_stack([np.arange(50)[::-1], np.zeros(50), np.arange(50) % 7]).astype(float)
    cloud = PointCloud(xyz, intensity=np.arange(50.0))
    for name in ("c.csv", "c.ply", "c.bin"):
        write_cloud(cloud, tmp_path / name)
        back = read_cloud(tmp_path / name)
        assert back.xyz.tolist() == xyz.tolist()
        assert back.intensity.tolist() == list(range(50))


def test_ply_skips_other_elements_and_properties(tmp_path):
    p = tmp_path / "m.ply"
    p.write_text("ply\nformat ascii 1.0\ncomment hi\nelement vertex 2\nproperty float nx\n"
                 "property float z\nproperty float y\nproperty float x\n"
                 "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
                 "9 3 2 1\n9 6 5 4\n3 0 1 1\n")
    assert read_cloud(p).xyz.tolist() == [[1, 2, 3], [4, 5, 6]]


def test_ply_rejects_binary(tmp_path):
    p = tmp_path / "b.ply"
    p.write_text("ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n")
    with pytest.raises(FormatError):
        read_cloud(p)


finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(finite, finite, finite), max_size=30))
def test_ply_round_trip(tmp_path_factory, pts):
    path = tmp_path_factory.mktemp("ply") / "r.ply"
    cloud = PointCloud(np.array(pts, dtype=float).reshape(-1, 3))
    write_cloud(cloud, path)
    back = read_cloud(path)
    np.testing.assert_allclose(back.xyz, cloud.xyz, rtol=1e-6, atol=0)


def test_format_detection(tmp_path):
    assert detect_format("a.BIN") is CloudFormat.KITTI_BIN
    assert detect_format("a.txt", "ply_ascii") is CloudFormat.PLY_ASCII
    with pytest.raises(ParameterError):
        detect_format("a.las")
    with pytest.raises(ParameterError):
        detect_format("a.csv", "pcd")


def test_missing_file_names_path(tmp_path):
    p = tmp_path / "nope.csv"
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        read_cloud(p)


def test_labels_format(tmp_path):
    p = tmp_path / "l.csv"
    write_labels([1, 1, 2], p)
    assert p.read_text() == "index,label\n0,1\n1,1\n2,2\n"
    write_labels([], p)
    assert p.read_text() == "index,label\n"
    assert read_labels(p).tolist() == []


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 10**9), max_size=100))
def test_labels_round_trip(tmp_path_factory, labels):
    p = tmp_path_factory.mktemp("lab") / "l.csv"
    write_labels(labels, p)
    assert read_labels(p).tolist() == labels


def test_read_labels_errors(tmp_path):
    p = tmp_path / "l.csv"
    p.write_text("idx,lab\n0,1\n")
    with pytest.raises(FormatError):
        read_labels(p)
    p.write_text("index,label\n1,1\n")
    with pytest.raises(FormatError):
        read_labels(p)


def test_colored_ply(tmp_path):
    p = tmp_path / "c.ply"
    write_colored_ply(PointCloud([[0, 0, 0]]), [0], p)
    text = p.read_text().splitlines()
    assert text[-1].split()[-3:] == ["128", "128", "128"]
    assert "element vertex 1" in text


def test_colored_ply_reparses_and_colors_by_label(tmp_path, rng):
    xyz = rng.uniform(0, 1, size=(40, 3))
    labels = rng.integers(0, 300, 40)
    labels[:5] = 7
    p = tmp_path / "c.ply"
    write_colored_ply(PointCloud(xyz), labels, p)
    back = read_cloud(p)
    assert len(back) == 40
    np.testing.assert_allclose(back.xyz, xyz, rtol=1e-12)
    rows = [ln.split()[-3:] for ln in p.read_text().splitlines()[-40:]]
    assert len({tuple(r) for r in rows[:5]}) == 1
    rgb = label_colors(labels)
    assert [list(map(int, r)) for r in rows] == rgb.tolist()
    assert (label_colors([256 + 3]) == PALETTE[3]).all()
    with pytest.raises(ParameterError):
        write_colored_ply(PointCloud(xyz), labels[:-1], p)


def test_palette_is_fixed():
    assert PALETTE.shape == (256, 3) and PALETTE.dtype == np.uint8
    assert UNLABELED_RGB == (128, 128, 128)
    assert len({tuple(c) for c in PALETTE[:32].tolist()}) == 32
