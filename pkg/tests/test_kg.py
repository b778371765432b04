import json

import numpy as np
import pytest

from psqe.errors import DataError
from psqe.kg import AlignmentMap, load_kg, save_kg, validate_kg
from psqe.matio import read_matrix, write_matrix
from psqe.synth import SynthConfig, synth_generate

from conftest import build_kg


def write_graph_files(tmp_path, n, edges, visual, attribute, relation,
                      manifest_extra=None):
    write_matrix(tmp_path / "visual.mat", np.asarray(visual, dtype=np.float64))
    write_matrix(tmp_path / "attribute.mat", np.asarray(attribute, dtype=np.float64))
    write_matrix(tmp_path / "relation.mat", np.asarray(relation, dtype=np.float64))
    with open(tmp_path / "adjacency.txt", "w") as fh:
        for u, v in edges:
            fh.write(f"{u} {v}\n")
    manifest = {"n_entities": n, "adjacency": "adjacency.txt",
                "visual": "visual.mat", "attribute": "attribute.mat",
                "relation": "relation.mat"}
    manifest.update(manifest_extra or {})
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest))
    return path


def test_matrix_container_round_trip(tmp_path):
    mat = np.arange(12, dtype=np.float64).reshape(3, 4) / 7.0
    want = mat.astype(np.float32).astype(np.float64)
    write_matrix(tmp_path / "m.mat", mat)
    got = read_matrix(tmp_path / "m.mat")
    assert np.array_equal(got, want)


def test_matrix_container_rejects_garbage(tmp_path):
    (tmp_path / "bad.mat").write_bytes(b"NOPE" + b"\x00" * 12)
    with pytest.raises(DataError, match="magic"):
        read_matrix(tmp_path / "bad.mat")
    with pytest.raises(DataError, match="not found"):
        read_matrix(tmp_path / "missing.mat")


def test_load_smallest_wellformed_graph(tmp_path):
    path = write_graph_files(tmp_path, 3, [(0, 1), (1, 2)],
                             np.eye(3), np.eye(3), np.eye(3))
    kg = load_kg(path)
    assert kg.n_entities == 3
    assert [list(nb) for nb in kg.adjacency] == [[1], [0, 2], [1]]


def test_load_dimension_mismatch(tmp_path):
    path = write_graph_files(tmp_path, 3, [(0, 1)],
                             np.eye(2), np.eye(3), np.eye(3))
    with pytest.raises(DataError, match="visual matrix has 2 rows"):
        load_kg(path)


def test_missing_visual_row_filled(tmp_path):
    rng = np.random.default_rng(0)
    visual = rng.normal(2.0, 0.1, (30, 16))
    visual[7] = np.nan
    path = write_graph_files(tmp_path, 30, [(0, 1)],
                             visual, np.eye(30), np.eye(30))
    kg = load_kg(path)
    assert np.isfinite(kg.visual).all()
    assert kg.visual.shape == (30, 16)
    # oracle: mean/std of the present rows by direct summation
    present = [visual[i] for i in range(30) if i != 7]
    total = 0.0
    count = 0
    for row in present:
        for x in row:
            total += x
            count += 1
    mean = total / count
    sq = 0.0
    for row in present:
        for x in row:
            sq += (x - mean) ** 2
    std = (sq / count) ** 0.5
    d = visual.shape[1]
    assert abs(kg.visual[7].mean() - mean) < 3 * std / np.sqrt(d)
    # untouched rows survive the float32 container round trip exactly
    assert np.array_equal(kg.visual[0], visual[0].astype(np.float32).astype(np.float64))


def test_partial_nan_rejected(tmp_path):
    visual = np.eye(3)
    visual[1, 0] = np.nan
    path = write_graph_files(tmp_path, 3, [(0, 1)], visual, np.eye(3), np.eye(3))
    with pytest.raises(DataError, match="row 1"):
        load_kg(path)


def test_nan_in_attribute_rejected(tmp_path):
    attr = np.eye(3)
    attr[2, 2] = np.nan
    path = write_graph_files(tmp_path, 3, [(0, 1)], np.eye(3), attr, np.eye(3))
    with pytest.raises(DataError, match="attribute row 2"):
        load_kg(path)


def test_manifest_not_found():
    with pytest.raises(DataError, match="no/such/manifest.json"):
        load_kg("no/such/manifest.json")


def test_validate_wellformed_is_empty(small_clean_pair):
    kg1, _, _ = small_clean_pair
    assert validate_kg(kg1) == []


def test_validate_reports_asymmetry():
    kg = build_kg(3, [], np.eye(3), np.eye(3), np.eye(3))
    broken = kg.adjacency[:1] + (np.array([2]),) + kg.adjacency[2:]
    kg = type(kg)(n_entities=3, adjacency=broken, visual=kg.visual,
                  attribute=kg.attribute, relation=kg.relation)
    violations = validate_kg(kg)
    assert len(violations) == 1
    assert violations[0].kind == "asymmetry"
    assert violations[0].entity == 1


def test_validate_reports_nan():
    visual = np.eye(3)
    visual[0, 0] = np.nan
    kg = build_kg(3, [(0, 1)], visual, np.eye(3), np.eye(3))
    violations = validate_kg(kg)
    assert [v.kind for v in violations] == ["non_finite"]
    assert violations[0].entity == 0


def test_save_load_round_trip(tmp_path, small_clean_pair):
    kg1, _, _ = small_clean_pair
    manifest = save_kg(kg1, tmp_path / "kg")
    loaded = load_kg(manifest)
    assert loaded.n_entities == kg1.n_entities
    assert np.array_equal(loaded.visual, kg1.visual)
    assert np.array_equal(loaded.attribute, kg1.attribute)
    assert np.array_equal(loaded.relation, kg1.relation)
    assert all(np.array_equal(a, b)
               for a, b in zip(loaded.adjacency, kg1.adjacency))
    assert loaded.labels == kg1.labels


def test_alignment_map_one_to_one_and_round_trip(tmp_path):
    with pytest.raises(DataError):
        AlignmentMap(pairs=((0, 1), (0, 2)))
    amap = AlignmentMap(pairs=((0, 1), (1, 0)))
    amap.save(tmp_path / "truth.txt")
    assert AlignmentMap.load(tmp_path / "truth.txt").pairs == amap.pairs
