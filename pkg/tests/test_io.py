import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vinecg.bicop import INDEPENDENCE, BivariateCopula
from vinecg.builder import BuildConfig, build, random_structure
from vinecg.errors import DataError, ModelFormatError
from vinecg.io import load, read_csv, save, write_csv
from vinecg.sampler import sample
from vinecg.vcg import CopulaVertex, VineModel, fig1a_fixture, validate


def test_d2_independence_document():
    doc = json.loads(save(VineModel(2, [CopulaVertex(0, 1, (), INDEPENDENCE)])))
    assert doc["schema_version"] == 1
    assert doc["d"] == 2
    assert [r["family"] for r in doc["vertices"]] == ["independence"]


def test_fig1a_records():
    doc = json.loads(save(fig1a_fixture()))
    assert len(doc["vertices"]) == 10
    sizes = [sum(1 for r in doc["vertices"] if len(r["cond"]) == k) for k in range(4)]
    assert sizes == [4, 3, 2, 1]
    levels = [len(r["cond"]) for r in doc["vertices"]]
    assert levels == sorted(levels)


def test_roundtrip_random_built_models():
    rng = np.random.default_rng(0)
    for i in range(100):
        d = int(rng.integers(2, 8))
        cond = tuple(sorted(rng.choice(d, int(rng.integers(0, d)), replace=False).tolist()))
        kind = ("rvine", "cvine", "dvine")[i % 3]
        truth = random_structure(d, rng, cond, kind, BivariateCopula("clayton", 0, float(rng.uniform(0.5, 4))))
        m = build(sample(truth, 60, seed=i), BuildConfig(cond_set=cond, structure_kind=kind))
        text = save(m)
        back = load(text)
        assert back == m
        assert back.default_order == m.default_order
        assert back.cond_set == m.cond_set
        assert save(back) == text


def test_theta_exact_roundtrip():
    cop = BivariateCopula("frank", 0, 0.1 + 0.2)
    m = VineModel(2, [CopulaVertex(0, 1, (), cop)])
    assert load(save(m)).copulas[0].copula.theta == cop.theta


def test_bytes_input_and_provenance():
    text = save(fig1a_fixture(), provenance="fitted on demo")
    assert json.loads(text)["provenance"] == "fitted on demo"
    assert load(text.encode()) == fig1a_fixture()


def test_truncated_document_reports_offset():
    text = save(fig1a_fixture())
    with pytest.raises(ModelFormatError, match=r"byte offset \d+"):
        load(text[: len(text) // 2])


def test_proximity_violation_reported():
    doc = json.loads(save(VineModel(3, [CopulaVertex(0, 1), CopulaVertex(0, 2), CopulaVertex(1, 2, (0,))])
                          .with_copulas(INDEPENDENCE)))
    doc["vertices"][2].update(left=0, right=2, cond=[1])
    with pytest.raises(ModelFormatError, match="proximity"):
        load(json.dumps(doc))


def _doc():
    return json.loads(save(fig1a_fixture(BivariateCopula("gaussian", 0, 0.3))))


@pytest.mark.parametrize(
    "mutate,pattern",
    [
        (lambda d: d.update(schema_version=2), "schema_version"),
        (lambda d: d.pop("d"), "d"),
        (lambda d: d.update(extra=1), "extra"),
        (lambda d: d["vertices"][3].update(theta=2.0), r"vertices\[3\]"),
        (lambda d: d["vertices"][0].update(family="student"), r"vertices\[0\].family"),
        (lambda d: d["vertices"].pop(), "records"),
        (lambda d: d.update(default_order=[2]), "default_order"),
        (lambda d: d.update(d="five"), r"\$\.d"),
    ],
)
def test_schema_errors_name_the_field(mutate, pattern):
    doc = _doc()
    mutate(doc)
    with pytest.raises(ModelFormatError, match=pattern):
        load(json.dumps(doc))


def test_non_utf8_and_nan():
    with pytest.raises(ModelFormatError):
        load(b"\xff\xfe{")
    with pytest.raises(ModelFormatError):
        load(save(fig1a_fixture()).replace('"theta": 0.0', '"theta": NaN', 1))


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=300))
def test_fuzz_bytes(data):
    try:
        load(data)
    except ModelFormatError:
        pass


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2000), st.integers(0, 255))
def test_fuzz_mutated_documents(pos, byte):
    raw = bytearray(save(fig1a_fixture(BivariateCopula("gumbel", 0, 1.5))).encode())
    raw[pos % len(raw)] = byte
    try:
        m = load(bytes(raw))
    except ModelFormatError:
        return
    assert validate(m) == []


def test_deeply_nested_json():
    with pytest.raises(ModelFormatError):
        load("[" * 100000 + "]" * 100000)


def test_read_csv_basic(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("a,b\n1,2\n3,4\n")
    values, names = read_csv(p)
    np.testing.assert_array_equal(values, [[1, 2], [3, 4]])
    assert names == ["a", "b"]


def test_read_csv_single_column_and_crlf(tmp_path):
    p = tmp_path / "x.csv"
    p.write_bytes(b"x\r\n1\r\n2\r\n")
    values, names = read_csv(p)
    assert values.shape == (2, 1) and names == ["x"]


def test_read_csv_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n3\n")
    with pytest.raises(DataError, match="line 3"):
        read_csv(p)
    p.write_text("a,b\n1,2\n3,oops\n")
    with pytest.raises(DataError, match="b"):
        read_csv(p)
    p.write_text("")
    with pytest.raises(DataError, match="empty"):
        read_csv(p)
    p.write_text("a,b\n")
    with pytest.raises(DataError, match="no data rows"):
        read_csv(p)


def test_write_csv_roundtrip(tmp_path):
    x = np.random.default_rng(0).random((5, 3))
    text = write_csv(x, ["p", "q", "r"])
    assert "\r" not in text
    p = tmp_path / "out.csv"
    p.write_text(text)
    values, names = read_csv(p)
    assert names == ["p", "q", "r"]
    np.testing.assert_array_equal(values, x)
