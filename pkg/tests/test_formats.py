import numpy as np
import pytest

from comspm import formats
from comspm.classifier import SvmConfig, train
from comspm.descriptors import CodeImage
from comspm.kernels import GramMatrix, intersection_gram
from comspm.pyramid import PyramidConfig, build_pyramid


def test_pyramid_roundtrip(tmp_path, rng):
    p = build_pyramid(CodeImage(rng.integers(0, 256, (20, 17)), 256), PyramidConfig(L=2))
    formats.write_pyramid(tmp_path / "p.spmh", p)
    raw = (tmp_path / "p.spmh").read_bytes()
    assert raw[:4] == b"SPMH"
    assert len(raw) == 16 + 5376 * 8
    q = formats.read_pyramid(tmp_path / "p.spmh")
    assert q.config == p.config and q.weighted
    assert q.values.tobytes() == p.values.tobytes()


def test_pyramid_csv(rng):
    p = build_pyramid(CodeImage(rng.integers(0, 4, (8, 8)), 4), PyramidConfig(L=1, M=4))
    lines = formats.pyramid_to_csv(p).splitlines()
    assert lines[0] == "level,cell,channel,value"
    assert len(lines) == 1 + 4 * 5
    assert float(lines[1].split(",")[3]) == p.values[0]


@pytest.mark.parametrize("lam, rows, cols", [(None, None, None), (0.3, [0, 1, 1], [2, 0])])
def test_gram_roundtrip(lam, rows, cols):
    g = GramMatrix(np.arange(6.0).reshape(3, 2) / 7, "combined" if lam else "tplbp",
                   rows, cols, lam)
    back = formats.gram_from_bytes(formats.gram_to_bytes(g))
    assert back.tag == g.tag and back.lam == lam
    assert back.values.tobytes() == g.values.tobytes()
    if rows is None:
        assert back.row_labels is None and back.col_labels is None
    else:
        assert back.row_labels.tolist() == rows and back.col_labels.tolist() == cols


def test_model_roundtrip(rng):
    X = rng.random((12, 20))
    labels = np.repeat([0, 1, 2], 4)
    model = train(GramMatrix(intersection_gram(X), "lbp", labels, labels), SvmConfig(C=5.0))
    back = formats.model_from_bytes(formats.model_to_bytes(model))
    assert back.config == model.config
    assert back.classes.tolist() == model.classes.tolist()
    np.testing.assert_array_equal(back.dense_coef(), model.dense_coef())
    np.testing.assert_array_equal(back.bias, model.bias)


@pytest.mark.parametrize("loader, raw", [
    (formats.pyramid_from_bytes, b"SPMK" + bytes(20)),
    (formats.pyramid_from_bytes, b"SP"),
    (formats.gram_from_bytes, formats.gram_to_bytes(GramMatrix(np.eye(2), "lbp"))[:-3]),
    (formats.gram_from_bytes, formats.gram_to_bytes(GramMatrix(np.eye(2), "lbp")) + b"x"),
])
def test_malformed(loader, raw):
    with pytest.raises(formats.FormatError):
        loader(raw)


def test_wrong_version():
    raw = bytearray(formats.gram_to_bytes(GramMatrix(np.eye(2), "lbp")))
    raw[4] = 9
    with pytest.raises(formats.FormatError, match="version"):
        formats.gram_from_bytes(bytes(raw))
