import io as stdio
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subheat import io
from subheat.calculus import heat_kernel
from subheat.errors import ConfigError, CorruptCacheError, StaleCacheError
from subheat.lpanalysis import dyadic_frame, square_function
from subheat.verify import BoundReport, Sample

from .conftest import model, spectral


def make_report(n=5, passed=True, suite="demo"):
    rng = np.random.default_rng(0)
    samples = [Sample({"t": 2.0**-k, "alpha": [0, 1], "x": k}, float(rng.random()), float(rng.random() + 0.1)) for k in range(n)]
    return BoundReport(suite, "lhs <= C rhs", samples, passed, "C finite", constants={"C_fit": 1.0 / 3.0})


def test_parse_config_valid():
    cfg = io.parse_config("model = heisenberg:n=6\noperator = sublaplacian\nsuites = all")
    assert cfg.model == "heisenberg:n=6"
    assert cfg.operator == "sublaplacian"
    assert cfg.suites == ("all",)
    assert cfg.seed == 0 and cfg.cache is True and cfg.t_grid is None


def test_parse_config_full():
    text = """
    # a comment
    model = flat_torus:n=8   # trailing comment
    suites = on_diagonal,wave_energy
    t_grid = 0.25, 0.5
    seed = 42
    cache = false
    format = json
    output_dir = out
    """
    cfg = io.parse_config(text)
    assert cfg.suites == ("on_diagonal", "wave_energy")
    assert cfg.t_grid == (0.25, 0.5)
    assert (cfg.seed, cfg.cache, cfg.format, cfg.output_dir) == (42, False, "json", "out")


@pytest.mark.parametrize(
    "text,line,needle",
    [
        ("model = heisenberg:n=2", 1, "n=2"),
        ("model = heisenberg:n=4\ncolour = red", 2, "unknown key"),
        ("model = heisenberg:n=4\nseed = -1", 2, "seed"),
        ("model = heisenberg:n=4\n\nsuites = nope", 3, "nope"),
        ("model = heisenberg:n=4\ncache = maybe", 2, "cache"),
        ("model = heisenberg:n=4\njust words", 2, "key = value"),
        ("model = heisenberg:n=4\nmodel = flat_torus:n=4", 2, "duplicate"),
        ("model = heisenberg:n=4\nt_grid = 0.1,-2", 2, "t_grid"),
    ],
)
def test_parse_config_errors_carry_line(text, line, needle):
    with pytest.raises(ConfigError) as err:
        io.parse_config(text)
    assert err.value.line == line
    assert needle in str(err.value)


def test_empty_config_names_model():
    with pytest.raises(ConfigError, match="model"):
        io.parse_config("")


def test_empty_report_has_header_only(tmp_path):
    path = io.write_report(make_report(0), tmp_path)
    assert path.read_text() == "suite,param_json,lhs,rhs,ratio,pass\n"


def test_report_roundtrip(tmp_path):
    rep = make_report(7, passed=False)
    parsed = io.read_report(io.write_report(rep, tmp_path))
    assert parsed.C_fit == rep.C_fit
    assert parsed.passed is False
    assert [r["params"] for r in parsed.rows] == [s.params for s in rep.samples]
    assert [r["lhs"] for r in parsed.rows] == [s.lhs for s in rep.samples]
    summary = json.loads((tmp_path / "demo.json").read_text())
    assert summary["C_fit"] == rep.C_fit and summary["witness"]["lhs"] == rep.witness.lhs


def test_report_writes_byte_identical(tmp_path):
    a = io.write_report(make_report(), tmp_path / "a").read_bytes()
    b = io.write_report(make_report(), tmp_path / "b").read_bytes()
    assert a == b
    assert (tmp_path / "a" / "demo.json").read_bytes() == (tmp_path / "b" / "demo.json").read_bytes()


def test_summary(tmp_path):
    path = io.write_summary([make_report(suite="a"), make_report(0, suite="b")], tmp_path)
    data = json.loads(path.read_text())
    assert [d["suite"] for d in data] == ["a", "b"]
    assert set(data[0]) >= {"suite", "C_fit", "witness", "pass"}
    assert data[1]["witness"] is None and data[1]["C_fit"] == 0.0


def test_report_write_failure_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(Exception, match="file"):
        io.write_report(make_report(), blocker)


@settings(max_examples=200)
@given(x=st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips(x):
    assert float(io.fmt(x)) == x


def test_distance_and_kernel_csv(tmp_path):
    geom, dist = model("flat_torus:n=4")
    path = io.write_distance_csv(dist, tmp_path / "d.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "x_index,y_index,rho" and len(lines) == 1 + 16 * 16
    assert lines[1 + 2 * 4].split(",") == ["0", "8", "0.5"]
    K = heat_kernel(spectral("flat_torus:n=4"), 0.01)
    buf = stdio.StringIO()
    io.write_kernel(K, dist, buf)
    rows = buf.getvalue().splitlines()
    assert rows[0] == "x_index,y_index,rho,value_re,value_im"
    x, y, rho, re_, im_ = rows[1 + 17].split(",")
    assert (int(x), int(y)) == (1, 1) and float(re_) == K.K[1, 1] and float(im_) == 0.0
    buf = stdio.StringIO()
    io.write_kernel(K, dist, buf, "json")
    recs = json.loads(buf.getvalue())
    assert recs[5]["value_re"] == K.K[0, 5]


def test_frame_and_field_csv():
    spec = spectral("heisenberg:n=4")
    fr = dyadic_frame(spec)
    buf = stdio.StringIO()
    io.write_frame_csv(fr, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "j,lambda_lo,lambda_hi,active"
    assert len(lines) == 1 + len(fr.j_range)
    S = square_function(fr, spec, np.random.default_rng(0).standard_normal(spec.geom.size))
    buf = stdio.StringIO()
    io.write_field_csv(S, buf)
    vals = [float(r.split(",")[1]) for r in buf.getvalue().splitlines()[1:]]
    assert vals == S.tolist()


@pytest.mark.parametrize("text,kind", [("flat_torus:n=4", "sublaplacian"), ("heisenberg:n=3", "boxb")])
def test_cache_roundtrip_bit_exact(tmp_path, text, kind):
    spec = spectral(text, kind)
    back = io.cache_roundtrip(spec, tmp_path)
    assert np.array_equal(back.values, spec.values)
    assert np.array_equal(back.vectors, spec.vectors)
    assert back.vectors.dtype == spec.vectors.dtype
    assert back.eps_ker == spec.eps_ker


def test_cache_layout(tmp_path):
    spec = spectral("flat_torus:n=4")
    data = io.encode_spectral(spec)
    assert data[:8] == b"SUBHEAT1"
    assert int.from_bytes(data[8:12], "little") == 1
    assert int.from_bytes(data[12:20], "little") == 16
    assert len(data) == 20 + 8 * 16 + 16 * 256 + 8
    assert np.frombuffer(data[20:20 + 128], "<f8").tolist() == spec.values.tolist()


def test_cache_truncated(tmp_path):
    spec = spectral("flat_torus:n=4")
    path = io.save_spectral(spec, tmp_path / "c.bin")
    path.write_bytes(path.read_bytes()[:-20])
    with pytest.raises(CorruptCacheError):
        io.load_spectral(path, spec.geom, spec.kind)
    path.write_bytes(b"SUB")
    with pytest.raises(CorruptCacheError):
        io.load_spectral(path, spec.geom, spec.kind)


def test_cache_checksum(tmp_path):
    spec = spectral("flat_torus:n=4")
    data = bytearray(io.encode_spectral(spec))
    data[100] ^= 0x01
    with pytest.raises(CorruptCacheError, match="checksum"):
        io.decode_spectral(bytes(data), spec.geom, spec.kind)


def test_cache_stale(tmp_path):
    spec = spectral("flat_torus:n=4")
    data = bytearray(io.encode_spectral(spec))
    bad_magic = b"SUBHEAT0" + bytes(data[8:])
    with pytest.raises(StaleCacheError):
        io.decode_spectral(bad_magic, spec.geom, spec.kind)
    data[8] = 2
    with pytest.raises(StaleCacheError, match="version"):
        io.decode_spectral(bytes(data), spec.geom, spec.kind)


def test_cached_spectral_uses_env_dir_and_recovers(tmp_path, monkeypatch):
    monkeypatch.setenv("SUBHEAT_CACHE_DIR", str(tmp_path / "env"))
    geom, _ = model("flat_torus:n=4")
    first = io.cached_spectral(geom, "sublaplacian")
    files = list((tmp_path / "env").glob("*.bin"))
    assert len(files) == 1
    files[0].write_bytes(b"garbage")
    again = io.cached_spectral(geom, "sublaplacian")
    assert np.array_equal(again.values, first.values)
    assert files[0].read_bytes()[:8] == b"SUBHEAT1"


def test_cache_key_distinguishes_inputs(tmp_path):
    keys = {
        io.cache_path("heisenberg:n=4", "sublaplacian", None, tmp_path),
        io.cache_path("heisenberg:n=4", "boxb", None, tmp_path),
        io.cache_path("heisenberg:n=4", "boxb", 1e-9, tmp_path),
        io.cache_path("heisenberg:n=6", "boxb", 1e-9, tmp_path),
    }
    assert len(keys) == 4
