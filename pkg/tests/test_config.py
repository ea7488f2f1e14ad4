import pytest
from numpy.testing import assert_allclose

from spoints.config import RunConfig, load_config, parse_alpha_range, parse_m_list
from spoints.errors import MalformedInputError
from spoints.potentials import gaussian

BASE = "[run]\nn = 12\nm = 2, 1\n\n[potential]\nshape = gaussian\ndepth = -8\n"


def test_alpha_range_inclusive():
    assert_allclose(parse_alpha_range("0.2:0.8:0.2"), [0.2, 0.4, 0.6, 0.8])
    assert parse_alpha_range("1:1:0.5") == (1.0,)


@pytest.mark.parametrize("text", ["1:2", "a:b:c", "2:1:0.1", "0:1:0", "-1:1:1"])
def test_alpha_range_rejects(text):
    with pytest.raises(MalformedInputError):
        parse_alpha_range(text)


def test_m_list():
    assert parse_m_list("2, 1,2") == (1, 2)
    for bad in ("", "0", "4", "x"):
        with pytest.raises(MalformedInputError):
            parse_m_list(bad)


def test_load_inline(tmp_path):
    f = tmp_path / "run.ini"
    f.write_text(BASE + "width = 1.5  # wide\n")
    cfg = load_config(f)
    assert cfg.n == 12 and cfg.m == (1, 2)
    assert cfg.potential.profile.width == 1.5
    assert "out" not in cfg.as_dict()


def test_load_potential_file(tmp_path):
    (tmp_path / "q.txt").write_text("shape = bump\ndepth = -4\nradius = 2\n")
    f = tmp_path / "run.ini"
    f.write_text("[run]\npotential_file = q.txt\nallow_critical = yes\n")
    cfg = load_config(f)
    assert cfg.potential.profile.shape == "bump" and cfg.allow_critical
    assert cfg.potential_source == "q.txt"


@pytest.mark.parametrize("extra", ["n = 100\n", "n = many\n", "l_max = 7\n", "n_k = 10\n",
                                   "alpha_units = percent\n", "scan_box = 1 2 3\n"])
def test_invalid_run_values(tmp_path, extra):
    f = tmp_path / "run.ini"
    f.write_text(BASE.replace("[run]\n", "[run]\n" + extra))
    with pytest.raises(MalformedInputError):
        load_config(f)


def test_missing_potential(tmp_path):
    f = tmp_path / "run.ini"
    f.write_text("[run]\nn = 8\n")
    with pytest.raises(MalformedInputError):
        load_config(f)
    with pytest.raises(MalformedInputError):
        load_config(tmp_path / "absent.ini")


def test_overrides_ignore_none():
    cfg = RunConfig(potential=gaussian(-1.0))
    new = cfg.with_overrides(n=16, out=None)
    assert new.n == 16 and new.out == cfg.out
