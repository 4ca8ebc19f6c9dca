import pytest
from hypothesis import given
from hypothesis import strategies as st

from oudividend.config import SCHEMA, ConfigError, RunConfig, dump, load, parse, parse_overrides


def test_defaults_mirror_reference_curve():
    cfg = RunConfig()
    assert (cfg["ou.a"], cfg["ou.b"], cfg["ou.delta"], cfg["horizon.T"]) == (1.0, 0.51, 1.0, 5.0)
    assert (cfg["surplus.mu"], cfg["surplus.sigma"], cfg["surplus.xi"]) == (1.0, 0.5, 1.0)
    assert cfg.paths().t_max is None


def test_dump_lists_every_key_in_schema_order():
    lines = dump(RunConfig()).splitlines()
    assert [ln.split(" = ")[0] for ln in lines] == list(SCHEMA)


def test_round_trip_is_byte_identical():
    text = dump(RunConfig().with_overrides({"ou.b": "0.7", "paths.t_max": "40", "output.dir": "runs/a"}))
    assert dump(parse(text)) == text


@given(st.floats(0.01, 10), st.floats(-2, 2), st.floats(0.01, 5), st.integers(0, 2**63))
def test_round_trip_property(a, b, d, seed):
    cfg = RunConfig().with_overrides({"ou.a": repr(a), "ou.b": repr(b), "ou.delta": repr(d), "paths.seed": str(seed)})
    assert parse(dump(cfg)) == cfg
    assert dump(parse(dump(cfg))) == dump(cfg)


def test_comments_and_blank_lines():
    cfg = parse("# reference\n\nou.b = 0.6   # level\n")
    assert cfg["ou.b"] == 0.6


@pytest.mark.parametrize("text", [
    "ou.c = 1",                 # unknown key
    "ou.delta = 0",             # invalid model
    "ou.a = fast",              # malformed value
    "ou.a = 1\nou.a = 2",       # duplicate
    "ou.a 1",                   # not key = value
    "paths.n_paths = 0",
    "quadrature.z_trunc_sigmas = 2",
])
def test_strict_rejection(text):
    with pytest.raises(ConfigError):
        parse(text)


def test_load_from_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("ou.r0 = -0.5\n")
    assert load(p)["ou.r0"] == -0.5
    with pytest.raises(ConfigError, match="cannot read"):
        load(tmp_path / "missing.cfg")


def test_overrides():
    assert parse_overrides(["ou.a=2", "paths.seed = 3"]) == {"ou.a": "2", "paths.seed": "3"}
    with pytest.raises(ConfigError):
        parse_overrides(["ou.a"])
    with pytest.raises(ConfigError):
        RunConfig().with_overrides({"nope": "1"})


def test_healthy_precondition_checked_on_use():
    cfg = RunConfig().with_overrides({"healthy.zeta": "2.0"})
    with pytest.raises(ValueError):
        cfg.healthy()
