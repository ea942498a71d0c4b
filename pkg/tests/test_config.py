import pytest

from wrinklevar.config import ConfigError, RunConfig, load_config, parse_config, serialize


def test_empty_is_default():
    assert parse_config("") == RunConfig()
    assert parse_config("# just a comment\n\n") == RunConfig()


def test_override_single_key():
    cfg = parse_config("material.c1 = 2.0\n")
    assert cfg.material.c1 == 2.0
    assert cfg.material.c2 == RunConfig().material.c2
    assert cfg.grid == RunConfig().grid


def test_values_parsed():
    cfg = parse_config(
        "grid.nx = 20\ngrid.Lx = 3\nboundary.clamped = left, top\n"
        "minimizer.delta = auto\nminimizer.backend = numpy\nseed = 42\nout = runs/a  # trailing\n"
    )
    assert cfg.grid.nx == 20 and cfg.grid.Lx == 3.0
    assert cfg.boundary.clamped == ("left", "top")
    assert cfg.minimizer.delta is None and cfg.minimizer.backend == "numpy"
    assert cfg.seed == 42 and cfg.out == "runs/a"


@pytest.mark.parametrize("text,needle", [
    ("material.nu = 1.5\n", "material.nu (line 1)"),
    ("\nmaterial.c2 = 5\n", "material.c2 (line 2)"),
    ("grid.nx = 2\n", "grid.nx"),
    ("material.bogus = 1\n", "material.bogus: unknown key"),
    ("nonsense\n", "line 1"),
    ("grid.nx = ten\n", "grid.nx: malformed"),
    ("seed = 1\nseed = 2\n", "line 2: seed: duplicate"),
    ("seed = -1\n", "seed"),
    ("boundary.clamped = middle\n", "boundary.clamped"),
    ("sweep.steps = 0\n", "sweep.steps"),
])
def test_errors_name_key_and_line(text, needle):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert needle in str(exc.value)


def test_nu_message_mentions_invariant():
    with pytest.raises(ConfigError, match="nu must satisfy"):
        parse_config("material.nu = 1.5")


def test_roundtrip(tmp_path):
    cfg = parse_config("grid.nx = 10\nmaterial.D = 0.002\nboundary.clamped = left,right,top\n"
                       "minimizer.delta = 0.001\nloads.b3 = 0.5\nseed = 9\n")
    assert parse_config(serialize(cfg)) == cfg
    assert parse_config(serialize(RunConfig())) == RunConfig()
    p = tmp_path / "run.cfg"
    p.write_text(serialize(cfg))
    assert load_config(p) == cfg


def test_float_roundtrip_exact():
    cfg = parse_config("material.c2 = 0.1234567890123456789\n")
    assert parse_config(serialize(cfg)).material.c2 == cfg.material.c2
