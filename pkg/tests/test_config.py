import pytest
from hypothesis import given, strategies as st

from logvort.config import SCHEMA, Config, ConfigError, parse_config, serialize

MINIMAL = """\
[experiment]
kind = deformation
[grid]
n = 128
box = 4.0
[time]
t_end = 0.25
"""

FULL = """\
# inflation sweep
[experiment]
kind = inflation
label = sweep-a

[grid]
n = 512
box = 0.5

[time]
t_end = 0.4
samples = 5

[lattice]
scale = 3.2
amplitude = 8.0   # strain knob

[perturbation]
k = 32, 64, 128
x1 = 0.7
x2 = 0.3
delta = 0.1
site_margin = 0.2
always_perturb = true

[run]
seed_spacing = 0.02
"""


def test_minimal_fills_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.kind == "deformation"
    assert cfg["grid", "n"] == 128 and cfg["time", "t_end"] == 0.25
    assert cfg["time", "cfl"] == 0.5 and cfg["lattice", "alpha"] == 0.25
    assert "n = 128" in cfg.echo()


def test_full_config_builds_plan():
    plan = parse_config(FULL).plan()
    assert plan.k_values == (32.0, 64.0, 128.0)
    assert plan.perturbation.delta == 0.1 and plan.always_perturb
    assert plan.lattice.amplitude == 8.0 and plan.seed_spacing == 0.02


def test_roundtrip_fixed_point():
    cfg = parse_config(FULL)
    text = serialize(cfg)
    again = parse_config(text)
    assert again == cfg
    assert serialize(again) == text


def test_misspelled_key_names_line_and_suggestion():
    text = "[experiment]\nkind = deformation\n[lattice]\nalpa = 0.3\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == 4
    assert "'alpha'" in str(info.value) and str(info.value).startswith("line 4")


@pytest.mark.parametrize("text,line,fragment", [
    ("[experiment]\nkind = deformation\n[grid]\nn = abc\n", 4, "expected int"),
    ("[experiment]\nkind = deformation\n[grid]\nn = 100\n", 4, "power of two"),
    ("[experiment]\nkind = warp\n", 2, "must be one of"),
    ("[experimnt]\nkind = deformation\n", 1, "'experiment'"),
    ("kind = deformation\n", 1, "outside any"),
    ("[experiment]\nkind deformation\n", 2, "key = value"),
    ("[experiment]\nkind = deformation\nkind = patches\n", 3, "duplicate"),
    ("[experiment]\nkind = deformation\n[output]\nsnapshots = maybe\n", 4, "expected bool"),
    ("[experiment]\nkind = deformation\n[lattice]\nk_min = 4\nk_max = 3\n", 5, "k_max"),
])
def test_errors_are_line_numbered(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line
    assert fragment in str(info.value)


def test_missing_kind():
    with pytest.raises(ConfigError, match="missing required"):
        parse_config("[grid]\nn = 64\n")


def test_overrides_revalidate():
    cfg = parse_config(MINIMAL)
    assert cfg.with_overrides(run__seed=9)["run", "seed"] == 9
    with pytest.raises(ConfigError):
        cfg.with_overrides(grid__n=100)
    with pytest.raises(ConfigError):
        cfg.with_overrides(grid__m=64)


values = st.fixed_dictionaries({
    "n": st.sampled_from([16, 64, 256, 1024]),
    "box": st.floats(0.1, 50, allow_nan=False),
    "t_end": st.floats(1e-3, 10),
    "k": st.lists(st.floats(1, 512), max_size=4),
    "label": st.text(st.characters(whitelist_categories=("Ll", "Nd")), max_size=8),
    "natural": st.booleans(),
})


@given(values)
def test_roundtrip_property(v):
    text = (f"[experiment]\nkind = inflation\nlabel = {v['label']}\n[grid]\nn = {v['n']}\n"
            f"box = {v['box']!r}\n[time]\nt_end = {v['t_end']!r}\n[perturbation]\n"
            f"k = {', '.join(repr(x) for x in v['k'])}\n[norms]\n"
            f"natural_log = {'true' if v['natural'] else 'false'}\n")
    cfg = parse_config(text)
    assert parse_config(serialize(cfg)) == cfg
    assert cfg["perturbation", "k"] == tuple(v["k"])


def test_schema_sections():
    assert list(SCHEMA) == ["experiment", "grid", "time", "lattice", "perturbation", "patches",
                            "norms", "output", "run"]
    assert isinstance(parse_config(MINIMAL), Config)
