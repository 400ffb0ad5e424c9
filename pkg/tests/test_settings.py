from pathlib import Path

import pytest

from channel_models.errors import ConfigError
from report_tools.settings import DEFAULT_CONFIG, Settings, load_config, merge_config, write_config

EXAMPLE_CONFIG = Path(__file__).resolve().parent.parent / "example_config.json"


def test_defaults():
    settings = load_config()
    assert settings == Settings()
    assert settings.solver.feasibility_tol == 1e-9
    assert settings.limits.joint_types == 2_000_000
    assert settings.report.significant_digits == 12


def test_example_config_holds_the_defaults():
    assert load_config(EXAMPLE_CONFIG) == Settings()


def test_partial_override():
    config = merge_config({"solver": {"iteration_limit": 10}, "report": {"workers": 4}})
    settings = Settings.from_config(config)
    assert settings.solver.iteration_limit == 10
    assert settings.report.workers == 4
    assert settings.solver.feasibility_tol == DEFAULT_CONFIG["solver"]["feasibility_tol"]


def test_numbers_are_coerced():
    config = merge_config({"solver": {"feasibility_tol": 0, "stall_threshold": 7.0}})
    assert isinstance(config["solver"]["feasibility_tol"], float)
    assert config["solver"]["stall_threshold"] == 7
    assert isinstance(config["solver"]["stall_threshold"], int)


@pytest.mark.parametrize(
    "overrides",
    [
        [],
        {"plotting": {}},
        {"solver": 3},
        {"solver": {"pivot_rule": "bland"}},
        {"solver": {"stall_threshold": 2.5}},
        {"solver": {"feasibility_tol": "small"}},
        {"report": {"workers": True}},
    ],
)
def test_bad_overrides(overrides):
    with pytest.raises(ConfigError):
        merge_config(overrides)


def test_bad_files(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{solver: }")
    with pytest.raises(ConfigError):
        load_config(broken)
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "missing.json")


def test_written_config_loads_back(tmp_path):
    settings = Settings.from_config(merge_config({"asymptotics": {"capacity_tol": 1e-8}}))
    path = tmp_path / "settings.json"
    write_config(settings, path)
    assert path.read_text().endswith("}\n")
    assert load_config(path) == settings
