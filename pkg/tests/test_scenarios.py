import asyncio
import json

import numpy as np
import pandas as pd
import pytest
import yaml

from cli import main
from diagnostics import cycle_average
from exceptions import ConfigError
from floquet import packet_reflection
from modulation import cosine
from potential import GaussianPotential
from presets import PRESETS, get_preset, list_presets
from scenario_service import (
    EXIT_CONFIG_ERROR,
    EXIT_NUMERICAL_FLAG,
    EXIT_OK,
    ScenarioService,
    apply_overrides,
    record_times,
    resolve_config,
    run_scenario,
    validate_config,
)

REQUIRED_PRESETS = {
    "fig2a", "fig2b", "fig2c", "fig2d",
    "fig3a", "fig3b", "fig3c", "fig3d",
    "floquet-invisible", "floquet-hermitian", "floquet-negative",
}


def small_config(directory, **changes) -> dict:
    config = {
        "name": "small",
        "mode": "time_domain",
        "grid": {"x_min": -32.0, "x_max": 32.0, "n": 256},
        "packet": {"center": -4.0, "width": 4.0, "carrier": 0.5},
        "potential": {"type": "gaussian", "v0": 2.0, "beta": 1 / 16},
        "modulation": {"preset": "cos", "omega": 3.0},
        "plan": {"total_time": 2.0, "steps_per_record": 16},
        "outputs": {
            "directory": str(directory),
            "which": ["norm", "width", "intensity", "invisibility", "final_profile", "effective_potential"],
            "x_split": -5.0,
        },
    }
    for key, value in changes.items():
        config[key] = value
    return config


def write_yaml(path, config: dict):
    path.write_text(yaml.safe_dump(config))
    return path


@pytest.fixture
def service() -> ScenarioService:
    return ScenarioService()


def test_catalog_covers_every_panel():
    assert REQUIRED_PRESETS <= set(PRESETS)
    names = [name for name, _ in list_presets()]
    assert names == list(PRESETS)
    assert "negative" in PRESETS["fig2d"]["description"].lower()
    assert PRESETS["fig3b"]["modulation"] == {"preset": "cos", "omega": 3.0}


def test_get_preset_returns_a_private_copy():
    preset = get_preset("fig2b")
    preset["potential"]["v0"] = 0.0
    assert PRESETS["fig2b"]["potential"]["v0"] == 7.0
    with pytest.raises(ConfigError) as e:
        get_preset("fig9z")
    assert e.value.path == "preset"


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_every_preset_validates_and_prepares(service, name):
    config = validate_config(get_preset(name))
    prepared = service.prepare(config)
    if config.mode == "floquet":
        assert prepared.channels is not None
        assert prepared.channels.m_min <= 0 <= prepared.channels.m_max
    else:
        assert prepared.state.grid == prepared.grid
        assert prepared.plan.n_steps * prepared.plan.dt == pytest.approx(config.plan.total_time)


def test_overrides_parse_yaml_scalars():
    raw = apply_overrides({"a": {"b": 1}}, ["a.b=2.5", "a.c=[1, 2]", "name=demo", "d.e=true"])
    assert raw == {"a": {"b": 2.5, "c": [1, 2]}, "name": "demo", "d": {"e": True}}


def test_malformed_overrides_are_config_errors():
    with pytest.raises(ConfigError) as e:
        apply_overrides({}, ["novalue"])
    assert e.value.path == "--set"
    with pytest.raises(ConfigError) as e:
        apply_overrides({"a": 1}, ["a.b=2"])
    assert e.value.path == "a"


def test_unknown_field_is_reported_with_its_path(tmp_path):
    raw = small_config(tmp_path)
    raw["grid"]["spacing"] = 0.25
    with pytest.raises(ConfigError) as e:
        validate_config(raw)
    assert e.value.path == "grid.spacing"


def test_invalid_value_is_reported_with_its_path(tmp_path):
    raw = small_config(tmp_path)
    raw["packet"]["width"] = -1.0
    with pytest.raises(ConfigError) as e:
        validate_config(raw)
    assert e.value.path == "packet.width"


@pytest.mark.parametrize("name", ["/abs/path", "../x", "runs/x", ".hidden", ""])
def test_run_names_must_be_plain_slugs(tmp_path, name):
    with pytest.raises(ConfigError) as e:
        validate_config(small_config(tmp_path, name=name))
    assert e.value.path == "name"


def test_missing_sections_are_rejected(tmp_path):
    raw = small_config(tmp_path)
    del raw["plan"]
    with pytest.raises(ConfigError) as e:
        validate_config(raw)
    assert "plan" in str(e.value)

    floquet = get_preset("floquet-invisible")
    del floquet["floquet"]
    with pytest.raises(ConfigError):
        validate_config(floquet)


def test_modulation_needs_preset_or_tones(tmp_path):
    raw = small_config(tmp_path, modulation={"preset": "cos"})
    with pytest.raises(ConfigError) as e:
        validate_config(raw)
    assert e.value.path.startswith("modulation")


def test_resolve_config_applies_cli_overrides(tmp_path):
    config = resolve_config("fig2b", ["potential.v0=5"], out=tmp_path / "x", dt=0.05, grid_n=1024)
    assert config.potential.v0 == 5.0
    assert config.plan.dt == 0.05
    assert config.grid.n == 1024
    assert str(config.outputs.directory) == str(tmp_path / "x")

    with pytest.raises(ConfigError) as e:
        resolve_config("floquet-invisible", dt=0.05)
    assert e.value.path == "plan.dt"
    with pytest.raises(ConfigError) as e:
        resolve_config(str(tmp_path / "missing.yaml"))
    assert e.value.path == "source"


def test_unresolved_time_step_fails_before_compute(service, tmp_path):
    raw = small_config(tmp_path / "out")
    raw["plan"]["dt"] = 0.1
    raw["plan"]["total_time"] = 1.0
    with pytest.raises(ConfigError) as e:
        service.run(validate_config(raw))
    assert e.value.path == "plan"
    assert not (tmp_path / "out").exists()


def test_split_outside_grid_fails_before_compute(service, tmp_path):
    raw = small_config(tmp_path)
    raw["outputs"]["x_split"] = 100.0
    with pytest.raises(ConfigError) as e:
        service.prepare(validate_config(raw))
    assert e.value.path == "outputs.x_split"


def test_record_times_match_plan(service, tmp_path):
    prepared = service.prepare(validate_config(small_config(tmp_path)))
    times = record_times(prepared.plan)
    assert times[0] == 0.0
    assert times[-1] == pytest.approx(2.0)


def test_time_domain_run_writes_outputs(service, tmp_path):
    outcome = service.run(validate_config(small_config(tmp_path)))
    assert outcome.exit_code == EXIT_OK
    assert set(outcome.files) == {
        "diagnostics.csv", "intensity.csv", "final_profile.csv", "effective_potential.csv", "metadata.json",
    }

    diagnostics = pd.read_csv(tmp_path / "diagnostics.csv")
    assert list(diagnostics.columns) == ["time", "norm", "width", "invisibility_error", "reflected_fraction"]
    np.testing.assert_allclose(diagnostics["norm"], 1.0, atol=1e-10)
    assert diagnostics["invisibility_error"][0] < 1e-12

    profile = pd.read_csv(tmp_path / "final_profile.csv")
    assert list(profile.columns) == ["x", "re", "im", "intensity"]
    assert len(profile) == 256

    effective = pd.read_csv(tmp_path / "effective_potential.csv")
    np.testing.assert_allclose(effective["v_eff_re"], effective["v_eff_closed_form"], atol=1e-8)

    metadata = json.loads((tmp_path / "metadata.json").read_text())
    assert metadata["scenario"] == "small"
    assert metadata["exit_code"] == EXIT_OK
    assert metadata["flags"] == {"runaway_gain": False, "incomplete": False}
    assert metadata["results"]["sidedness"] == "TwoSided"
    assert metadata["results"]["mean_square_antiderivative_re"] == pytest.approx(1 / 18)
    assert metadata["config"]["potential"]["v0"] == 2.0
    assert metadata["trajectory"]["completed"] is True


def test_runs_are_byte_reproducible(service, tmp_path):
    first = run_scenario(validate_config(small_config(tmp_path / "first")))
    second = service.run(validate_config(small_config(tmp_path / "second")))
    for name in first.files:
        if name.endswith(".csv"):
            assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()
    assert second.files == first.files


def test_free_reference_mode_skips_the_potential(service, tmp_path):
    raw = small_config(tmp_path, mode="free_reference", modulation={"preset": "none"})
    raw["outputs"]["which"] = ["norm", "width"]
    raw["outputs"]["x_split"] = None
    outcome = service.run(validate_config(raw))
    assert outcome.exit_code == EXIT_OK
    diagnostics = pd.read_csv(tmp_path / "diagnostics.csv")
    assert list(diagnostics.columns) == ["time", "norm", "width"]
    assert "mean_square_antiderivative_re" in outcome.results


def test_effective_mode_reports_the_averaged_potential(service, tmp_path):
    raw = small_config(tmp_path, mode="effective")
    outcome = service.run(validate_config(raw))
    assert outcome.exit_code == EXIT_OK
    assert outcome.results["mean_square_antiderivative_re"] == pytest.approx(1 / 18)
    assert outcome.results["effective_barrier_height"] > 0


def test_floquet_preset_writes_channel_table(service, tmp_path):
    outcome = service.run_source("floquet-invisible", out=tmp_path)
    assert outcome.exit_code == EXIT_OK
    assert outcome.results["invisible"] is True
    channels = pd.read_csv(tmp_path / "channels.csv")
    zero = channels[channels["m"] == 0].iloc[0]
    assert abs(complex(zero["t_re"], zero["t_im"]) - 1) < 1e-6
    metadata = json.loads((tmp_path / "metadata.json").read_text())
    assert metadata["invisibility"]["invisible"] is True
    assert metadata["floquet"]["omega0"] == 0.25


def test_floquet_solver_failure_raises_a_flag(service, tmp_path):
    outcome = service.run_source(
        "floquet-invisible", overrides=["floquet.x_window=[-10, 10]"], out=tmp_path
    )
    assert outcome.exit_code == EXIT_NUMERICAL_FLAG
    assert "solver_error" in outcome.flags
    assert outcome.files == ["metadata.json"]


def test_cli_list_prints_catalog(capsys):
    assert main(["list"]) == EXIT_OK
    out = capsys.readouterr().out
    for name in REQUIRED_PRESETS:
        assert name in out


def test_cli_run_from_yaml(tmp_path):
    path = write_yaml(tmp_path / "small.yaml", small_config(tmp_path / "ignored"))
    assert main(["run", str(path), "--out", str(tmp_path / "out")]) == EXIT_OK
    assert (tmp_path / "out" / "diagnostics.csv").is_file()
    assert not (tmp_path / "ignored").exists()


def test_cli_config_errors_exit_with_two(tmp_path):
    assert main(["run", "fig9z"]) == EXIT_CONFIG_ERROR
    assert main(["run", "fig2b", "--set", "potential.beta=-1", "--out", str(tmp_path)]) == EXIT_CONFIG_ERROR
    assert main(["run", "fig2b", "--set", "grid.spacing=1", "--out", str(tmp_path)]) == EXIT_CONFIG_ERROR

    bad = tmp_path / "bad.yaml"
    bad.write_text("mode: [unclosed\n")
    assert main(["run", str(bad)]) == EXIT_CONFIG_ERROR


def test_cli_runaway_gain_exits_with_three(tmp_path):
    raw = small_config(
        tmp_path / "out",
        packet={"center": 0.0, "width": 3.0},
        potential={"type": "gaussian", "v0": 30.0, "beta": 1 / 16},
        modulation={"preset": "one_sided", "omega": 0.5},
        plan={"total_time": 4 * np.pi, "steps_per_record": 16},
    )
    raw["outputs"]["which"] = ["norm", "width", "final_profile"]
    path = write_yaml(tmp_path / "gain.yaml", raw)
    assert main(["run", str(path)]) == EXIT_NUMERICAL_FLAG

    metadata = json.loads((tmp_path / "out" / "metadata.json").read_text())
    assert metadata["flags"]["runaway_gain"] is True
    assert metadata["exit_code"] == EXIT_NUMERICAL_FLAG
    # partial outputs are kept
    assert (tmp_path / "out" / "diagnostics.csv").is_file()


@pytest.mark.asyncio
async def test_batch_runs_each_source_into_its_own_directory(service, tmp_path):
    sources = [
        str(write_yaml(tmp_path / "one.yaml", small_config(tmp_path / "unused"))),
        str(write_yaml(tmp_path / "two.yaml", small_config(tmp_path / "unused", mode="effective"))),
    ]
    outcomes = await service.run_batch(sources, out_root=tmp_path / "batch", concurrency=2)
    assert [o.exit_code for o in outcomes] == [EXIT_OK, EXIT_OK]
    assert (tmp_path / "batch" / "one" / "metadata.json").is_file()
    assert (tmp_path / "batch" / "two" / "metadata.json").is_file()


def test_batch_rejects_bad_source_before_running(service, tmp_path):
    good = str(write_yaml(tmp_path / "good.yaml", small_config(tmp_path / "unused")))
    with pytest.raises(ConfigError):
        asyncio.run(service.run_batch([good, "fig9z"], out_root=tmp_path / "batch"))
    assert not (tmp_path / "batch").exists()


def test_cli_batch_returns_worst_exit_code(tmp_path):
    good = write_yaml(tmp_path / "good.yaml", small_config(tmp_path / "unused"))
    assert main(["batch", str(good), "--out", str(tmp_path / "batch"), "--jobs", "1"]) == EXIT_OK
    assert (tmp_path / "batch" / "good" / "diagnostics.csv").is_file()


# Full-size reproductions of the figure panels

def free_width(t, packet_width=5.0):
    return np.sqrt(packet_width ** 2 / 4 + 4 * t ** 2 / packet_width ** 2)


def run_preset(service, name, directory):
    outcome = service.run_source(name, out=directory)
    return outcome, pd.read_csv(directory / "diagnostics.csv")


@pytest.mark.slow
def test_hermitian_drive_reflects_the_packet(service, tmp_path):
    outcome, diagnostics = run_preset(service, "fig2a", tmp_path)
    assert outcome.exit_code == EXIT_OK
    assert diagnostics["reflected_fraction"].iloc[-1] > 0.05
    assert np.abs(diagnostics["norm"] - 1).max() < 1e-6


@pytest.mark.slow
@pytest.mark.parametrize("name", ["fig2b", "fig2c"])
def test_one_sided_drives_are_invisible(service, tmp_path, name):
    outcome, diagnostics = run_preset(service, name, tmp_path)
    assert outcome.exit_code == EXIT_OK
    assert diagnostics["invisibility_error"].iloc[-1] < 5e-3
    assert abs(diagnostics["norm"].iloc[-1] - 1) < 0.01


@pytest.mark.slow
def test_negative_drive_is_visible(service, tmp_path):
    _, invisible = run_preset(service, "fig2b", tmp_path / "b")
    _, visible = run_preset(service, "fig2d", tmp_path / "d")
    assert visible["invisibility_error"].iloc[-1] >= 10 * invisible["invisibility_error"].iloc[-1]


@pytest.mark.slow
def test_free_packet_spreads_as_closed_form(service, tmp_path):
    outcome, diagnostics = run_preset(service, "fig3a", tmp_path)
    assert outcome.exit_code == EXIT_OK
    expected = free_width(diagnostics["time"].to_numpy())
    assert np.abs(diagnostics["width"] / expected - 1).max() < 1e-3


@pytest.mark.slow
def test_kapitza_drive_localizes_the_packet(service, tmp_path):
    outcome, driven = run_preset(service, "fig3b", tmp_path / "b")
    late = driven["time"] > 10
    assert (driven["width"][late] < free_width(driven["time"][late])).all()
    # localized, yet the cycle-averaged width keeps growing
    averaged = cycle_average(driven["time"].to_numpy(), driven["width"].to_numpy(), 2 * np.pi / 3)
    midway = np.searchsorted(driven["time"].to_numpy(), 20.0)
    assert averaged[-1] > averaged[midway]
    assert outcome.results["cycle_averaged_final_width"] == pytest.approx(averaged[-1])


@pytest.mark.slow
def test_effective_potential_tracks_the_kapitza_run(service, tmp_path):
    _, full = run_preset(service, "fig3b", tmp_path / "full")
    _, effective = run_preset(service, "fig3b-effective", tmp_path / "effective")
    np.testing.assert_allclose(effective["time"], full["time"])
    w_full, w_eff = full["width"].to_numpy(), effective["width"].to_numpy()
    # V0 / w is far from the averaging limit: agreement is qualitative
    assert (np.abs(w_full - w_eff) / np.maximum(w_full, w_eff)).max() < 0.35
    assert w_eff[-1] < 0.75 * free_width(40.0)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["fig3c", "fig3d"])
def test_one_sided_drives_breathe_without_localizing(service, tmp_path, name):
    outcome, driven = run_preset(service, name, tmp_path / name)
    assert outcome.exit_code == EXIT_OK
    assert driven["norm"].max() - driven["norm"].min() > 0.1
    assert outcome.results["width_oscillation"] > 0.01
    # cycle maxima reach the free spreading
    last_cycle = driven["time"] > 40 - 2 * np.pi / 3
    assert driven["width"][last_cycle].max() >= 0.9 * free_width(40.0)
    assert 0.9 <= outcome.results["cycle_averaged_final_width"] / free_width(40.0) <= 1.3


@pytest.mark.slow
def test_sideband_reflection_predicts_the_scattered_packet(service, tmp_path):
    outcome, _ = run_preset(service, "fig2a", tmp_path)
    packet = PRESETS["fig2a"]["packet"]
    predicted = packet_reflection(
        GaussianPotential(7.0, 1 / 64), cosine(0.9), packet["carrier"], packet["width"]
    )
    assert predicted == pytest.approx(outcome.results["final_reflected_fraction"], abs=0.02)
