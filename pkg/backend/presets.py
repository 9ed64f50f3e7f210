"""Compiled-in scenarios: every panel of the wave-packet figures plus the Floquet checks."""
from copy import deepcopy
from typing import Dict, List, Tuple

from exceptions import ConfigError

# Scattering runs: wide packet with a small carrier hitting V0 exp(-beta x^2)
_SCATTERING = {
    "grid": {"x_min": -320.0, "x_max": 320.0, "n": 4096},
    "packet": {"center": -80.0, "width": 25.0, "carrier": 0.5, "normalize": True},
    "potential": {"type": "gaussian", "v0": 7.0, "beta": 1 / 64},
    "plan": {"total_time": 180.0, "record_interval": 1.0},
    "outputs": {
        "which": ["norm", "width", "intensity", "invisibility", "final_profile"],
        "x_split": -20.0,
    },
}

# Localization runs: narrow packet at rest on top of the potential
_LOCALIZATION = {
    "grid": {"x_min": -160.0, "x_max": 160.0, "n": 2048},
    "packet": {"center": 0.0, "width": 5.0, "carrier": 0.0, "normalize": True},
    "potential": {"type": "gaussian", "v0": 20.0, "beta": 1 / 64},
    "plan": {"total_time": 40.0, "steps_per_record": 8},
    "outputs": {"which": ["norm", "width", "intensity", "invisibility", "final_profile"]},
}

_FLOQUET = {
    "potential": {"type": "gaussian", "v0": 7.0, "beta": 1 / 64},
    "floquet": {"omega0": 0.25},
}


def _scenario(base: dict, name: str, description: str, mode: str, modulation: dict, **extra) -> dict:
    config = deepcopy(base)
    config.update(name=name, description=description, mode=mode, modulation=modulation)
    for key, value in extra.items():
        config.setdefault(key, {}).update(value) if isinstance(value, dict) else config.update({key: value})
    return config


PRESETS: Dict[str, dict] = {
    "fig2a": _scenario(
        _SCATTERING, "fig2a", "Hermitian cos drive (w=0.9): packet reflected by the effective barrier",
        "time_domain", {"preset": "cos", "omega": 0.9},
        outputs={"which": ["norm", "width", "intensity", "invisibility", "final_profile", "effective_potential"]},
    ),
    "fig2b": _scenario(
        _SCATTERING, "fig2b", "One-sided 0.5 exp(i w t) drive: invisible potential",
        "time_domain", {"preset": "one_sided", "omega": 0.9},
    ),
    "fig2c": _scenario(
        _SCATTERING, "fig2c", "Quasi-periodic two-tone one-sided drive: invisible potential",
        "time_domain", {"preset": "two_tone", "omega": 0.9},
    ),
    "fig2d": _scenario(
        _SCATTERING, "fig2d", "Negative one-sided 0.5 exp(-i w t) drive: visible, fast sidebands emitted",
        "time_domain", {"preset": "one_sided_negative", "omega": 0.9},
    ),
    "fig2a-effective": _scenario(
        _SCATTERING, "fig2a-effective", "Scattering run under the static cos-drive effective potential",
        "effective", {"preset": "cos", "omega": 0.9},
    ),
    "fig3a": _scenario(
        _LOCALIZATION, "fig3a", "Free spreading of the w0=5 packet (no potential)",
        "free_reference", {"preset": "none"},
        outputs={"which": ["norm", "width", "intensity", "final_profile"]},
    ),
    "fig3b": _scenario(
        _LOCALIZATION, "fig3b", "Kapitza case: cos drive (w=3, V0=20) localizes the packet",
        "time_domain", {"preset": "cos", "omega": 3.0},
        outputs={"which": ["norm", "width", "intensity", "invisibility", "final_profile", "effective_potential"]},
    ),
    "fig3b-effective": _scenario(
        _LOCALIZATION, "fig3b-effective", "Kapitza case under the static effective potential",
        "effective", {"preset": "cos", "omega": 3.0},
    ),
    "fig3c": _scenario(
        _LOCALIZATION, "fig3c", "One-sided drive (w=3): breathing packet, no stabilization",
        "time_domain", {"preset": "one_sided", "omega": 3.0},
    ),
    "fig3d": _scenario(
        _LOCALIZATION, "fig3d", "Quasi-periodic one-sided drive (w=3): breathing packet, no stabilization",
        "time_domain", {"preset": "two_tone", "omega": 3.0},
    ),
    "floquet-invisible": _scenario(
        _FLOQUET, "floquet-invisible", "Sideband solve, 0.5 exp(i w t) at omega0=0.25 <= Omega0: exact invisibility",
        "floquet", {"preset": "one_sided", "omega": 0.9},
    ),
    "floquet-hermitian": _scenario(
        _FLOQUET, "floquet-hermitian", "Sideband solve, cos drive at omega0=0.25: reflection with flux conservation",
        "floquet", {"preset": "cos", "omega": 0.9},
    ),
    "floquet-negative": _scenario(
        _FLOQUET, "floquet-negative", "Sideband solve, 0.5 exp(-i w t): propagating upper sidebands transmitted",
        "floquet", {"preset": "one_sided_negative", "omega": 0.9},
    ),
}


def list_presets() -> List[Tuple[str, str]]:
    return [(name, config["description"]) for name, config in PRESETS.items()]


def get_preset(name: str) -> dict:
    try:
        return deepcopy(PRESETS[name])
    except KeyError:
        raise ConfigError(f"Unknown preset: {name}", path="preset")
