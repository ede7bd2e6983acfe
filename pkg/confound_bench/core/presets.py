"""
core/presets.py – Figure presets.
Responsibility: expand a preset name into a fully specified ExperimentSpec.
Axis grids are declared here (the published figures do not print them) and
every expanded spec carries a grid_note saying so.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional

from ..models import CalibrationSettings, ConfounderMode, ExperimentSpec, OutputPaths, ScenarioConfig

FigurePreset = Literal[
    "fig2_top_W", "fig2_mid_B", "fig2_bottom_WB",
    "fig2_top_W_m10", "fig2_mid_B_m10", "fig2_bottom_WB_m10",
    "fig3_top_W_effects", "fig3_bottom_B_effects", "fig4_WB_effects",
    "fig3_top_W_alpha", "fig3_bottom_B_alpha",
    "fig4_WB_alpha_w", "fig4_WB_alpha_b", "fig4_WB_beta_b",
]

N_GRID = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 400.0)
EFFECT_GRID = (-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0)
ALPHA_GRID = (-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0)

# sweeps at n = 200 evaluate many formula points; a lighter calibration keeps them interactive
_SWEEP_CALIBRATION = CalibrationSettings(m_cal=1000, reps_cal=20)


@dataclass(frozen=True)
class _PresetDef:
    mode: ConfounderMode
    axis: str
    values: tuple[float, ...]
    m: int = 200
    n: int = 20
    reps: int = 1000
    z: float = 3.0
    analytic_only: bool = False
    calibration: Optional[CalibrationSettings] = None


def _n_sweep(mode: ConfounderMode, m: int = 200) -> _PresetDef:
    if m == 10:
        return _PresetDef(mode, "n", N_GRID, m=10, reps=5000, z=4.0)
    return _PresetDef(mode, "n", N_GRID)


def _effect_sweep(mode: ConfounderMode, axis: str, values: tuple[float, ...]) -> _PresetDef:
    return _PresetDef(mode, axis, values, n=200, analytic_only=True, calibration=_SWEEP_CALIBRATION)


PRESETS: dict[str, _PresetDef] = {
    "fig2_top_W": _n_sweep("W_only"),
    "fig2_mid_B": _n_sweep("B_only"),
    "fig2_bottom_WB": _n_sweep("W_and_B"),
    "fig2_top_W_m10": _n_sweep("W_only", m=10),
    "fig2_mid_B_m10": _n_sweep("B_only", m=10),
    "fig2_bottom_WB_m10": _n_sweep("W_and_B", m=10),
    "fig3_top_W_effects": _effect_sweep("W_only", "beta_1w", EFFECT_GRID),
    "fig3_bottom_B_effects": _effect_sweep("B_only", "beta_1b", EFFECT_GRID),
    "fig4_WB_effects": _effect_sweep("W_and_B", "beta_1w", EFFECT_GRID),
    "fig3_top_W_alpha": _effect_sweep("W_only", "alpha_1w", ALPHA_GRID),
    "fig3_bottom_B_alpha": _effect_sweep("B_only", "alpha_1b", ALPHA_GRID),
    "fig4_WB_alpha_w": _effect_sweep("W_and_B", "alpha_1w", ALPHA_GRID),
    "fig4_WB_alpha_b": _effect_sweep("W_and_B", "alpha_1b", ALPHA_GRID),
    "fig4_WB_beta_b": _effect_sweep("W_and_B", "beta_1b", EFFECT_GRID),
}


def preset_names() -> list[str]:
    return list(PRESETS)


def expand_preset(
    name: str,
    reps: Optional[int] = None,
    out_dir: Optional[str] = None,
    empirical: bool = False,
) -> ExperimentSpec:
    """Preset → ExperimentSpec. `empirical` adds Monte Carlo points to formula-only sweeps."""
    if name not in PRESETS:
        raise ValueError(f"Unknown preset {name!r}; choose one of: {', '.join(PRESETS)}")
    p = PRESETS[name]
    outputs = None
    if out_dir is not None:
        outputs = OutputPaths(
            csv_path=str(Path(out_dir) / f"{name}.csv"),
            svg_path=str(Path(out_dir) / f"{name}.svg"),
        )
    return ExperimentSpec(
        name=name,
        base=ScenarioConfig(m=p.m, n=p.n, confounder_mode=p.mode),
        axis=p.axis,
        values=p.values,
        reps=reps if reps is not None else p.reps,
        outputs=outputs,
        analytic_only=p.analytic_only and not empirical,
        z=p.z,
        calibration=p.calibration,
        grid_note=f"preset grid for {p.axis}: chosen by confound-bench, not taken from published values",
    )
