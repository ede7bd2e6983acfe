"""
handlers/experiment_handler.py – ExperimentHandler class.
Responsibility: orchestrate config parsing + harness + bias table + SVG for
the CLI (sync) and the HTTP routes (async wrappers).
"""
import asyncio
import json
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional

import pandas as pd
from pydantic import ValidationError

from ..core.bias import BiasCell, LmmPlimConstants, bias_table, bias_table_frame
from ..core.calibration import CalibrationService
from ..core.dgp import ReplicationSeed, dataset_frame, resolve_axis, scenario_grid, simulate_dataset
from ..core.harness import DEFAULT_ADJUSTMENT_SETS, MonteCarloHarness, MonteCarloReport, run_adjustment_sets
from ..core.presets import expand_preset
from ..core.svg import ChartStyle, Series, emit_svg
from ..errors import ParseError, SchemaError, UnknownAxis
from ..models import (
    METHODS,
    CalibrationSettings,
    CovariatePolicy,
    ExperimentSpec,
    Scenario,
    ScenarioConfig,
    TableRequest,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DISAGREE = 2

# keys a {"preset": ...} file may override
_PRESET_OVERRIDES = {"reps", "outputs", "methods", "z", "policy", "calibration", "analytic_only"}


@dataclass(frozen=True)
class ExperimentOutcome:
    spec: ExperimentSpec
    report: MonteCarloReport
    csv_path: Path
    svg_path: Optional[Path]

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.report.all_agree else EXIT_DISAGREE


@dataclass(frozen=True)
class TableOutcome:
    cells: list[BiasCell]
    plims: dict[Scenario, Optional[LmmPlimConstants]]
    frame: pd.DataFrame


def atomic_write_text(path: Path, text: str) -> None:
    """Write to a temp file next to `path`, then rename over it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _schema_error(exc: ValidationError) -> SchemaError:
    return SchemaError([
        f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in exc.errors()
    ])


def _axis_violations(obj: Mapping[str, Any]) -> list[str]:
    axis = obj.get("axis")
    if not isinstance(axis, str):
        return []
    try:
        base = ScenarioConfig.model_validate(obj.get("base", {}))
    except ValidationError:
        base = ScenarioConfig()
    try:
        resolve_axis(axis, base)
    except UnknownAxis as e:
        return [f"axis: {e}"]
    return []


class ExperimentHandler:
    """Single entry point for every user-facing operation."""

    def __init__(self, harness: MonteCarloHarness, calibration: CalibrationService, out_dir: str = "./out") -> None:
        self._harness = harness
        self._calibration = calibration
        self._out_dir = Path(out_dir)

    # ── Config parsing ────────────────────────────────────────────────────────

    def load_json(self, path: str) -> dict[str, Any]:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise ParseError(str(path), f"cannot read config: {e}") from e
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError(str(path), e.msg, e.lineno, e.colno) from e
        if not isinstance(obj, dict):
            raise SchemaError([f"<root>: expected a JSON object, got {type(obj).__name__}"])
        return obj

    def parse_config(self, path: str) -> ExperimentSpec:
        return self.parse_payload(self.load_json(path))

    def parse_payload(self, obj: Mapping[str, Any]) -> ExperimentSpec:
        """Strict schema; a {"preset": name} object expands the preset first."""
        obj = dict(obj)
        if "preset" in obj:
            name = obj.pop("preset")
            unknown = sorted(set(obj) - _PRESET_OVERRIDES)
            if unknown:
                raise SchemaError([f"{k}: not allowed next to preset" for k in unknown])
            try:
                base = expand_preset(str(name))
            except ValueError as e:
                raise SchemaError([f"preset: {e}"]) from e
            obj = {**base.model_dump(), **obj}
        violations: list[str] = []
        try:
            spec = ExperimentSpec.model_validate(obj)
        except ValidationError as e:
            violations += _schema_error(e).violations
            # the axis check only runs once every field validates
            if all(err["loc"] for err in e.errors()):
                violations += _axis_violations(obj)
            raise SchemaError(violations) from e
        for i, value in enumerate(spec.values):
            try:
                scenario_grid(spec.base, spec.axis, [value])
            except ValidationError as e:
                violations += [f"values.{i}: {v}" for v in _schema_error(e).violations]
            except ValueError as e:
                violations.append(f"values.{i}: {e}")
        if violations:
            raise SchemaError(violations)
        return spec

    def parse_scenario(self, path: str) -> TableRequest:
        """Scenario-only files ({"base", "policy", "calibration"}) or full experiment files."""
        obj = self.load_json(path)
        if "axis" in obj or "preset" in obj:
            spec = self.parse_payload(obj)
            return TableRequest(base=spec.base, policy=spec.policy, calibration=spec.calibration)
        try:
            return TableRequest.model_validate(obj)
        except ValidationError as e:
            raise _schema_error(e) from e

    # ── Experiments ───────────────────────────────────────────────────────────

    def build_report(self, spec: ExperimentSpec) -> MonteCarloReport:
        grid = scenario_grid(spec.base, spec.axis, spec.values)
        return self._harness.run_monte_carlo(
            grid,
            spec.reps,
            policy=spec.policy,
            methods=spec.methods,
            axis=spec.axis,
            z=spec.z,
            analytic_only=spec.analytic_only,
            calibration=spec.calibration,
        )

    def run_experiment(self, spec: ExperimentSpec, out_dir: Optional[str] = None) -> ExperimentOutcome:
        """CSV always; SVG when the spec asks for one."""
        report = self.build_report(spec)
        root = Path(out_dir) if out_dir else self._out_dir
        csv_path = Path(spec.outputs.csv_path) if spec.outputs else root / f"{spec.name}.csv"
        svg_path = Path(spec.outputs.svg_path) if spec.outputs and spec.outputs.svg_path else None

        atomic_write_text(csv_path, self.report_csv(report))
        logger.info("[Experiment] %s → %s", spec.name, csv_path)
        if svg_path is not None:
            atomic_write_text(svg_path, self.report_svg(spec, report))
            logger.info("[Experiment] %s → %s", spec.name, svg_path)

        outcome = ExperimentOutcome(spec, report, csv_path, svg_path)
        if outcome.exit_code != EXIT_OK:
            bad = [f"{r.method}@{r.axis_value:g}" for r in report.rows if r.agreement is False]
            logger.warning("[Experiment] %s: empirical and analytic bias disagree at %s", spec.name, ", ".join(bad))
        return outcome

    def run_preset(
        self,
        name: str,
        reps: Optional[int] = None,
        out_dir: Optional[str] = None,
        empirical: bool = False,
    ) -> ExperimentOutcome:
        spec = expand_preset(name, reps=reps, out_dir=str(out_dir or self._out_dir), empirical=empirical)
        return self.run_experiment(spec)

    @staticmethod
    def report_csv(report: MonteCarloReport) -> str:
        return report.to_frame().to_csv(index=False, lineterminator="\n")

    @staticmethod
    def chart_series(spec: ExperimentSpec, report: MonteCarloReport) -> list[Series]:
        """One analytic line per method, plus empirical markers unless analytic-only."""
        series = []
        for i, method in enumerate(spec.methods):
            rows = [r for r in report.rows if r.method == method]
            series.append(Series(
                f"{method} analytic",
                tuple(r.axis_value for r in rows),
                tuple(r.analytic_bias for r in rows),
                kind="line",
                group=i,
            ))
            if not report.analytic_only:
                hits = [r for r in rows if r.mean_bias is not None]
                if hits:
                    series.append(Series(
                        f"{method} empirical",
                        tuple(r.axis_value for r in hits),
                        tuple(r.mean_bias for r in hits),
                        kind="markers",
                        group=i,
                    ))
        return series

    def report_svg(self, spec: ExperimentSpec, report: MonteCarloReport) -> str:
        style = ChartStyle(title=spec.name, x_label=spec.axis, y_label="bias")
        return emit_svg(self.chart_series(spec, report), style)

    # ── Table / simulate / adjust ─────────────────────────────────────────────

    def table(
        self,
        cfg: ScenarioConfig,
        policy: CovariatePolicy = CovariatePolicy(),
        settings: Optional[CalibrationSettings] = None,
    ) -> TableOutcome:
        plims = self._calibration.for_scenarios(cfg, policy, settings)
        cells = bias_table(cfg, plims)
        return TableOutcome(cells, plims, bias_table_frame(cells))

    def simulate(self, cfg: ScenarioConfig, dump_path: str, rep_index: int = 0, include_latents: bool = False) -> pd.DataFrame:
        frame = dataset_frame(simulate_dataset(cfg, ReplicationSeed(cfg.seed, rep_index)), include_latents)
        atomic_write_text(Path(dump_path), frame.to_csv(index=False, lineterminator="\n"))
        logger.info("[Simulate] m=%d n=%d rep=%d → %s", cfg.m, cfg.n, rep_index, dump_path)
        return frame

    def adjust(
        self,
        cfg: ScenarioConfig,
        rep_index: int = 0,
        policies: Mapping[str, CovariatePolicy] = DEFAULT_ADJUSTMENT_SETS,
    ) -> pd.DataFrame:
        return run_adjustment_sets(cfg, ReplicationSeed(cfg.seed, rep_index), policies, METHODS)

    # ── Async (HTTP) ──────────────────────────────────────────────────────────

    async def build_report_async(self, spec: ExperimentSpec) -> MonteCarloReport:
        return await asyncio.get_event_loop().run_in_executor(None, self.build_report, spec)

    async def table_async(
        self, cfg: ScenarioConfig, policy: CovariatePolicy, settings: Optional[CalibrationSettings]
    ) -> TableOutcome:
        return await asyncio.get_event_loop().run_in_executor(None, self.table, cfg, policy, settings)
