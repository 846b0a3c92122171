"""TOML tool configuration with ``${VAR}`` environment interpolation."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from .grpo import GrpoConfig
from .pipeline import ConfigError, PipelineConfig, default_chart_types
from .rewards import RewardConfig

_ENV_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


def _interpolate(value):
    if isinstance(value, str):
        return _ENV_RE.sub(lambda m: os.environ.get(m.group(1), ""), value)
    if isinstance(value, list):
        return [_interpolate(v) for v in value]
    if isinstance(value, dict):
        return {k: _interpolate(v) for k, v in value.items()}
    return value


@dataclass
class ToolConfig:
    reward: RewardConfig = field(default_factory=RewardConfig)
    grpo: GrpoConfig = field(default_factory=GrpoConfig)
    pipeline: PipelineConfig | None = None
    raw: dict = field(default_factory=dict)


def load_config(path: str | Path, base_dir: Path | None = None) -> ToolConfig:
    """Parse and validate a tool config file.

    Relative paths resolve against the config file's directory unless
    base_dir is given.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        data = tomli.load(fh)
    data = _interpolate(data)
    base = base_dir or path.parent

    try:
        reward = RewardConfig(**data.get("reward", {}))
        grpo = GrpoConfig(**data.get("grpo", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad reward/grpo config: {exc}") from exc

    pipeline = None
    paths = data.get("paths", {})
    if paths:
        for key in ("tables", "seeds", "output"):
            if key not in paths:
                raise ConfigError(f"[paths] section missing {key!r}")
        pipe = data.get("pipeline", {})
        llm = data.get("llm", {})
        executor = data.get("executor", {})
        chart_types = default_chart_types()
        if "chart_types_file" in pipe:
            types_path = _resolve(base, pipe["chart_types_file"])
            chart_types = [
                line.strip()
                for line in types_path.read_text("utf-8").splitlines()
                if line.strip()
            ]
        try:
            pipeline = PipelineConfig(
                tables_dir=_resolve(base, paths["tables"]),
                seeds_dir=_resolve(base, paths["seeds"]),
                out_dir=_resolve(base, paths["output"]),
                sft_fraction=float(pipe.get("sft_fraction", PipelineConfig.sft_fraction)),
                seed=int(pipe.get("seed", 0)),
                timeout_s=float(pipe.get("timeout_s", 10.0)),
                chart_types=chart_types,
                mock=bool(pipe.get("mock", False)),
                fixtures_dir=_resolve(base, pipe["fixtures"]) if "fixtures" in pipe else None,
                llm_base_url=llm.get("base_url") or None,
                llm_api_key=llm.get("api_key") or None,
                llm_model=llm.get("model", "default"),
                executor_cmd=executor.get("command"),
                workers=int(pipe.get("workers", 1)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad pipeline config: {exc}") from exc
        for label, p in (("tables", pipeline.tables_dir), ("seeds", pipeline.seeds_dir)):
            if not p.is_dir():
                raise ConfigError(f"{label} directory does not exist: {p}")

    return ToolConfig(reward=reward, grpo=grpo, pipeline=pipeline, raw=data)


def _resolve(base: Path, raw: str) -> Path:
    p = Path(raw)
    return p if p.is_absolute() else (base / p)
