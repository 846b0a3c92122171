"""End-to-end synthesis run: ingestion, orchestration, manifest accounting.

Tables are delimiter-separated text files with a caption sidecar
(``<id>.tsv`` + ``<id>.caption.txt``); seeds are JSON files carrying the
code, chart type, and arity.  Every table is paired with every seed, in
sorted order, so a rerun with the same config and seed is byte-identical.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import synth
from .executors import Executor, MockExecutor, SubprocessExecutor
from .llm import HttpLlmClient, LlmClient, LlmError, MockLlmClient
from .synth import (
    Arity,
    CandidateStatus,
    CodeCandidate,
    MalformedCompletion,
    NoCodeBlock,
    ReasoningInstance,
    SeedCode,
    TableSource,
    ValidationError,
)

logger = logging.getLogger(__name__)

INSTANCES_FILENAME = "instances.jsonl"
MANIFEST_FILENAME = "manifest.json"
IMAGES_DIRNAME = "images"


class ConfigError(ValueError):
    pass


def default_chart_types() -> list[str]:
    text = resources.files("chartkit").joinpath("data/chart_types.txt").read_text("utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


@dataclass
class PipelineConfig:
    tables_dir: Path
    seeds_dir: Path
    out_dir: Path
    sft_fraction: float = synth.DEFAULT_SFT_FRACTION
    seed: int = 0
    timeout_s: float = 10.0
    chart_types: list[str] = field(default_factory=default_chart_types)
    mock: bool = False
    fixtures_dir: Path | None = None
    llm_base_url: str | None = None
    llm_api_key: str | None = None
    llm_model: str = "default"
    executor_cmd: list[str] | None = None
    workers: int = 1

    def snapshot(self) -> dict:
        snap = dataclasses.asdict(self)
        for key, value in snap.items():
            if isinstance(value, Path):
                snap[key] = str(value)
        snap["fixtures_dir"] = str(self.fixtures_dir) if self.fixtures_dir else None
        snap.pop("llm_api_key", None)  # never snapshot secrets
        return snap


@dataclass
class DatasetManifest:
    run_id: str
    seed: int
    counts: dict[str, int]
    split_sizes: dict[str, int]
    arity_stats: dict
    config: dict
    skipped_no_code: int = 0

    def check_accounting(self) -> None:
        expected = (
            self.counts["execution_failed"]
            + self.counts["format_rejected"]
            + self.counts["accepted"]
        )
        if self.counts["generated"] != expected:
            raise AssertionError(
                f"manifest accounting broken: generated={self.counts['generated']} "
                f"!= failed+rejected+accepted={expected}"
            )

    def write(self, path: Path) -> None:
        path.write_text(
            json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )


def load_tables(tables_dir: Path) -> list[TableSource]:
    tables = []
    for tsv in sorted(Path(tables_dir).glob("*.tsv")):
        caption_path = tsv.with_name(f"{tsv.stem}.caption.txt")
        caption = caption_path.read_text("utf-8").strip() if caption_path.exists() else ""
        cells = [
            line.split("\t")
            for line in tsv.read_text("utf-8").splitlines()
            if line.strip()
        ]
        tables.append(TableSource(id=tsv.stem, caption=caption, cells=cells, origin=tsv.name))
    if not tables:
        raise ConfigError(f"no .tsv tables found in {tables_dir}")
    return tables


def load_seeds(seeds_dir: Path, chart_types: list[str]) -> list[SeedCode]:
    seeds = []
    for path in sorted(Path(seeds_dir).glob("*.json")):
        data = json.loads(path.read_text("utf-8"))
        chart_type = data["chart_type"]
        if chart_type not in chart_types:
            raise ConfigError(f"seed {path.name}: unknown chart type {chart_type!r}")
        seeds.append(
            SeedCode(
                id=data.get("id", path.stem),
                chart_type=chart_type,
                arity=Arity(data["arity"]),
                code=data["code"],
            )
        )
    if not seeds:
        raise ConfigError(f"no .json seeds found in {seeds_dir}")
    return seeds


def build_client(cfg: PipelineConfig) -> LlmClient:
    if cfg.mock:
        if cfg.fixtures_dir is None:
            raise ConfigError("mock mode requires fixtures_dir")
        return MockLlmClient(cfg.fixtures_dir)
    return HttpLlmClient(base_url=cfg.llm_base_url, api_key=cfg.llm_api_key, model=cfg.llm_model)


def build_executor(cfg: PipelineConfig) -> Executor:
    if cfg.mock:
        return MockExecutor()
    return SubprocessExecutor(cfg.out_dir / "sandbox", command=cfg.executor_cmd)


def instance_record(inst: ReasoningInstance, out_dir: Path) -> dict:
    try:
        image = str(inst.image_ref.relative_to(out_dir))
    except ValueError:
        image = str(inst.image_ref)
    return {
        "id": inst.id,
        "image": image,
        "code": inst.code,
        "question": inst.question,
        "think": inst.think,
        "answer": inst.answer.raw,
        "answer_kind": inst.answer.kind.value,
        "arity": inst.arity.value,
        "chart_type": inst.chart_type,
        "split": inst.split.value,
    }


def write_instances_jsonl(instances: list[ReasoningInstance], out_dir: Path) -> Path:
    path = out_dir / INSTANCES_FILENAME
    with open(path, "w", encoding="utf-8") as fh:
        for inst in sorted(instances, key=lambda i: i.id):
            fh.write(json.dumps(instance_record(inst, out_dir), ensure_ascii=False) + "\n")
    return path


def read_instances_jsonl(path: Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def _run_id(config_snapshot: dict) -> str:
    blob = json.dumps(config_snapshot, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def run_pipeline(
    cfg: PipelineConfig,
    client: LlmClient | None = None,
    executor: Executor | None = None,
) -> DatasetManifest:
    """Full chain: compose, generate, execute, validate, split, stats, write."""
    tables = load_tables(cfg.tables_dir)
    seeds = load_seeds(cfg.seeds_dir, cfg.chart_types)
    client = client or build_client(cfg)
    executor = executor or build_executor(cfg)

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    image_dir = out_dir / IMAGES_DIRNAME

    candidates: list[CodeCandidate] = []
    skipped_no_code = 0
    for table in tables:
        for seed in seeds:
            prompt = synth.compose_code_prompt(table, seed, seed.arity)
            try:
                candidates.append(
                    synth.generate_plot_code(client, prompt, table=table, seed=seed)
                )
            except NoCodeBlock:
                logger.warning("no code block for %s/%s, skipping", table.id, seed.id)
                skipped_no_code += 1
            except LlmError as exc:
                logger.warning("code generation failed for %s/%s: %s", table.id, seed.id, exc)
                skipped_no_code += 1

    synth.execute_candidates(executor, candidates, cfg.timeout_s, image_dir)

    execution_failed = sum(1 for c in candidates if c.status is CandidateStatus.FAILED)
    format_rejected = 0
    accepted: list[ReasoningInstance] = []
    rejection_reasons: dict[str, int] = {}
    for candidate in candidates:
        if candidate.status is not CandidateStatus.RENDERED:
            continue
        try:
            raw = synth.generate_instance(client, candidate)
            accepted.append(synth.validate_instance(raw))
        except (MalformedCompletion, ValidationError, LlmError) as exc:
            format_rejected += 1
            key = exc.category.value if isinstance(exc, ValidationError) else type(exc).__name__
            rejection_reasons[key] = rejection_reasons.get(key, 0) + 1

    sft, rl = synth.split_dataset(accepted, cfg.sft_fraction, cfg.seed)
    stats = synth.compute_stats(accepted)
    write_instances_jsonl(accepted, out_dir)

    snapshot = cfg.snapshot()
    manifest = DatasetManifest(
        run_id=_run_id(snapshot),
        seed=cfg.seed,
        counts={
            "generated": len(candidates),
            "execution_failed": execution_failed,
            "format_rejected": format_rejected,
            "accepted": len(accepted),
            **{f"rejected_{k}": v for k, v in sorted(rejection_reasons.items())},
        },
        split_sizes={"sft": len(sft), "rl": len(rl)},
        arity_stats={
            name: dataclasses.asdict(row) for name, row in stats.rows.items()
        },
        config=snapshot,
        skipped_no_code=skipped_no_code,
    )
    manifest.check_accounting()
    manifest.write(out_dir / MANIFEST_FILENAME)
    return manifest
