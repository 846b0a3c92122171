import json
from pathlib import Path

import pytest

from chartkit.executors import MOCK_FAIL_MARKER
from chartkit.llm import MockLlmClient
from chartkit.synth import (
    Arity,
    CodeCandidate,
    SeedCode,
    TableSource,
    compose_code_prompt,
    compose_instance_prompt,
)


def make_table(i: int) -> TableSource:
    return TableSource(
        id=f"table_{i:02d}",
        caption=f"Quarterly metric {i}",
        cells=[
            ["quarter", "value_a", "value_b"],
            ["Q1", str(10 + i), str(20 + i)],
            ["Q2", str(11 + i), str(21 + i)],
            ["Q3", str(12 + i), str(19 + i)],
        ],
        origin=f"table_{i:02d}.tsv",
    )


def make_seed(arity: Arity) -> SeedCode:
    if arity is Arity.SINGLE:
        return SeedCode(
            id="seed_bar",
            chart_type="bar",
            arity=Arity.SINGLE,
            code="import matplotlib.pyplot as plt\nplt.bar(['a', 'b'], [1, 2])\n",
        )
    return SeedCode(
        id="seed_multi",
        chart_type="multi_line",
        arity=Arity.MULTI,
        code=(
            "import matplotlib.pyplot as plt\n"
            "fig, axes = plt.subplots(1, 2)\n"
            "axes[0].plot([1, 2])\naxes[1].plot([2, 1])\n"
        ),
    )


def plot_code_for(table: TableSource, seed: SeedCode, fail: bool = False) -> str:
    lines = [
        "import matplotlib.pyplot as plt",
        f"# rendering {table.id} with {seed.id}",
        "plt.plot([1, 2, 3])",
    ]
    if fail:
        lines.append(f"{MOCK_FAIL_MARKER} simulated crash")
    return "\n".join(lines) + "\n"


def instance_completion(table: TableSource, seed: SeedCode) -> str:
    # Alternate numeric and text answers by table parity.
    idx = int(table.id.split("_")[1])
    if idx % 2 == 0:
        answer = str(30 + idx)
    else:
        answer = f"quarter Q{1 + idx % 3}"
    return (
        f"QUESTION: What is the combined value for {table.id} in the {seed.chart_type} chart?\n"
        f"THINK: Read the plotted values, then combine them step by step for {table.id}.\n"
        f"ANSWER: {answer}\n"
    )


def build_synth_fixture(root: Path, n_tables: int = 10, fail_indices: tuple[int, ...] = (3,)):
    """Write tables, seeds, and mock LLM completions for a pipeline run.

    Returns (tables_dir, seeds_dir, fixtures_dir).  Every table is paired
    with both seeds; candidates for tables in fail_indices paired with the
    single-arity seed carry the mock-executor failure marker.
    """
    tables_dir = root / "tables"
    seeds_dir = root / "seeds"
    fixtures_dir = root / "fixtures"
    for d in (tables_dir, seeds_dir, fixtures_dir):
        d.mkdir(parents=True, exist_ok=True)

    seeds = [make_seed(Arity.SINGLE), make_seed(Arity.MULTI)]
    for seed in seeds:
        (seeds_dir / f"{seed.id}.json").write_text(
            json.dumps(
                {"id": seed.id, "chart_type": seed.chart_type, "arity": seed.arity.value, "code": seed.code}
            ),
            encoding="utf-8",
        )

    for i in range(n_tables):
        table = make_table(i)
        tsv = "\n".join("\t".join(row) for row in table.cells) + "\n"
        (tables_dir / f"{table.id}.tsv").write_text(tsv, encoding="utf-8")
        (tables_dir / f"{table.id}.caption.txt").write_text(table.caption + "\n", encoding="utf-8")
        for seed in seeds:
            fail = i in fail_indices and seed.arity is Arity.SINGLE
            code = plot_code_for(table, seed, fail=fail)
            prompt = compose_code_prompt(table, seed, seed.arity)
            MockLlmClient.record(fixtures_dir, prompt, f"Sure.\n```python\n{code}```\n")
            if not fail:
                candidate = CodeCandidate(
                    code=code,
                    chart_type=seed.chart_type,
                    arity=seed.arity,
                    table_id=table.id,
                    seed_id=seed.id,
                )
                MockLlmClient.record(
                    fixtures_dir,
                    compose_instance_prompt(candidate),
                    instance_completion(table, seed),
                )
    return tables_dir, seeds_dir, fixtures_dir


@pytest.fixture
def synth_fixture(tmp_path):
    return build_synth_fixture(tmp_path)
