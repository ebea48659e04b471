import json
import math
import pathlib

import pytest

import mobforge

ROOT = pathlib.Path(__file__).resolve().parents[2]


def test_jsd_values():
    assert mobforge.jsd([1, 0], [0, 1]) == 1.0
    assert math.isclose(mobforge.jsd([1, 0], [0.5, 0.5]), 0.311278124459, abs_tol=1e-9)
    assert mobforge.jsd([3, 1, 0, 6], [3, 1, 0, 6]) == 0.0


def test_jsd_errors_carry_code():
    with pytest.raises(mobforge.Error) as e:
        mobforge.jsd([1, 2], [1, 2, 3])
    assert e.value.code == "BinningMismatch"
    with pytest.raises(mobforge.Error) as e:
        mobforge.jsd([0, 0], [1, 1])
    assert e.value.code == "EmptyDistribution"


def test_templates():
    names = mobforge.template_names()
    assert len(names) == 6
    for n in names:
        golden = (ROOT / "tests" / "golden" / f"{n}.txt").read_text()
        assert " ".join(mobforge.template_body(n).split()) == " ".join(golden.split())
    with pytest.raises(mobforge.Error) as e:
        mobforge.render_prompt(names[0], [])
    assert e.value.code == "SlotArityMismatch"
    with pytest.raises(ValueError):
        mobforge.render_prompt("nope", [])


def test_config_errors():
    with pytest.raises(mobforge.Error) as e:
        mobforge.load_config(str(ROOT / "configs" / "does-not-exist.toml"))
    assert e.value.code in ("IoError", "ConfigError")


def test_demo_pipeline(tmp_path):
    cfg = mobforge.load_config(str(ROOT / "configs" / "demo.toml"), out_dir=str(tmp_path / "a"), seed=5)
    assert cfg.run_seed == 5
    again = mobforge.load_config(str(ROOT / "configs" / "demo.toml"), out_dir=str(tmp_path / "b"), seed=5, workers=3)
    assert cfg.hash() == again.hash()
    assert json.loads(cfg.effective_json())["run_seed"] == 5

    summaries = mobforge.run_all(cfg)
    assert set(summaries) == {"synth", "cohort", "patterns", "generate", "evaluate"}
    mobforge.run_all(again)

    a = pathlib.Path(cfg.output("generated/diaries.ndjson")).read_bytes()
    b = pathlib.Path(again.output("generated/diaries.ndjson")).read_bytes()
    assert a == b and a

    gen = mobforge.dataset_summary(cfg.output("generated"))
    assert gen["person_days"] > 0 and gen["points"] > 0

    report = mobforge.evaluate(cfg.output("source"), cfg.output("generated"))
    for m in ("SD", "SI", "ST-LOC", "DailyLoc"):
        assert 0.0 <= report["metrics"][m] <= 1.0
    same = mobforge.evaluate(cfg.output("source"), cfg.output("source"))
    assert all(v == 0.0 for v in same["metrics"].values())

    with pytest.raises(mobforge.Error):
        mobforge.run("bogus", cfg)
