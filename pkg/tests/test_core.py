import json
from pathlib import Path

from toral_nodal.command import cli
from toral_nodal.core import (
    build_config_schema, config_models, dump_document, emit, to_jsonable
)
from toral_nodal.types import ShellConfig, ShellStats


def test_to_jsonable() -> None:
    stats = ShellStats(d=2, r2=25, count=12, min_distance2=2)
    assert to_jsonable(stats)["min_distance2"] == 2
    assert to_jsonable(stats, camel=True)["minDistance2"] == 2
    assert to_jsonable([{"cap_radius": 1.0}], camel=True) == [{"capRadius": 1.0}]
    assert to_jsonable(3.5, camel=True) == 3.5


def test_dump_document() -> None:
    stats = ShellStats(d=2, r2=25, count=12)
    text = dump_document(stats, camel=True)
    assert json.loads(text) == {
        "d": 2, "r2": 25, "count": 12, "minDistance2": None, "diameter2": None
    }
    assert text.startswith("{\n  ")


def test_emit(tmp_path: Path, capsys) -> None:
    path = tmp_path / "out.csv"
    emit("a,b\n1,2\n", str(path))
    assert path.read_text() == "a,b\n1,2\n"
    emit("{}")
    assert capsys.readouterr().out == "{}\n"


def test_config_models() -> None:
    models = config_models(cli.commands.items())
    assert models["shell"] is ShellConfig
    assert "schema" not in models


def test_build_config_schema() -> None:
    schema = build_config_schema(cli.commands.items())
    assert list(schema) == sorted(schema)
    assert "r2" in schema["shell"]["required"]
    camel = build_config_schema(cli.commands.items(), camel=True)
    assert "dMultiplier" in camel["meansquare"]["properties"]
