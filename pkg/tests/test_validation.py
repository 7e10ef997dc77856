import json
from pathlib import Path

import pytest
from pydantic import BaseModel

from toral_nodal.constants import CONFIG_ATTRIBUTE
from toral_nodal.types import EigenfunctionDocument, JarnikConfig
from toral_nodal.utils import InputInvalidError
from toral_nodal.validation import (
    check_config_schema, load_config_file, load_document, validate
)


@validate(JarnikConfig)
def jarnik(config: JarnikConfig) -> JarnikConfig:
    return config


def write(tmp_path: Path, data) -> str:
    path = tmp_path / "data.json"
    path.write_text(data if isinstance(data, str) else json.dumps(data))
    return str(path)


def test_defaults_config_and_flags(tmp_path: Path) -> None:
    assert jarnik(r2=25).cap_factor == 0.5
    path = write(tmp_path, {"r2": 65, "capFactor": 0.25, "seed": 3})
    config = jarnik(config_file=path)
    assert (config.r2, config.cap_factor, config.seed) == (65, 0.25, 3)
    config = jarnik(config_file=path, r2=25, cap_factor=None)
    assert (config.r2, config.cap_factor) == (25, 0.25)


@pytest.mark.parametrize(
    "kwargs",
    [{}, {"r2": 0}, {"r2": 25, "cap_radius": -1.0}, {"r2": 25, "colour": 1}]
)
def test_invalid_values(kwargs: dict) -> None:
    with pytest.raises(InputInvalidError):
        jarnik(**kwargs)


def test_config_attribute() -> None:
    assert getattr(jarnik, CONFIG_ATTRIBUTE) is JarnikConfig
    assert jarnik.__name__ == "jarnik"


def test_check_config_schema() -> None:
    assert check_config_schema(JarnikConfig) is JarnikConfig
    with pytest.raises(TypeError):
        check_config_schema(dict)


@pytest.mark.parametrize("data", ["[1, 2]", "{not json"])
def test_load_config_file_rejects(tmp_path: Path, data: str) -> None:
    with pytest.raises(InputInvalidError):
        load_config_file(write(tmp_path, data))


def test_load_config_file_missing(tmp_path: Path) -> None:
    with pytest.raises(InputInvalidError):
        load_config_file(str(tmp_path / "missing.json"))


def test_load_document(tmp_path: Path) -> None:
    path = write(tmp_path, {
        "d": 2, "r2": 25, "real": False,
        "coeffs": [{"xi": [3, 4], "re": 1.0, "im": 0.0}],
    })
    document = load_document(path, EigenfunctionDocument)
    assert document.coeffs[0].xi == [3, 4]


def test_load_document_rejects(tmp_path: Path) -> None:
    class Point(BaseModel):
        x: float

    with pytest.raises(InputInvalidError):
        load_document(write(tmp_path, {"y": 1}), Point)
