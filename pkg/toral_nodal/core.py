import json
import logging
from collections.abc import Mapping
from typing import Any, Dict, Iterable, Optional, Tuple

import click
from humps import camelize
from pydantic import BaseModel

from toral_nodal.constants import CONFIG_ATTRIBUTE
from toral_nodal.types import PydanticModel

logger = logging.getLogger(__name__)


def to_jsonable(document: Any, camel: bool = False) -> Any:
    if isinstance(document, BaseModel):
        document = document.model_dump(mode="json")
    if camel and isinstance(document, (list, Mapping)):
        document = camelize(document)
    return document


def dump_document(document: Any, camel: bool = False) -> str:
    """
        pretty JSON for a document model or plain data

        dump_document(shell.document(), camel=True)
    """
    return json.dumps(to_jsonable(document, camel), indent=2, ensure_ascii=False)


def emit(text: str, output: Optional[str] = None) -> None:
    if output is not None:
        with open(output, "w") as file_:
            click.echo(text, file=file_, nl=not text.endswith("\n"))
        logger.info(f"wrote {output}")
    else:
        click.echo(text, nl=not text.endswith("\n"))


def config_models(
    commands: Iterable[Tuple[str, click.Command]]
) -> Dict[str, PydanticModel]:
    models = {}
    for name, command in commands:
        model = getattr(command.callback, CONFIG_ATTRIBUTE, None)
        if model is not None:
            models[name] = model
    return models


def build_config_schema(
    commands: Iterable[Tuple[str, click.Command]],
    camel: bool = False
) -> dict:
    """JSON schema of every experiment config, keyed by command name."""
    schema = {
        name: model.model_json_schema()
        for name, model in sorted(config_models(commands).items())
    }
    return camelize(schema) if camel else schema
