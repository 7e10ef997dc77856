import json
from functools import wraps
from typing import Any, Callable, Dict, Optional, Type, TypeVar

from humps import decamelize
from pydantic import BaseModel, ValidationError

from toral_nodal.constants import CONFIG_ATTRIBUTE
from toral_nodal.types import PydanticModel
from toral_nodal.utils import InputInvalidError

Model = TypeVar("Model", bound=BaseModel)


def _read_json(path: str) -> Any:
    try:
        with open(path) as file_:
            return json.load(file_)
    except (OSError, json.JSONDecodeError) as e:
        raise InputInvalidError(f"cannot read {path}: {str(e)}")


def load_config_file(path: str) -> Dict[str, Any]:
    """JSON object of config values; camelCase keys are accepted."""
    data = _read_json(path)
    if not isinstance(data, dict):
        raise InputInvalidError(f"config {path} is not a JSON object")
    return decamelize(data)


def load_document(path: str, model: Type[Model]) -> Model:
    """
        phi = load_document("phi.json", EigenfunctionDocument)
    """
    data = _read_json(path)
    try:
        return model.model_validate(decamelize(data))
    except ValidationError as ve:
        raise InputInvalidError(f"invalid {model.__name__} in {path}: {str(ve)}")


def check_config_schema(config: PydanticModel) -> PydanticModel:
    if not hasattr(config, "model_validate"):
        raise TypeError(f"{config!r} is not a pydantic model")
    return config


def validate(config: PydanticModel) -> Callable:
    """
    params:
        config:
            the pydantic model the command runs with

    values come from the model defaults, then ``--config``, then flags

    @cli.command("shell")
    @click.option("--r2", type=int)
    @config_option
    @validate(ShellConfig)
    def shell(config: ShellConfig):
        ...
    """
    config = check_config_schema(config)

    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(config_file: Optional[str] = None, **kwargs: Any) -> Any:
            data: Dict[str, Any] = {}
            if config_file is not None:
                data.update(load_config_file(config_file))
            data.update({k: v for k, v in kwargs.items() if v is not None})
            try:
                model = config(**data)
            except (TypeError, ValidationError) as ve:
                raise InputInvalidError(
                    f"invalid {func.__name__} config: {str(ve)}"
                )
            return func(model)

        setattr(wrapper, CONFIG_ATTRIBUTE, config)
        return wrapper

    return decorator
