"""Shared enums and config validation used across modules."""

from enum import Enum
from typing import Any, Mapping, Type, TypeVar

from pydantic import BaseModel, ValidationError

from .exceptions import ConfigurationError

ModelT = TypeVar("ModelT", bound=BaseModel)


class Role(str, Enum):
    """Which side of the interaction matrix a feature belongs to."""

    USER = "user"
    ITEM = "item"


class Split(str, Enum):
    """Evaluation split."""

    VAL = "val"
    TEST = "test"


class BackboneKind(str, Enum):
    """Backbone model kind; the value is the checkpoint kind tag."""

    MF = "mf"
    GCN = "gcn"

    @property
    def tag(self) -> int:
        return {BackboneKind.MF: 0, BackboneKind.GCN: 1}[self]

    @classmethod
    def from_tag(cls, tag: int) -> "BackboneKind":
        for kind in cls:
            if kind.tag == tag:
                return kind
        raise ValueError(f"unknown backbone tag {tag}")


class Mode(str, Enum):
    """Projector mode: stochastic Gumbel selection while training, argmax otherwise."""

    TRAIN = "train"
    EVAL = "eval"


def validate_config(model_cls: Type[ModelT], data: Mapping[str, Any]) -> ModelT:
    """Build a pydantic config, reporting validation failures as ``ConfigurationError``."""
    try:
        return model_cls.model_validate(dict(data))
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in error['loc']) or 'config'}: {error['msg']}" for error in exc.errors()
        )
        raise ConfigurationError(f"Invalid {model_cls.__name__}: {problems}") from None
