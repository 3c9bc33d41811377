from pydantic import BaseModel, Field, field_validator, model_validator
from typing import List

VOCAB_SIZE = 256


class ModelConfig(BaseModel):
    """Architecture of the byte-level residual MLP language model."""

    vocab_size: int = VOCAB_SIZE
    embed_dim: int = Field(default=32, ge=1)
    hidden_dim: int = Field(default=64, ge=1)
    num_hidden_blocks: int = Field(default=10, ge=1)
    window: int = Field(default=8, ge=1)  # context tokens k
    group_size: int = Field(default=4, ge=2)  # M

    @field_validator("vocab_size")
    @classmethod
    def _byte_vocab(cls, value: int) -> int:
        if value != VOCAB_SIZE:
            raise ValueError(f"vocab_size must be {VOCAB_SIZE} (byte-level)")
        return value

    @model_validator(mode="after")
    def _group_divisibility(self) -> "ModelConfig":
        if (self.window * self.embed_dim) % self.group_size != 0:
            raise ValueError("k*d not divisible by M")
        if self.hidden_dim % self.group_size != 0:
            raise ValueError("h not divisible by M")
        return self

    @property
    def input_dim(self) -> int:
        return self.window * self.embed_dim

    @property
    def num_prunable_layers(self) -> int:
        return self.num_hidden_blocks + 2

    @property
    def layer_names(self) -> List[str]:
        """Prunable layers in forward order."""
        return ["W_in", *[f"hidden.{b}" for b in range(self.num_hidden_blocks)], "W_out"]


class TrainHyper(BaseModel):
    lr: float = Field(default=0.1, ge=0)
    epochs: int = Field(default=3, ge=0)
    batch_size: int = Field(default=64, ge=1)
    seed: int = 0
