"""Pydantic models for density matrices, observables and channels."""

import math
from typing import Any, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.config import settings


def _frozen_complex(value: Any) -> np.ndarray:
    arr = np.array(value, dtype=complex)
    arr.setflags(write=False)
    return arr


def _hermiticity_defect(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


class MatrixPayload(BaseModel):
    """JSON wire format for a matrix: row-major real and imaginary parts."""

    model_config = ConfigDict(extra="forbid")

    dims: list[int] = Field(min_length=1)
    re: list[list[float]]
    im: list[list[float]] | None = None

    @field_validator("dims")
    @classmethod
    def dims_positive(cls, v: list[int]) -> list[int]:
        if any(d < 1 for d in v):
            raise ValueError("Local dimensions must be positive")
        return v

    def to_array(self) -> np.ndarray:
        re = np.asarray(self.re, dtype=float)
        im = np.asarray(self.im, dtype=float) if self.im is not None else np.zeros_like(re)
        if re.shape != im.shape:
            raise ValueError("Real and imaginary parts differ in shape")
        return re + 1j * im

    @classmethod
    def from_array(cls, dims: tuple[int, ...] | list[int], data: np.ndarray) -> Self:
        return cls(dims=list(dims), re=data.real.tolist(), im=data.imag.tolist())


class _LocalOperator(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    local_dims: tuple[int, ...]
    data: np.ndarray

    @field_validator("local_dims")
    @classmethod
    def dims_within_limit(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        if not v or any(d < 1 for d in v):
            raise ValueError("Local dimensions must be a non-empty list of positive integers")
        total = math.prod(v)
        if total > settings.max_total_dim:
            raise ValueError(
                f"Total dimension {total} exceeds the supported maximum {settings.max_total_dim}"
            )
        return v

    @field_validator("data", mode="before")
    @classmethod
    def coerce_data(cls, v: Any) -> np.ndarray:
        return _frozen_complex(v)

    @model_validator(mode="after")
    def check_matrix(self) -> Self:
        side = math.prod(self.local_dims)
        if self.data.shape != (side, side):
            raise ValueError(
                f"Matrix shape {self.data.shape} does not match local dims {self.local_dims}"
            )
        if _hermiticity_defect(self.data) > settings.hermitian_tol:
            raise ValueError(f"{type(self).__name__} is not Hermitian")
        self._check_invariants()
        return self

    def _check_invariants(self) -> None:
        """Subclass hook for invariants beyond shape and Hermiticity."""

    @property
    def dim(self) -> int:
        return int(self.data.shape[0])

    @property
    def num_parties(self) -> int:
        return len(self.local_dims)

    def to_payload(self) -> MatrixPayload:
        return MatrixPayload.from_array(self.local_dims, self.data)

    @classmethod
    def from_payload(cls, payload: MatrixPayload | dict[str, Any]) -> Self:
        if not isinstance(payload, MatrixPayload):
            payload = MatrixPayload.model_validate(payload)
        return cls(local_dims=tuple(payload.dims), data=payload.to_array())

    @classmethod
    def from_json(cls, text: str) -> Self:
        return cls.from_payload(MatrixPayload.model_validate_json(text))


class DensityMatrix(_LocalOperator):
    """Hermitian, unit-trace, positive semidefinite matrix over ``local_dims`` parties.

    Party 0 is the most significant tensor factor.
    """

    def _check_invariants(self) -> None:
        if abs(np.trace(self.data) - 1.0) > settings.trace_tol:
            raise ValueError(f"Density matrix trace {np.trace(self.data).real:.3e} != 1")
        min_eig = float(np.linalg.eigvalsh(self.data)[0])
        if min_eig < settings.psd_floor:
            raise ValueError(f"Density matrix has negative eigenvalue {min_eig:.3e}")


class Observable(_LocalOperator):
    """Hermitian operator on one or more parties."""

    def is_dichotomic(self) -> bool:
        square = self.data @ self.data
        return bool(np.max(np.abs(square - np.eye(self.dim))) <= settings.dichotomic_tol)


class DichotomicObservable(Observable):
    """Observable with spectrum in {+1, -1}, i.e. squaring to the identity."""

    def _check_invariants(self) -> None:
        if not self.is_dichotomic():
            raise ValueError("Observable does not square to the identity")


class KrausChannel(BaseModel):
    """Completely positive trace-preserving map given by Kraus operators."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    input_dim: int = Field(ge=1)
    output_dim: int = Field(ge=1)
    kraus_ops: tuple[np.ndarray, ...]

    @field_validator("kraus_ops", mode="before")
    @classmethod
    def coerce_ops(cls, v: Any) -> tuple[np.ndarray, ...]:
        return tuple(_frozen_complex(k) for k in v)

    @model_validator(mode="after")
    def check_completeness(self) -> Self:
        if not self.kraus_ops:
            raise ValueError("A channel needs at least one Kraus operator")
        for k in self.kraus_ops:
            if k.shape != (self.output_dim, self.input_dim):
                raise ValueError(
                    f"Kraus operator shape {k.shape} != ({self.output_dim}, {self.input_dim})"
                )
        completeness = sum(k.conj().T @ k for k in self.kraus_ops)
        if np.max(np.abs(completeness - np.eye(self.input_dim))) > settings.kraus_tol:
            raise ValueError("Kraus operators do not satisfy sum K^dag K = 1")
        return self

    @classmethod
    def unitary(cls, u: np.ndarray) -> Self:
        u = np.asarray(u, dtype=complex)
        return cls(input_dim=u.shape[1], output_dim=u.shape[0], kraus_ops=(u,))

    @classmethod
    def identity(cls, dim: int) -> Self:
        return cls.unitary(np.eye(dim))

    def is_unitary(self) -> bool:
        return len(self.kraus_ops) == 1 and self.input_dim == self.output_dim

    def to_payload(self) -> dict[str, Any]:
        return {
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "kraus": [MatrixPayload.from_array([self.output_dim], k).model_dump()
                      for k in self.kraus_ops],
        }

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> Self:
        ops = [MatrixPayload.model_validate(k).to_array() for k in payload["kraus"]]
        return cls(
            input_dim=payload["input_dim"], output_dim=payload["output_dim"], kraus_ops=ops
        )
