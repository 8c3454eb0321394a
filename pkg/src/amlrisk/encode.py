"""Categorical encoding and design-matrix assembly.

Category maps are fitted on training rows only and are immutable afterwards;
unseen categories at inference map to the reserved index (label encoding) or
an all-zero block (one-hot). Age and tenur pass through unscaled since tree
models are scale-invariant.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import IntegrityError, ParameterError
from .store import Design, FeatureVersion, RelationalStore


class EncodingMode(enum.Enum):
    LABEL = "label"
    ONE_HOT = "one_hot"

    @classmethod
    def parse(cls, value) -> "EncodingMode":
        if isinstance(value, cls):
            return value
        for mode in cls:
            if mode.value == str(value).lower().replace("-", "_"):
                return mode
        raise ParameterError(f"unknown encoding mode '{value}'")


@dataclass(frozen=True)
class CategoryMap:
    categories: tuple[str, ...]

    def __post_init__(self):
        if not self.categories:
            raise ParameterError("category map fitted on an empty column")
        if list(self.categories) != sorted(set(self.categories)):
            raise ParameterError("categories must be sorted and distinct")

    @property
    def index(self) -> dict[str, int]:
        return {c: i for i, c in enumerate(self.categories)}

    def __len__(self) -> int:
        return len(self.categories)

    def to_list(self) -> list[str]:
        return list(self.categories)


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    names: tuple[str, ...]
    cust_ids: tuple[str, ...]

    def __post_init__(self):
        if self.values.shape != (len(self.cust_ids), len(self.names)):
            raise ParameterError("matrix shape does not match names/cust_ids")
        if not np.all(np.isfinite(self.values)):
            raise IntegrityError("feature matrix contains NaN or inf cells")


def fit_category_map(values) -> CategoryMap:
    """Lexicographically ordered distinct categories of a string column."""
    vals = [str(v) for v in values]
    if not vals:
        raise ParameterError("cannot fit a category map on an empty column")
    return CategoryMap(categories=tuple(sorted(set(vals))))


def apply_encoding(values, cmap: CategoryMap, mode: EncodingMode) -> np.ndarray:
    """Numeric columns for one categorical column (2-D, float).

    Label mode yields one integer-valued column with unseen values mapped to
    the reserved index len(cmap); one-hot yields |cmap| binary columns with
    unseen values encoded as all-zero rows.
    """
    mode = EncodingMode.parse(mode)
    index = cmap.index
    codes = np.array([index.get(str(v), len(cmap)) for v in values], dtype=int)
    if mode is EncodingMode.LABEL:
        return codes.astype(float)[:, None]
    out = np.zeros((len(codes), len(cmap)))
    seen = codes < len(cmap)
    out[np.flatnonzero(seen), codes[seen]] = 1.0
    return out


def onehot_names(column: str, cmap: CategoryMap) -> list[str]:
    return [f"{column}={c}" for c in cmap.categories]


def fit_design_maps(design: Design, rows=None) -> dict[str, CategoryMap]:
    """Fit gender and occupation maps on the given training rows (all if None)."""
    idx = np.arange(design.n) if rows is None else np.asarray(rows, dtype=int)
    return {
        "gender": fit_category_map(design.gender[idx]),
        "occupation": fit_category_map(design.occupation[idx]),
    }


def encode_design(design: Design, maps: dict[str, CategoryMap],
                  mode: EncodingMode, rows=None) -> FeatureMatrix:
    """Design matrix: encoded gender + occupation, age, tenur, then
    engineered features when the design carries them."""
    mode = EncodingMode.parse(mode)
    idx = np.arange(design.n) if rows is None else np.asarray(rows, dtype=int)
    blocks = []
    names: list[str] = []
    for column, raw in (("gender", design.gender[idx]),
                        ("occupation", design.occupation[idx])):
        cmap = maps[column]
        blocks.append(apply_encoding(raw, cmap, mode))
        if mode is EncodingMode.ONE_HOT:
            names.extend(onehot_names(column, cmap))
        else:
            names.append(column)
    blocks.append(design.age[idx][:, None])
    names.append("age")
    blocks.append(design.tenur[idx][:, None])
    names.append("tenur")
    if design.features is not None:
        blocks.append(design.features[idx])
        names.extend(design.feature_names)
    return FeatureMatrix(
        values=np.hstack(blocks),
        names=tuple(names),
        cust_ids=tuple(design.cust_ids[i] for i in idx))


def assemble_matrix(store: RelationalStore,
                    version: FeatureVersion | None,
                    mode: EncodingMode,
                    maps: dict[str, CategoryMap] | None = None,
                    ) -> tuple[FeatureMatrix, np.ndarray]:
    """Full design matrix and effective label vector for a store.

    Pass maps fitted on the designated training rows to avoid test-set
    leakage; with maps=None they are fitted on every row.
    """
    design = store.load_design(version)
    if maps is None:
        maps = fit_design_maps(design)
    matrix = encode_design(design, maps, mode)
    labels = design.labels.copy()
    if not np.all((labels == 0) | (labels == 1)):
        raise IntegrityError("labels must be binary")
    return matrix, labels


def encode_customer_row(kyc_row: dict, engineered: np.ndarray | None,
                        maps: dict[str, CategoryMap],
                        mode: EncodingMode) -> np.ndarray:
    """Single-customer design row matching encode_design's column order."""
    mode = EncodingMode.parse(mode)
    parts = []
    for column in ("gender", "occupation"):
        parts.append(apply_encoding([kyc_row[column]], maps[column], mode)[0])
    parts.append([float(kyc_row["age"]), float(kyc_row["tenur"])])
    if engineered is not None:
        parts.append(np.asarray(engineered, dtype=float))
    return np.concatenate(parts)
