"""Time series container and local-projection design matrices."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DataError


class SpecKind(Enum):
    """Regression specification: responses in levels or long differences."""

    LEVEL = "level"
    LONG_DIFFERENCED = "ld"


@dataclass(frozen=True)
class TimeSeriesData:
    """T x M observation matrix with unique column names, oldest row first."""

    values: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError("values must be a 2-d array (rows = time)")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise DataError("need at least one row and one column")
        if not np.all(np.isfinite(values)):
            t, m = np.argwhere(~np.isfinite(values))[0]
            raise DataError(f"non-finite value at row {t + 1}, column {m + 1}")
        names = tuple(str(n) for n in self.names)
        if len(names) != values.shape[1]:
            raise DataError("number of names must match number of columns")
        if len(set(names)) != len(names):
            raise DataError("column names must be unique")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def M(self) -> int:
        return self.values.shape[1]

    def column_index(self, column: int | str) -> int:
        """Resolve a column given by name or integer position."""
        if isinstance(column, (int, np.integer)):
            idx = int(column)
            if not 0 <= idx < self.M:
                raise DataError(f"column index {idx} out of range [0, {self.M})")
            return idx
        try:
            return self.names.index(column)
        except ValueError:
            raise DataError(f"unknown column {column!r}") from None

    def column(self, column: int | str) -> np.ndarray:
        return self.values[:, self.column_index(column)]


@dataclass(frozen=True)
class LpDesign:
    """Aligned response block Y, regressors X, optional instruments Z.

    Rows are the common regression sample shared by all horizons. Column 0
    of X is the treatment, column 1 the intercept; Z (when present) equals X
    with the treatment column replaced by the instrument columns.
    """

    Y: np.ndarray
    X: np.ndarray
    Z: np.ndarray | None
    H: int
    L: int
    spec: SpecKind
    shock_column: int = 0
    n_instruments: int = field(default=0)

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if Y.shape[0] != X.shape[0]:
            raise DataError("Y and X must have the same number of rows")
        if Y.shape[1] != self.H + 1:
            raise DataError("Y must have H+1 columns")
        if X.shape[0] <= X.shape[1]:
            raise DataError(
                f"effective sample {X.shape[0]} must exceed regressor count {X.shape[1]}"
            )
        if self.Z is not None:
            Z = np.asarray(self.Z, dtype=float)
            if Z.shape[0] != X.shape[0]:
                raise DataError("Z and X must have the same number of rows")
            if X.shape[0] <= Z.shape[1]:
                raise DataError(
                    f"effective sample {X.shape[0]} must exceed instrument count {Z.shape[1]}"
                )
            object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "X", X)

    @property
    def T_eff(self) -> int:
        return self.X.shape[0]

    @property
    def J(self) -> int:
        return self.X.shape[1]

    @property
    def K(self) -> int | None:
        return None if self.Z is None else self.Z.shape[1]

    @property
    def D(self) -> int:
        return self.J * (self.H + 1)


def load_csv(path: str | Path) -> TimeSeriesData:
    """Read a headered CSV of real numbers into a TimeSeriesData.

    Row order is time order (oldest first). Decimal separator is '.',
    encoding UTF-8. Any non-numeric or non-finite cell is rejected with its
    row and column named.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        names = tuple(h.strip() for h in header)
        rows = []
        for i, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(names):
                raise DataError(
                    f"{path}: row {i} has {len(row)} cells, expected {len(names)}"
                )
            parsed = []
            for j, cell in enumerate(row):
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric cell at row {i}, column {names[j]!r}"
                    ) from None
                if not np.isfinite(value):
                    raise DataError(
                        f"{path}: non-finite cell at row {i}, column {names[j]!r}"
                    )
                parsed.append(value)
            rows.append(parsed)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return TimeSeriesData(values=np.array(rows, dtype=float), names=names)


def build_design(
    data: TimeSeriesData,
    response: int | str,
    shock: int | str,
    controls: tuple[int | str, ...] = (),
    iv: tuple[int | str, ...] | None = None,
    *,
    H: int,
    L: int,
    spec: SpecKind = SpecKind.LEVEL,
    ld_baseline: str = "previous",
) -> LpDesign:
    """Construct the multi-horizon regression design for one response.

    Y column h holds the horizon-h response: y_{t+h} in levels, or the
    cumulated change from a baseline level in the long-differenced spec.
    X holds [shock_t, 1, lags 1..L of the response (first-differenced in the
    LD spec), each control, and the shock]. With instruments, Z equals X with
    the shock column replaced by the instrument columns.

    ld_baseline selects the LD baseline level: "previous" uses y_{t-1}
    (the pre-shock level, keeping horizon 0 informative) and "current" uses
    y_t (which makes the horizon-0 response identically zero).
    """
    if H < 0:
        raise DataError("H must be nonnegative")
    if L < 1:
        raise DataError("L must be at least 1")
    if ld_baseline not in ("previous", "current"):
        raise DataError("ld_baseline must be 'previous' or 'current'")
    if iv is not None and len(iv) == 0:
        raise DataError("iv column list must be non-empty when provided")

    resp_idx = data.column_index(response)
    shock_idx = data.column_index(shock)
    ctrl_idx = [data.column_index(c) for c in controls]
    all_idx = [resp_idx, shock_idx] + ctrl_idx
    if len(set(all_idx)) != len(all_idx):
        raise DataError("response, shock, and controls must be distinct columns")
    iv_idx = None
    if iv is not None:
        iv_idx = [data.column_index(c) for c in iv]
        if len(set(iv_idx)) != len(iv_idx):
            raise DataError("instrument columns must be distinct")

    values = data.values
    T = data.T
    y = values[:, resp_idx]

    # The LD spec regresses on lagged first differences of the response,
    # which needs one presample row beyond what the level spec needs.
    first_t = L if spec is SpecKind.LEVEL else L + 1
    T_eff = T - H - first_t
    n_lagged = 1 + len(ctrl_idx) + 1
    J = 2 + n_lagged * L
    if T_eff <= J:
        raise DataError(
            f"insufficient rows: effective sample {T_eff} must exceed {J} regressors"
        )

    t = np.arange(first_t, first_t + T_eff)

    if spec is SpecKind.LEVEL:
        Y = np.stack([y[t + h] for h in range(H + 1)], axis=1)
    else:
        base = y[t - 1] if ld_baseline == "previous" else y[t]
        Y = np.stack([y[t + h] - base for h in range(H + 1)], axis=1)

    columns = [values[t, shock_idx], np.ones(T_eff)]
    if spec is SpecKind.LEVEL:
        resp_for_lags = y
    else:
        dy = np.empty_like(y)
        dy[0] = np.nan
        dy[1:] = y[1:] - y[:-1]
        resp_for_lags = dy
    for var in [resp_for_lags] + [values[:, c] for c in ctrl_idx] + [values[:, shock_idx]]:
        for lag in range(1, L + 1):
            columns.append(var[t - lag])
    X = np.stack(columns, axis=1)

    Z = None
    n_instruments = 0
    if iv_idx is not None:
        iv_cols = [values[t, c] for c in iv_idx]
        Z = np.stack(iv_cols + columns[1:], axis=1)
        n_instruments = len(iv_idx)

    return LpDesign(
        Y=Y, X=X, Z=Z, H=H, L=L, spec=spec, shock_column=0, n_instruments=n_instruments
    )
