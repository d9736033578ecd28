"""Functional time series container and CSV ingestion."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataFormatError(ValueError):
    pass


@dataclass
class FunctionalDataset:
    """T curves observed on a common grid of M points, plus T x p predictors.

    Missing response values are NaN.
    """

    Y: np.ndarray
    tau: np.ndarray
    X: np.ndarray
    time_labels: list = field(default_factory=list)
    predictor_names: list = field(default_factory=list)

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=float)
        self.tau = np.asarray(self.tau, dtype=float)
        T, M = self.Y.shape
        if self.X is None:
            self.X = np.zeros((T, 0))
        self.X = np.asarray(self.X, dtype=float).reshape(T, -1)
        if self.tau.shape != (M,):
            raise DataFormatError(f"grid has {self.tau.size} points but the response has {M} columns")
        if np.any(np.diff(self.tau) <= 0):
            raise DataFormatError("observation points must be strictly increasing")
        if not np.all(np.isfinite(self.X)):
            raise DataFormatError("predictors must be finite")
        if np.any(np.isinf(self.Y)):
            raise DataFormatError("response contains infinite values")
        if not self.time_labels:
            self.time_labels = [str(t + 1) for t in range(T)]
        if not self.predictor_names:
            self.predictor_names = [f"x{j + 1}" for j in range(self.p)]

    @property
    def T(self) -> int:
        return self.Y.shape[0]

    @property
    def M(self) -> int:
        return self.Y.shape[1]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.Y)

    def standardized(self) -> "FunctionalDataset":
        """Copy with centered and scaled predictors."""
        X = self.X - self.X.mean(axis=0)
        sd = X.std(axis=0, ddof=1) if self.T > 1 else np.ones(self.p)
        sd[sd == 0] = 1.0
        return FunctionalDataset(self.Y.copy(), self.tau.copy(), X / sd,
                                 list(self.time_labels), list(self.predictor_names))


def _parse_float(text, path, row, col):
    text = text.strip()
    if text == "" or text.upper() in ("NA", "NAN"):
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise DataFormatError(f"{path}: non-numeric value {text!r} at row {row}, column {col}") from None


def _read_rows(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise DataFormatError(f"{path}: expected a header and at least one data row")
    width = len(rows[0])
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != width:
            raise DataFormatError(f"{path}: ragged row {i} has {len(r)} fields, header has {width}")
    return rows


def load_dataset(response_path, predictor_path=None, standardize=False) -> FunctionalDataset:
    """Read a wide response CSV and an optional predictor CSV.

    Response: first column holds time labels, the remaining headers are the
    observation points, blank cells are missing.  Predictors: one column per
    predictor and one row per time; a leading column with the same header as
    the response's label column is treated as labels.
    """
    rows = _read_rows(response_path)
    header = rows[0]
    tau = [_parse_float(h, response_path, 1, c + 2) for c, h in enumerate(header[1:])]
    if any(math.isnan(v) for v in tau):
        raise DataFormatError(f"{response_path}: response header must name numeric observation points")
    labels = [r[0] for r in rows[1:]]
    Y = np.array([[_parse_float(v, response_path, i + 2, c + 2) for c, v in enumerate(r[1:])]
                  for i, r in enumerate(rows[1:])])

    X, names = None, []
    if predictor_path is not None:
        prow = _read_rows(predictor_path)
        pheader = prow[0]
        start = 1 if pheader[0] == header[0] else 0
        names = pheader[start:]
        body = prow[1:]
        if len(body) != len(labels):
            raise DataFormatError(
                f"{predictor_path}: {len(body)} predictor rows but {len(labels)} response rows")
        X = np.array([[_parse_float(v, predictor_path, i + 2, c + 1 + start) for c, v in enumerate(r[start:])]
                      for i, r in enumerate(body)]).reshape(len(body), len(names))
        if np.isnan(X).any():
            i, c = np.argwhere(np.isnan(X))[0]
            raise DataFormatError(f"{predictor_path}: missing predictor at row {i + 2}, column {c + 1 + start}")
    data = FunctionalDataset(Y, np.array(tau), X, labels, names)
    return data.standardized() if standardize else data


def _fmt(v):
    return "" if math.isnan(v) else repr(float(v))


def save_dataset(data: FunctionalDataset, response_path, predictor_path=None, label_header="time"):
    with Path(response_path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([label_header] + [repr(float(t)) for t in data.tau])
        for lab, row in zip(data.time_labels, data.Y):
            w.writerow([lab] + [_fmt(v) for v in row])
    if predictor_path is not None:
        with Path(predictor_path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([label_header] + list(data.predictor_names))
            for lab, row in zip(data.time_labels, data.X):
                w.writerow([lab] + [repr(float(v)) for v in row])
