from __future__ import annotations
from dataclasses import dataclass
from pathlib import Path
import numpy as np
import pandas as pd

from src.core.exceptions import SchemaMismatchError
from src.core.logger import logger
from src.core.models import TrialJS
from src.store.artifacts import read_header, read_trials

CURVE_COLUMNS = ["trial", "mean", "std", "runs"]


def learning_curve(trials: list[TrialJS], window: int = 20) -> pd.Series:
    """Moving-average T2 error of one run, indexed by trial. The first
    window - 1 trials have no full window and stay NaN."""
    errors = pd.Series(
        [0.0 if t.correct else 1.0 for t in trials],
        index=[t.trial for t in trials],
        dtype=np.float64,
    )
    return errors.rolling(window, min_periods=window).mean()


def mean_curve(runs: dict[int, list[TrialJS]], window: int = 20) -> pd.DataFrame:
    """Per-trial mean and standard deviation of the runs' learning curves."""
    if not runs:
        return pd.DataFrame(columns=CURVE_COLUMNS)
    curves = pd.concat(
        {seed: learning_curve(trials, window) for seed, trials in runs.items()}, axis=1
    )
    frame = pd.DataFrame(
        {
            "trial": curves.index.astype(int),
            "mean": curves.mean(axis=1).to_numpy(),
            "std": curves.std(axis=1, ddof=0).to_numpy(),
            "runs": curves.count(axis=1).to_numpy(),
        }
    )
    return frame.reset_index(drop=True)


def trials_to_threshold(curve: pd.DataFrame, threshold: float = 0.2) -> int | None:
    """First trial whose mean error is at or below the threshold."""
    below = curve.loc[curve["mean"] <= threshold, "trial"]
    if below.empty:
        return None
    return int(below.iloc[0])


def area_under_curve(curve: pd.DataFrame) -> float:
    return float(curve["mean"].sum())


@dataclass
class ComparisonReport:
    label_a: str
    label_b: str
    curves: pd.DataFrame
    diff: pd.DataFrame
    auc_a: float
    auc_b: float

    @property
    def identical(self) -> bool:
        return self.diff.empty


def compare_runs(run_a: Path, run_b: Path, window: int = 20) -> ComparisonReport:
    """Trial-aligned comparison of two run directories' error curves."""
    header_a, header_b = read_header(run_a), read_header(run_b)
    if header_a.schema_version != header_b.schema_version:
        raise SchemaMismatchError(
            f"Cannot compare schema version {header_a.schema_version} with "
            f"{header_b.schema_version}."
        )
    curve_a = mean_curve(read_trials(run_a), window)
    curve_b = mean_curve(read_trials(run_b), window)
    curves = curve_a.merge(curve_b, on="trial", how="outer", suffixes=("_a", "_b")).sort_values(
        "trial", ignore_index=True
    )
    curves["diff"] = curves["mean_b"] - curves["mean_a"]
    differs = ~(
        np.isclose(curves["mean_a"], curves["mean_b"], rtol=0.0, atol=0.0, equal_nan=True)
        & np.isclose(curves["std_a"], curves["std_b"], rtol=0.0, atol=0.0, equal_nan=True)
    )
    report = ComparisonReport(
        label_a=f"{header_a.experiment}/{header_a.label}",
        label_b=f"{header_b.experiment}/{header_b.label}",
        curves=curves,
        diff=curves.loc[differs].reset_index(drop=True),
        auc_a=area_under_curve(curve_a),
        auc_b=area_under_curve(curve_b),
    )
    logger.info(
        f"Compared '{run_a}' ({report.label_a}, AUC {report.auc_a:.2f}) with "
        f"'{run_b}' ({report.label_b}, AUC {report.auc_b:.2f}): "
        f"{len(report.diff)} differing trials."
    )
    return report
