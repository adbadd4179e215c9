"""
Experiment Service Module for the QNC toolkit.

This module provides a unified service for running QNC versus packet
forwarding sweeps, aggregating the result rows and exporting them.
"""

import functools
import logging
import math
import os
from multiprocessing import Pool
from typing import Any, Dict, Iterable, List, Optional, Sequence

import pandas as pd
from tqdm import tqdm

from .models import CURVE_COLUMNS, ROW_COLUMNS, CurvePoint, ExperimentConfig, ResultRow
from .pipeline import Task, run_trial
from .utils import worker_cap

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

GROUP_KEYS = ['edge_count', 'sparsity_factor', 'decoder', 'block_length', 'stop_time']
CURVE_KEYS = ['edge_count', 'sparsity_factor', 'decoder']
SUMMARY_COLUMNS = GROUP_KEYS + ['snr_mean', 'snr_stderr', 'delay_mean', 'trials']
INT_FIELDS = ('edge_count', 'trial', 'block_length', 'stop_time', 'delay_channel_uses', 'iterations', 'clip_count')


def build_tasks(cfg: ExperimentConfig) -> List[Task]:
    """All (edge_index, sparsity_index, trial) work units in index order."""
    return [
        (edge_index, sparsity_index, trial)
        for edge_index in range(len(cfg.edge_counts))
        for sparsity_index in range(len(cfg.sparsity_factors))
        for trial in range(cfg.trials)
    ]


def run_experiment(cfg: ExperimentConfig, progress: bool = True) -> List[ResultRow]:
    """Run every trial of the sweep, concurrently when more than one worker is allowed.

    Rows come back in task order whatever the completion order.

    Args:
        cfg: Experiment configuration
        progress: Show a progress bar

    Returns:
        List of ResultRow
    """
    cfg.validate()
    tasks = build_tasks(cfg)
    workers = min(worker_cap(cfg.workers), len(tasks))
    logger.info(f"Running {len(tasks)} trials on {workers} worker(s)")

    job = functools.partial(run_trial, cfg)
    if workers <= 1:
        results = [job(task) for task in tqdm(tasks, disable=not progress)]
    else:
        with Pool(workers) as pool:
            results = list(tqdm(pool.imap(job, tasks), total=len(tasks), disable=not progress))

    rows = [row for trial_rows in results for row in trial_rows]
    failed = sum(row.is_error for row in rows)
    if failed:
        logger.warning(f"{failed} of {len(rows)} rows are error rows")
    logger.info(f"Sweep completed with {len(rows)} rows")
    return rows


def rows_to_frame(rows: Iterable[ResultRow]) -> pd.DataFrame:
    """Rows as a DataFrame with the documented column order."""
    return pd.DataFrame([row.to_dict() for row in rows], columns=ROW_COLUMNS)


def _clean(value: Any) -> Any:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return None
    return value


def read_rows(path: str) -> List[ResultRow]:
    """Parse a rows CSV written by :func:`emit_outputs`.

    Args:
        path: Path to the rows CSV

    Returns:
        List of ResultRow
    """
    frame = pd.read_csv(path, dtype={'deployment_id': str, 'decoder': str, 'error': str},
                        float_precision='round_trip')
    missing = set(ROW_COLUMNS) - set(frame.columns)
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    rows = []
    for record in frame.to_dict(orient='records'):
        values = {name: _clean(record[name]) for name in ROW_COLUMNS}
        for name in INT_FIELDS:
            if values[name] is not None:
                values[name] = int(values[name])
        if values['snr_db'] is not None:
            values['snr_db'] = float(values['snr_db'])
        if values['sparsity_factor'] is not None:
            values['sparsity_factor'] = float(values['sparsity_factor'])
        if isinstance(values['converged'], str):
            values['converged'] = values['converged'] == 'True'
        elif values['converged'] is not None:
            values['converged'] = bool(values['converged'])
        values['decoder'] = values['decoder'] or ''
        values['error'] = values['error'] or ''
        rows.append(ResultRow(**values))
    return rows


def _valid_frame(rows: Iterable[ResultRow]) -> pd.DataFrame:
    frame = rows_to_frame(rows)
    frame = frame[(frame['error'].fillna('') == '') & frame['snr_db'].notna()]
    return frame.astype({'snr_db': float, 'delay_channel_uses': float})


def summarize_rows(rows: Iterable[ResultRow]) -> pd.DataFrame:
    """Mean SNR, its standard error, mean delay and trial count per configuration.

    Args:
        rows: Result rows (error rows are ignored)

    Returns:
        DataFrame with SUMMARY_COLUMNS
    """
    frame = _valid_frame(rows)
    if frame.empty:
        return pd.DataFrame(columns=SUMMARY_COLUMNS)
    grouped = frame.groupby(GROUP_KEYS, dropna=False, sort=True)
    summary = grouped.agg(
        snr_mean=('snr_db', 'mean'),
        snr_stderr=('snr_db', 'sem'),
        delay_mean=('delay_channel_uses', 'mean'),
        trials=('snr_db', 'size')
    ).reset_index()
    summary['snr_stderr'] = summary['snr_stderr'].fillna(0.0)
    return summary[SUMMARY_COLUMNS]


def best_delay_per_quality(rows: Iterable[ResultRow], snr_grid: Sequence[float]) -> List[CurvePoint]:
    """Smallest mean delay whose mean SNR reaches each threshold.

    Means are taken per (edge_count, sparsity, decoder, L, T); thresholds no
    configuration reaches produce no point.

    Args:
        rows: Result rows
        snr_grid: SNR thresholds in dB

    Returns:
        List of CurvePoint ordered by edge count, sparsity, decoder, threshold
    """
    summary = summarize_rows(rows)
    points = []
    if summary.empty:
        return points
    for (edge_count, sparsity, decoder), group in summary.groupby(CURVE_KEYS, sort=True):
        for threshold in sorted(snr_grid):
            feasible = group[group['snr_mean'] >= threshold]
            if feasible.empty:
                continue
            points.append(CurvePoint(decoder=decoder, snr_db_threshold=float(threshold),
                                     delay_channel_uses=float(feasible['delay_mean'].min()),
                                     edge_count=int(edge_count), sparsity_factor=float(sparsity)))
    return points


def curves_to_frame(curves: Iterable[CurvePoint]) -> pd.DataFrame:
    return pd.DataFrame([point.to_dict() for point in curves], columns=CURVE_COLUMNS)


def read_curves(path: str) -> List[CurvePoint]:
    """Parse a curves CSV."""
    frame = pd.read_csv(path, dtype={'decoder': str}, float_precision='round_trip')
    return [
        CurvePoint(decoder=record['decoder'], snr_db_threshold=float(record['snr_db_threshold']),
                   delay_channel_uses=float(record['delay_channel_uses']),
                   edge_count=int(record['edge_count']), sparsity_factor=float(record['sparsity_factor']))
        for record in frame.to_dict(orient='records')
    ]


def _write_csv(frame: pd.DataFrame, path: str) -> str:
    try:
        frame.to_csv(path, index=False, float_format='%.17g')
    except OSError as e:
        logger.error(f"Error exporting data to {path}: {str(e)}")
        raise OSError(f"cannot write {path}: {e}") from e
    logger.info(f"Data exported to {path}")
    return path


def export_to_excel(sheets: Dict[str, pd.DataFrame], path: str) -> str:
    """Write several frames as sheets of one workbook."""
    try:
        with pd.ExcelWriter(path, engine='xlsxwriter') as writer:
            for name, frame in sheets.items():
                frame.to_excel(writer, index=False, sheet_name=name)
    except OSError as e:
        logger.error(f"Error exporting data to {path}: {str(e)}")
        raise OSError(f"cannot write {path}: {e}") from e
    logger.info(f"Data exported to {path}")
    return path


def emit_outputs(rows: List[ResultRow], curves: List[CurvePoint], output_dir: str,
                 cfg: Optional[ExperimentConfig] = None, output_format: str = 'csv',
                 plot: bool = False) -> Dict[str, str]:
    """Write rows, summary and curves (CSV and/or Excel) and optionally the plot.

    Args:
        rows: Result rows
        curves: Curve points
        output_dir: Output directory (created if missing)
        cfg: Configuration holding the file names (defaults if omitted)
        output_format: 'csv', 'excel' or 'both'
        plot: Also write the SNR-vs-delay figure

    Returns:
        Mapping of output kind to written path
    """
    if output_format not in ('csv', 'excel', 'both'):
        raise ValueError(f"unknown output format {output_format!r}")
    cfg = cfg or ExperimentConfig()
    try:
        os.makedirs(output_dir, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create {output_dir}: {e}") from e

    frames = {
        'rows': rows_to_frame(rows),
        'summary': summarize_rows(rows),
        'curves': curves_to_frame(curves)
    }
    names = {'rows': cfg.rows_file, 'summary': cfg.summary_file, 'curves': cfg.curves_file}
    written = {}
    if output_format in ('csv', 'both'):
        for kind, frame in frames.items():
            written[kind] = _write_csv(frame, os.path.join(output_dir, names[kind]))
    if output_format in ('excel', 'both'):
        written['excel'] = export_to_excel(frames, os.path.join(output_dir, 'results.xlsx'))
    if plot and cfg.plot_file:
        from .plotting import plot_curves
        written['plot'] = plot_curves(curves, os.path.join(output_dir, cfg.plot_file))
    return written


class ExperimentService:
    """Service for running and exporting QNC sweeps."""

    def __init__(self, config: ExperimentConfig):
        """Initialize the experiment service.

        Args:
            config: Experiment configuration
        """
        config.validate()
        self.config = config
        self.rows: List[ResultRow] = []

    def run(self, progress: bool = True) -> List[ResultRow]:
        """Run the configured sweep and keep its rows."""
        self.rows = run_experiment(self.config, progress=progress)
        return self.rows

    def summary(self) -> pd.DataFrame:
        return summarize_rows(self.rows)

    def curves(self, snr_grid: Optional[Sequence[float]] = None) -> List[CurvePoint]:
        """Delay-versus-quality points of the current rows."""
        return best_delay_per_quality(self.rows, snr_grid or self.config.snr_grid)

    def export(self, output_dir: Optional[str] = None, output_format: str = 'csv',
               plot: bool = False) -> Dict[str, str]:
        """Write all outputs of the current rows.

        Args:
            output_dir: Overrides the configured output directory
            output_format: 'csv', 'excel' or 'both'
            plot: Also write the figure

        Returns:
            Mapping of output kind to written path
        """
        return emit_outputs(self.rows, self.curves(), output_dir or self.config.output_dir,
                            self.config, output_format, plot)
