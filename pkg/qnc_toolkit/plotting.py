"""
Plotting Module for the QNC toolkit.

This module draws the SNR-versus-delivery-delay curves as a vector figure.
"""

import logging
from typing import Iterable

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402

from .models import CurvePoint  # noqa: E402

logger = logging.getLogger(__name__)

SERIES_STYLE = {
    'bp': dict(marker='o', linestyle='-'),
    'l1': dict(marker='s', linestyle='--'),
    'l1_debiased': dict(marker='D', linestyle='-.'),
    'oracle': dict(marker='^', linestyle=':'),
    'forwarding': dict(marker='x', linestyle='-.', color='black'),
}


def plot_curves(curves: Iterable[CurvePoint], path: str) -> str:
    """Plot one series per (edge count, sparsity, decoder) with SNR over delay.

    Args:
        curves: Curve points
        path: Output file (format from the extension, SVG recommended)

    Returns:
        The path written
    """
    series = {}
    for point in curves:
        key = (point.edge_count, point.sparsity_factor, point.decoder)
        series.setdefault(key, []).append(point)

    panels = sorted({(edge_count, sparsity) for edge_count, sparsity, _ in series})
    fig, axes = plt.subplots(1, max(len(panels), 1), figsize=(5 * max(len(panels), 1), 4), squeeze=False)
    for ax, (edge_count, sparsity) in zip(axes[0], panels):
        for (e, k, decoder), points in sorted(series.items()):
            if (e, k) != (edge_count, sparsity):
                continue
            points = sorted(points, key=lambda p: p.snr_db_threshold)
            label = 'QNC ' + decoder if decoder != 'forwarding' else 'packet forwarding'
            ax.plot([p.delay_channel_uses for p in points], [p.snr_db_threshold for p in points],
                    label=label, **SERIES_STYLE.get(decoder, {}))
        ax.set_xlabel('delivery delay (channel uses)')
        ax.set_ylabel('SNR (dB)')
        ax.set_title(f'|E|={edge_count}, k/n={sparsity:g}')
        ax.grid(True, alpha=0.3)
        ax.legend(frameon=False)

    try:
        fig.savefig(path, bbox_inches='tight')
    except OSError as e:
        logger.error(f"Error writing plot to {path}: {str(e)}")
        raise OSError(f"cannot write {path}: {e}") from e
    finally:
        plt.close(fig)
    logger.info(f"Plot written to {path}")
    return path
