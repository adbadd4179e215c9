#!/usr/bin/env python3
"""
Command Line Interface for the QNC toolkit.

This module provides the run, curves and plot commands.
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

from .config import load_config
from .exceptions import ConfigError, QNCError
from .experiment_service import (ExperimentService, best_delay_per_quality, curves_to_frame, read_curves,
                                 read_rows)
from .plotting import plot_curves

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with the run, curves and plot sub-commands."""
    parser = argparse.ArgumentParser(description='Simulate quantized network coding against packet forwarding')
    parser.add_argument('--verbose', action='store_true', help='Enable debug logging')
    commands = parser.add_subparsers(dest='command', required=True)

    run = commands.add_parser('run', help='Run an experiment sweep')
    run.add_argument('--config', required=True, help='Path to the JSON configuration file')
    run.add_argument('--output-dir', help='Directory for the outputs (overrides the configuration)')
    run.add_argument('--format', choices=['csv', 'excel', 'both'], default='csv',
                     help='Output format (default: csv)')
    run.add_argument('--plot', action='store_true', help='Also write the SNR vs delay figure')
    run.add_argument('--no-progress', action='store_true', help='Hide the progress bar')

    curves = commands.add_parser('curves', help='Compute delay-vs-quality curves from a rows CSV')
    curves.add_argument('--input', required=True, help='Rows CSV written by run')
    curves.add_argument('--snr-grid', type=float, nargs='+', required=True, help='SNR thresholds in dB')
    curves.add_argument('--output', default='curves.csv', help='Curves CSV to write (default: curves.csv)')

    plot = commands.add_parser('plot', help='Plot a curves CSV')
    plot.add_argument('--input', required=True, help='Curves CSV')
    plot.add_argument('--out', required=True, help='Output figure (e.g. figure.svg)')
    return parser


def command_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    service = ExperimentService(cfg)
    rows = service.run(progress=not args.no_progress)
    written = service.export(args.output_dir, output_format=args.format, plot=args.plot)

    failed = sum(row.is_error for row in rows)
    print("\n=== Sweep Results ===")
    print(f"Rows: {len(rows)} ({failed} errors)")
    for kind, path in written.items():
        print(f"  {kind}: {path}")
    return 0


def command_curves(args: argparse.Namespace) -> int:
    rows = read_rows(args.input)
    curves = best_delay_per_quality(rows, args.snr_grid)
    directory = os.path.dirname(args.output)
    if directory:
        os.makedirs(directory, exist_ok=True)
    curves_to_frame(curves).to_csv(args.output, index=False, float_format='%.17g')
    print(f"Wrote {len(curves)} curve points to {args.output}")
    return 0


def command_plot(args: argparse.Namespace) -> int:
    curves = read_curves(args.input)
    plot_curves(curves, args.out)
    print(f"Wrote plot of {len(curves)} curve points to {args.out}")
    return 0


COMMANDS = {'run': command_run, 'curves': command_curves, 'plot': command_plot}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the CLI.

    Returns:
        Exit code: 0 on success, 2 on configuration errors, 1 on other failures
    """
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return 2
    except (QNCError, OSError, ValueError) as e:
        logger.error(f"{args.command} failed: {str(e)}")
        print(f"Error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
