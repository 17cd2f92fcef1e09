"""
Command-line front end: phase curves, Levinson reports, crossing sweeps and the
Saito construction for two-dimensional partial-wave problems.
"""
import argparse
import logging
import sys
from typing import List, Optional

from config import Config, active_config
from levinson_verifier import EXIT_OK, LevinsonVerifier, __version__
from models import JumpConvention


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--input', '-i', required=True, help="Problem document (JSON)")
    parser.add_argument('--out', '-o', default=Config.OUTPUT_DIR, help=f"Output directory (default: {Config.OUTPUT_DIR})")
    parser.add_argument('--grid-points', type=int, default=None,
                        help="Override the document's grid size (separable kernels only)")
    parser.add_argument('--lambda-points', type=int, default=Config.LAMBDA_POINTS,
                        help=f"Initial lambda samples (default: {Config.LAMBDA_POINTS})")
    parser.add_argument('--threads', type=int, default=Config.THREADS,
                        help=f"Worker threads; results do not depend on it (default: {Config.THREADS})")
    parser.add_argument('--levinson-tolerance', type=float, default=Config.LEVINSON_TOLERANCE,
                        help=f"Levinson check tolerance in units of pi (default: {Config.LEVINSON_TOLERANCE})")
    parser.add_argument('--critical-tolerance', type=float, default=Config.CRITICAL_TOLERANCE,
                        help=f"|A(0) - rho_m| tolerance in units of 1/r0 (default: {Config.CRITICAL_TOLERANCE})")
    parser.add_argument('--eta-zero-tolerance', type=float, default=Config.ETA_ZERO_TOLERANCE,
                        help=f"Distance from a multiple of pi accepted for eta(0), rad (default: {Config.ETA_ZERO_TOLERANCE})")
    parser.add_argument('--orthogonality-tolerance', type=float, default=Config.ORTHOGONALITY_TOLERANCE,
                        help=f"Saito overlap tolerance (default: {Config.ORTHOGONALITY_TOLERANCE})")
    parser.add_argument('--saito-tolerance', type=float, default=Config.SAITO_RESIDUAL,
                        help=f"Saito zero-energy residual tolerance (default: {Config.SAITO_RESIDUAL})")
    parser.add_argument('--log-level', default=Config.LOG_LEVEL, help=f"Logging level (default: {Config.LOG_LEVEL})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='levinson2d',
        description="Two-dimensional Levinson theorem checks for local and non-local cutoff potentials",
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest='command', required=True)

    curve_parser = subparsers.add_parser('phase-curve', help="Phase shift over a momentum grid (CSV)")
    _add_common(curve_parser)
    curve_parser.add_argument('--m', type=int, default=None, help="Override the angular momentum")
    curve_parser.add_argument('--k-min', type=float, required=True, help="Smallest momentum")
    curve_parser.add_argument('--k-max', type=float, required=True, help="Largest momentum")
    curve_parser.add_argument('--k-points', type=int, default=50, help="Number of momenta (default: 50)")
    curve_parser.add_argument('--lambda', dest='lam', type=float, default=None, help="Coupling in [0, 1] (default: 1)")
    curve_parser.add_argument('--convention', choices=[c.value for c in JumpConvention],
                              default=JumpConvention.JUMP_BY_PI.value,
                              help="Phase convention at positive-energy bound states (default: jump_by_pi)")

    spectrum_parser = subparsers.add_parser('spectrum', help="Bound states and the Levinson report (JSON + CSV)")
    _add_common(spectrum_parser)
    spectrum_parser.add_argument('--m', type=int, default=None, help="Override the angular momentum")

    sweep_parser = subparsers.add_parser('sweep', help="Zero-energy crossing ledger (CSV)")
    _add_common(sweep_parser)
    sweep_parser.add_argument('--m', type=int, default=None, help="Override the angular momentum")
    sweep_parser.add_argument('--axis', choices=['lambda', 'depth', 'lambda+depth'], default='lambda',
                              help="Sweep parameter (default: lambda)")
    sweep_parser.add_argument('--depth-stop', type=float, default=-1.0,
                              help="Final depth multiplier of a depth sweep (default: -1)")

    saito_parser = subparsers.add_parser('saito', help="Saito redundant-state checks (JSON)")
    _add_common(saito_parser)
    saito_parser.add_argument('--level', type=int, default=0, help="Bound state to make redundant, deepest first")
    saito_parser.add_argument('--energies', type=float, nargs='+', default=None,
                              help="Positive energies for the orthogonality check (default: 10 samples)")
    return parser


def apply_overrides(args: argparse.Namespace) -> None:
    """Copy flag values onto the active configuration"""
    profile = active_config()
    if profile is not Config:
        for name in ('GRID_POINTS', 'LAMBDA_POINTS', 'SCAN_POINTS'):
            setattr(Config, name, getattr(profile, name))
    Config.LAMBDA_POINTS = args.lambda_points
    Config.LEVINSON_TOLERANCE = args.levinson_tolerance
    Config.CRITICAL_TOLERANCE = args.critical_tolerance
    Config.ETA_ZERO_TOLERANCE = args.eta_zero_tolerance
    Config.ORTHOGONALITY_TOLERANCE = args.orthogonality_tolerance
    Config.SAITO_RESIDUAL = args.saito_tolerance


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    Config.setup_logging(args.log_level)
    apply_overrides(args)

    verifier = LevinsonVerifier(args.out, args.threads)
    if args.command == 'phase-curve':
        result = verifier.phase_curve(args.input, args.k_min, args.k_max, args.k_points, args.lam, args.m,
                                      args.grid_points, JumpConvention(args.convention))
    elif args.command == 'spectrum':
        result = verifier.spectrum(args.input, args.m, args.grid_points)
    elif args.command == 'sweep':
        result = verifier.sweep(args.input, args.axis, args.lambda_points, args.depth_stop, args.m, args.grid_points)
    else:
        result = verifier.saito(args.input, args.level, args.energies, args.grid_points)

    if not result['success']:
        print(f"error: {result['error']}", file=sys.stderr)
        return result['exit_code']
    if result['exit_code'] != EXIT_OK:
        print(f"{args.command}: checks did not pass, see {result['manifest']}", file=sys.stderr)
    for path in result['outputs']:
        print(path)
    return result['exit_code']


if __name__ == '__main__':
    sys.exit(main())
