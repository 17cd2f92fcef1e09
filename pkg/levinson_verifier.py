"""
Levinson verifier
Coordinates problem loading, the numerical processors and artifact emission for each command
"""
import logging
from dataclasses import replace
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from config import Config
from models import (CheckStatus, JumpConvention, LevinsonError, ProblemSyntaxError, RunManifest,
                    ValidationError)
from processors.potentials import PartialWaveProblem, load_problem, scale, validate_problem, with_grid
from processors.saito import (build_saito, check_orthogonality, operator_range_defect, redundant_state_check,
                              saito_rank_ratio)
from processors.scattering import detect_positive_energy_bound, phase_curve_k
from processors.spectrum import chain_ledgers, run_levinson, sweep_depth, sweep_lambda, tune_critical_depth
from utils.io import write_csv, write_json, write_wavefunction_file

__version__ = '0.1.0'

# exit codes
EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERIC = 2


def run_parameters() -> Dict[str, Any]:
    """Solver settings in force for this run"""
    return {
        'grid_points': Config.GRID_POINTS,
        'lambda_points': Config.LAMBDA_POINTS,
        'max_theta_step': Config.MAX_THETA_STEP,
        'event_theta_step': Config.EVENT_THETA_STEP,
        'max_refinements': Config.MAX_REFINEMENTS,
        'scan_points': Config.SCAN_POINTS,
        'scan_halvings': Config.SCAN_HALVINGS,
        'k_eval_start': Config.K_EVAL_START,
        'k_eval_stop': Config.K_EVAL_STOP,
        'eta_zero_tolerance': Config.ETA_ZERO_TOLERANCE,
        'critical_tolerance': Config.CRITICAL_TOLERANCE,
        'levinson_tolerance': Config.LEVINSON_TOLERANCE,
        'pebs_defect': Config.PEBS_DEFECT,
        'orthogonality_tolerance': Config.ORTHOGONALITY_TOLERANCE,
        'saito_residual': Config.SAITO_RESIDUAL,
    }


class LevinsonVerifier:
    """Runs one command per call and writes its traces, report and run manifest"""

    def __init__(self, output_dir: Optional[str] = None, threads: int = 1):
        self.output_folder = Path(output_dir or Config.OUTPUT_DIR)
        self.output_folder.mkdir(parents=True, exist_ok=True)
        self.threads = max(1, int(threads))
        logging.info(f"LevinsonVerifier writing to {self.output_folder} with {self.threads} thread(s)")

    def load(self, input_path: str, m: Optional[int] = None, grid_points: Optional[int] = None,
             tune: bool = True) -> PartialWaveProblem:
        problem = load_problem(input_path)
        if m is not None and m != problem.m:
            problem = replace(problem, m=m)
        if grid_points is not None and grid_points != problem.grid.n_points:
            problem = with_grid(problem, grid_points)
        validate_problem(problem)
        if tune and problem.tune_critical:
            problem = tune_critical_depth(problem)
        return problem

    def _run(self, command: str, input_path: str, parameters: Dict[str, Any],
             body: Callable[[List[Path]], Dict[str, Any]]) -> Dict[str, Any]:
        """Shared error handling; the manifest is written last, and only on success"""
        started = datetime.now()
        outputs: List[Path] = []
        try:
            logging.info(f"Starting {command} for {input_path}")
            result = body(outputs)
        except (ProblemSyntaxError, ValidationError, FileNotFoundError, IsADirectoryError) as e:
            logging.error(f"Error reading {input_path}: {e}")
            return {'success': False, 'exit_code': EXIT_INPUT, 'error': str(e)}
        except (LevinsonError, ValueError, ArithmeticError) as e:
            logging.error(f"Error running {command} on {input_path}: {e}")
            return {'success': False, 'exit_code': EXIT_NUMERIC, 'error': str(e)}

        manifest = RunManifest(
            command=command,
            input_path=str(input_path),
            output_dir=str(self.output_folder),
            parameters={**run_parameters(), **parameters, 'threads': self.threads},
            tool_version=__version__,
            started_at=started,
            finished_at=datetime.now(),
            outputs=[path.name for path in outputs],
        )
        manifest_path = write_json(manifest.to_dict(), self.output_folder / f"{Path(input_path).stem}_{command}_manifest.json")
        logging.info(f"{command} complete: {len(outputs)} output(s), manifest {manifest_path.name}")
        result.update(success=True, outputs=[str(path) for path in outputs], manifest=str(manifest_path))
        result.setdefault('exit_code', EXIT_OK)
        return result

    def phase_curve(self, input_path: str, k_min: float, k_max: float, k_points: int,
                    lam: Optional[float] = None, m: Optional[int] = None, grid_points: Optional[int] = None,
                    convention: JumpConvention = JumpConvention.JUMP_BY_PI) -> Dict[str, Any]:
        parameters = {'k_min': k_min, 'k_max': k_max, 'k_points': k_points, 'lambda': lam,
                      'convention': convention.value}

        def body(outputs: List[Path]) -> Dict[str, Any]:
            problem = self.load(input_path, m, grid_points)
            if lam is not None:
                problem = scale(problem, lam)
            if k_points < 1 or k_min <= 0 or k_max < k_min:
                raise ValidationError('k', "k range must satisfy 0 < k_min <= k_max with k_points >= 1")
            k_values = np.linspace(k_min, k_max, k_points) if k_points > 1 else np.array([k_min])
            records = []
            if convention is JumpConvention.JUMP_BY_PI and problem.nonlocal_op is not None and k_points > 1:
                records = detect_positive_energy_bound(problem, np.linspace(k_min ** 2, k_max ** 2, 4 * k_points),
                                                       self.threads)
            curve = phase_curve_k(problem, k_values, convention, records, threads=self.threads)
            stem = Path(input_path).stem
            outputs.append(write_csv(curve.to_frame(), self.output_folder / f"{stem}_phase_curve.csv"))
            return {'curve': curve.to_dict(), 'positive_bound_states': [r.to_dict() for r in records]}

        return self._run('phase-curve', input_path, parameters, body)

    def spectrum(self, input_path: str, m: Optional[int] = None,
                 grid_points: Optional[int] = None) -> Dict[str, Any]:
        def body(outputs: List[Path]) -> Dict[str, Any]:
            problem = self.load(input_path, m, grid_points)
            report, traces = run_levinson(problem, self.threads)
            stem = Path(input_path).stem
            for name, frame in traces.items():
                outputs.append(write_csv(frame, self.output_folder / f"{stem}_{name}.csv"))
            document = {
                'problem': problem.name,
                'r0': problem.r0,
                'grid_points': problem.grid.n_points,
                'depth': problem.depth,
                **report.to_dict(),
            }
            outputs.append(write_json(document, self.output_folder / f"{stem}_spectrum.json"))
            return {'report': document, 'exit_code': EXIT_OK if report.passed else EXIT_NUMERIC}

        return self._run('spectrum', input_path, {'m': m}, body)

    def sweep(self, input_path: str, axis: str = 'lambda', points: Optional[int] = None,
              depth_stop: float = -1.0, m: Optional[int] = None,
              grid_points: Optional[int] = None) -> Dict[str, Any]:
        parameters = {'axis': axis, 'points': points, 'depth_stop': depth_stop}

        def body(outputs: List[Path]) -> Dict[str, Any]:
            problem = self.load(input_path, m, grid_points)
            if axis == 'lambda':
                ledger = sweep_lambda(problem, points=points, threads=self.threads)
            elif axis == 'depth':
                ledger = sweep_depth(problem, problem.depth, depth_stop, points, threads=self.threads)
            elif axis == 'lambda+depth':
                ledger = chain_ledgers(sweep_lambda(problem, points=points, threads=self.threads),
                                       sweep_depth(problem, problem.depth, depth_stop, points, threads=self.threads))
            else:
                raise ValidationError('axis', f"unknown sweep axis {axis!r}")
            stem = Path(input_path).stem
            tag = axis.replace('+', '_')
            outputs.append(write_csv(ledger.to_frame(), self.output_folder / f"{stem}_sweep_{tag}.csv"))
            outputs.append(write_json(ledger.to_dict(), self.output_folder / f"{stem}_sweep_{tag}.json"))
            return {'ledger': ledger.to_dict()}

        return self._run('sweep', input_path, parameters, body)

    def saito(self, input_path: str, level: int = 0, energies: Optional[List[float]] = None,
              grid_points: Optional[int] = None) -> Dict[str, Any]:
        def body(outputs: List[Path]) -> Dict[str, Any]:
            problem = self.load(input_path, grid_points=grid_points)
            sp = build_saito(problem, level, self.threads)
            orthogonality = check_orthogonality(sp, energies, self.threads)
            redundant = redundant_state_check(sp)
            rank_ratio = saito_rank_ratio(sp)
            range_defect = operator_range_defect(sp)
            passed = orthogonality.passed and redundant.passed and rank_ratio < 1e-10 and range_defect < 1e-12
            stem = Path(input_path).stem
            outputs.append(write_wavefunction_file(self.output_folder / f"{stem}_saito_u.dat", sp.base.grid.nodes,
                                                   sp.u, sp.base.r0))
            document = {
                'problem': problem.name,
                'saito': sp.to_dict(),
                'orthogonality': orthogonality.to_dict(),
                'redundant_state': redundant.to_dict(),
                'rank_ratio': rank_ratio,
                'range_defect': range_defect,
                'status': (CheckStatus.PASS if passed else CheckStatus.FAIL).value,
            }
            outputs.append(write_json(document, self.output_folder / f"{stem}_saito.json"))
            return {'report': document, 'exit_code': EXIT_OK if passed else EXIT_NUMERIC}

        return self._run('saito', input_path, {'level': level, 'energies': energies}, body)
