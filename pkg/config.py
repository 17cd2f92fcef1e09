import os
import logging


class Config:
    """Base configuration class"""

    # Radial grid
    GRID_POINTS = int(os.environ.get('LEVINSON_GRID_POINTS', '2000'))
    MIN_GRID_POINTS = 16

    # Lambda continuation
    LAMBDA_POINTS = int(os.environ.get('LEVINSON_LAMBDA_POINTS', '65'))
    MAX_THETA_STEP = float(os.environ.get('LEVINSON_MAX_THETA_STEP', '0.25'))  # rad
    EVENT_THETA_STEP = 0.1  # rad, near crossing events
    MAX_REFINEMENTS = int(os.environ.get('LEVINSON_MAX_REFINEMENTS', '40'))

    # Bound-state scan
    SCAN_POINTS = int(os.environ.get('LEVINSON_SCAN_POINTS', '256'))
    SCAN_HALVINGS = int(os.environ.get('LEVINSON_SCAN_HALVINGS', '20'))
    SCAN_KAPPA_MIN = 1e-4  # times 1/r0
    SHALLOW_KAPPA_FLOOR = 1e-150  # times 1/r0
    ENERGY_TOLERANCE = 1e-10

    # Zero-momentum phase shift
    K_EVAL_START = float(os.environ.get('LEVINSON_K_EVAL_START', '1e-3'))  # times 1/r0
    K_EVAL_STOP = float(os.environ.get('LEVINSON_K_EVAL_STOP', '1e-6'))  # times 1/r0
    ETA_ZERO_TOLERANCE = float(os.environ.get('LEVINSON_ETA_ZERO_TOLERANCE', '0.3'))  # rad

    # Report checks
    CRITICAL_TOLERANCE = float(os.environ.get('LEVINSON_CRITICAL_TOLERANCE', '1e-6'))  # times 1/r0
    LEVINSON_TOLERANCE = float(os.environ.get('LEVINSON_TOLERANCE', '0.05'))  # times pi
    PEBS_DEFECT = float(os.environ.get('LEVINSON_PEBS_DEFECT', '1e-8'))
    PEBS_DETUNING = 1e-2  # relative kernel change for the phase rise
    PEBS_WINDOW = 0.2  # times E0
    KERNEL_RANK_TOLERANCE = 1e-13
    SINGULAR_TOLERANCE = 1e-9

    # Saito construction
    ORTHOGONALITY_TOLERANCE = float(os.environ.get('LEVINSON_ORTHOGONALITY_TOLERANCE', '1e-6'))
    SAITO_RESIDUAL = float(os.environ.get('LEVINSON_SAITO_RESIDUAL', '1e-6'))
    SAITO_DECAY = 1e-12

    # Problem validation
    ORIGIN_TOLERANCE = 1e-6  # times max|V|
    SYMMETRY_TOLERANCE = 1e-12
    NORMALIZATION_TOLERANCE = 1e-10

    # Execution
    THREADS = int(os.environ.get('LEVINSON_THREADS', '1'))
    OUTPUT_DIR = os.environ.get('LEVINSON_OUTPUT_DIR', 'outputs')

    # Logging Configuration
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')
    LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

    @staticmethod
    def setup_logging(level: str = None):
        """Setup application logging"""
        log_level = getattr(logging, (level or Config.LOG_LEVEL).upper(), logging.INFO)

        logging.basicConfig(
            level=log_level,
            format=Config.LOG_FORMAT,
            handlers=[
                logging.StreamHandler(),
                logging.FileHandler('levinson.log') if os.environ.get('LOG_TO_FILE') else logging.NullHandler()
            ]
        )


class FastConfig(Config):
    """Coarse settings for smoke runs"""
    GRID_POINTS = 400
    LAMBDA_POINTS = 33
    SCAN_POINTS = 128


config = {
    'default': Config,
    'fast': FastConfig,
}


def active_config():
    """Configuration selected by LEVINSON_PROFILE"""
    return config.get(os.environ.get('LEVINSON_PROFILE', 'default'), Config)
