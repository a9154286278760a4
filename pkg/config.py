# Runtime configuration for the zeroth-order simulator
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Execution
THREADS = int(os.getenv('ZONE_THREADS', '1'))
OUTPUT_DIR = os.getenv('ZONE_OUTPUT_DIR', 'results')

# Logging Configuration
LOG_LEVEL = os.getenv('ZONE_LOG_LEVEL', 'INFO')
LOG_TO_FILE = os.getenv('ZONE_LOG_TO_FILE', 'false').lower() == 'true'
LOG_DIR = os.getenv('ZONE_LOG_DIR', 'logs')

# Numerical guards
DIVERGENCE_LIMIT = float(os.getenv('ZONE_DIVERGENCE_LIMIT', '1e8'))
RGG_RETRY_CAP = int(os.getenv('ZONE_RGG_RETRY_CAP', '1000'))

# Experiment defaults
ASSUMPTION_DELTA = float(os.getenv('ZONE_ASSUMPTION_DELTA', '1e-3'))  # delta of the lower-boundedness assumption
DEFAULT_TRIALS = int(os.getenv('ZONE_DEFAULT_TRIALS', '20'))
DEFAULT_NOISE_STD = float(os.getenv('ZONE_DEFAULT_NOISE_STD', '0.01'))
DEFAULT_RADIUS = float(os.getenv('ZONE_DEFAULT_RADIUS', '0.6'))
DEFAULT_STRIDE = int(os.getenv('ZONE_DEFAULT_STRIDE', '10'))

# Margin applied on top of strict theoretical lower bounds (c and rho)
THEORY_MARGIN = float(os.getenv('ZONE_THEORY_MARGIN', '1.01'))

# Test gating
RUN_SLOW = os.getenv('ZONE_RUN_SLOW', 'false').lower() == 'true'
