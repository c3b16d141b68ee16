from pathlib import Path

# Base paths
BASE_DIR = Path(__file__).resolve().parent.parent
DATA_DIR = BASE_DIR / "data"
RESULTS_DIR = BASE_DIR / "results"
MAP_CACHE_DIR = DATA_DIR / "correlation_maps"

# Ensure common directories exist (safe if already created)
DATA_DIR.mkdir(parents=True, exist_ok=True)

PACKAGE_VERSION = "0.1.0"

# Environment overrides
THREADS_ENV_VAR = "MMW_THREADS"
SLOW_TESTS_ENV_VAR = "MMW_SLOW_TESTS"

# System defaults
DEFAULT_EVM_DB = -25.0  # transmitter EVM, sigma_evm^2 / P_u
DEFAULT_SAMPLING_RATE_GHZ = 2.0
DEFAULT_PDP_DECAY = 0.5
DEFAULT_REALIZATIONS = 30

# Quantization
MAX_ADC_BITS = 12
DEFAULT_GRID_THRESHOLD = 1e-3  # max |delta rho_o| between neighbouring grid points
QUAD_ABS_TOL = 1e-8
LLOYD_TOL = 1e-12
LLOYD_WARMUP_ITERATIONS = 50
LLOYD_MAX_NEWTON_STEPS = 200
RHO_EDGE = 1.0 - 1e-6  # last quadrature point before the rho = 1 endpoint
MAP_CACHE_VERSION = 1

# Channel estimation
DEFAULT_DOPPLER_NORM = 0.01  # f_D * T_sym
SLOT_SYMBOLS = 14
DMRS_SYMBOL = 2
MAX_DMRS_USERS = 4
MSE_SNR_GRID_DB = tuple(float(s) for s in range(-30, 31))
ENSEMBLE_PDP_DRAWS = 256
DIRECT_MSE_MAX_DIM = 4096  # K * L_sym * M above this refuses the materialized form

# Linear algebra tolerances
HERMITIAN_RTOL = 1e-10
PSD_RTOL = 1e-8
RIDGE_SCALE = 1e-12

# Power model, component table in microwatts
P_LO_UW = 22_500
P_LNA_UW = 5_400
P_M_UW = 300
P_H_UW = 3_000
P_LA_UW = 800
P_1_UW = 0
P_PS_UW = 2_000
P_VGA_UW = 2_000
ADC_FOM_UW_PER_GHZ = 15  # P_ADC = FOM * f_s * 2^ENOB

# Output
CSV_FLOAT_FORMAT = "%.9g"
MANIFEST_NAME = "manifest.json"
DISPLAY_REFRESH_SECONDS = 0.5  # refresh interval for the live results view

# Monte-Carlo oracles
MC_BATCH_SIZE = 1 << 16
