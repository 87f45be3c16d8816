"""
Configuration par défaut du simulateur. Les fichiers de run (voir run.example.cfg)
et les options de main.py surchargent ces valeurs.
"""

# ============================================================
# Modèle - dimensions et échelle spectrale
# ============================================================
DEFAULT_LAMBDA = 1.0
DEFAULT_N_DIM = 400
DEFAULT_K_TRANS = 3
DEFAULT_N_CHANNELS = 25
# x = pi * v^2 / lambda ; x = 1 -> couplage parfait (T = 1)
DEFAULT_COUPLING_X = 1.0

# ============================================================
# Presets (cas isolé / recouvrement)
# ============================================================
DEFAULT_PRESET = "isolated"
PRESETS = ("isolated", "overlapping", "custom")
# V = 0.1 lambda, profil (1, 1/2, 1/4, ...) pour des largeurs anisotropes
PRESET_SV_SCALE = 0.1
PRESET_SV_DECAY = 0.5
# espacement des valeurs propres de H_tr en unités de gamma_typ
PRESET_SPACING = {"isolated": 10.0, "overlapping": 0.5}

# ============================================================
# Ensemble Monte Carlo
# ============================================================
DEFAULT_REALIZATIONS = 200
DEFAULT_SEED = 42
DEFAULT_ENERGY_MIN = -0.2
DEFAULT_ENERGY_MAX = 0.2
DEFAULT_ENERGY_POINTS = 41
DEFAULT_RESAMPLE_FRAMES = True
DEFAULT_WORKERS = 1
MAX_SKIPPED_FRACTION = 0.01

# ============================================================
# Tolérances numériques
# ============================================================
GRAM_TOL = 1e-12
UNITARITY_TOL = 1e-10
SOLVE_RESIDUAL_TOL = 1e-8
DECOMPOSITION_TOL = 1e-10
DEGENERACY_TOL = 1e-8
DEFECTIVE_TOL = 1e-8
ORTHOGONALITY_TOL = 1e-8
CONDITION_WARNING = 1e6
CHANNEL_RETRIES = 3
# seuils "petit devant lambda" / "près du centre de bande"
SV_WARNING_RATIO = 0.5
HTR_WARNING_RATIO = 0.5
ENERGY_GRID_LIMIT = 0.5

# ============================================================
# Portes de validation (checks)
# ============================================================
VANISHING_RATIO_MAX = 0.05
FACTORIZATION_REL_TOL = 0.10
GREEN_CENTER_TOL = 0.05
CORRELATOR_REL_TOL = 0.10
CONFRONTATION_REL_TOL = 0.15
CONFRONTATION_SIGMAS = 3.0
# sum_c X_c,mm = -2 Im (O^T G O)_mm -> 2/lambda : facteur 2 sur X, 4 sur P_ab (voir DESIGN.md)
CORRELATOR_FLUX_FACTOR = 2.0
# nombre de réalisations de la suite d'exactitude (--check-only)
EXACTNESS_REALIZATIONS = 20
EXACTNESS_N_DIM = 60
EXACTNESS_CHANNELS = 8

# ============================================================
# Sorties
# ============================================================
DEFAULT_OUTPUT_DIR = "output"
DEFAULT_FORMATS = ("csv", "json")
CSV_FILENAME = "transmission.csv"
JSON_FILENAME = "transmission.json"
FAILURES_FILENAME = "failures.json"
FLOAT_FORMAT = "%.17g"
