"""
Конфигурация приложения
"""
import os
from pathlib import Path
from dotenv import load_dotenv

# Загрузить переменные окружения
load_dotenv()

# Базовая директория проекта
BASE_DIR = Path(__file__).parent

# Database Configuration (история запусков sweep)
DATABASE_PATH = os.getenv("DATABASE_PATH", "data/mec_offload.db")
DATABASE_URL = os.getenv("DATABASE_URL", f"sqlite:///{BASE_DIR / DATABASE_PATH}")

# Logging Configuration
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FILE = os.getenv("LOG_FILE", "logs/jcorams.log")

# Куда складывать CSV по умолчанию
RESULTS_DIR = os.getenv("RESULTS_DIR", "results")

# Sweep Configuration
SWEEP_WORKERS = int(os.getenv("SWEEP_WORKERS", "4"))
DEFAULT_REALIZATIONS = int(os.getenv("DEFAULT_REALIZATIONS", "20"))  # desk-scale / CI
FULL_REALIZATIONS = int(os.getenv("FULL_REALIZATIONS", "100"))  # --paper-mode
DEFAULT_SEED = int(os.getenv("DEFAULT_SEED", "2024"))

# Solver Configuration
BISECTION_EPS = float(os.getenv("BISECTION_EPS", "1e-6"))  # Вт
POWER_REFINEMENTS = int(os.getenv("POWER_REFINEMENTS", "1"))  # 1 = два прохода (worst-case + уточнение)

# ============================================
# Параметры сценария по умолчанию (small-cell HetNet)
# ============================================
DEFAULT_M = 9  # число SeNB / MEC серверов
DEFAULT_N = 36  # число мобильных пользователей
DEFAULT_S = 4  # подканалов в соте
DEFAULT_AREA_M = 250.0  # сторона квадрата, м
DEFAULT_BANDWIDTH_HZ = 5e6  # B_s
DEFAULT_NOISE_DBM = -100.0  # n_0 на подканал
DEFAULT_P_MAX_W = 0.1  # 100 мВт
DEFAULT_ALPHA_BITS = 420 * 8e3  # 420 KB
DEFAULT_BETA_CYCLES = 1000e6  # 1000 Мциклов
DEFAULT_F_LOCAL_CHOICES = (0.5e9, 0.8e9, 1.0e9)
DEFAULT_F_SERVER = 4.0e9
DEFAULT_KAPPA = 5e-27
DEFAULT_LAMBDA_T = 0.5
DEFAULT_ZETA = 1.0
DEFAULT_QUOTA = 4
DEFAULT_D_MIN_M = 1.0  # минимальная дистанция пользователь-SeNB
DEFAULT_SHADOWING_DB = 0.0  # 0 = без затенения

# Path-loss: PL(dB) = PATH_LOSS_INTERCEPT_DB - PATH_LOSS_SLOPE_DB * log10(d_km)
PATH_LOSS_INTERCEPT_DB = -140.7
PATH_LOSS_SLOPE_DB = 36.7

# Веса предпочтений в matching
PHI_UA = float(os.getenv("PHI_UA", "8e6"))
EPS_UA = float(os.getenv("EPS_UA", "0.2"))
PHI_CA = float(os.getenv("PHI_CA", "1.0"))
DELTA_CA = float(os.getenv("DELTA_CA", "0.1"))

# Допустимые схемы для сравнения
SCHEMES = ("jcorams", "local", "offload", "hoda", "hjtora")
DEFAULT_SCHEMES = ("jcorams", "local", "offload", "hoda")
