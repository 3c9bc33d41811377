from pydantic_settings import BaseSettings
from typing import Optional


class Settings(BaseSettings):
    # Application
    APP_NAME: str = "Mixed Sparsity Pruning Lab"
    APP_VERSION: str = "1.0.0"
    MSP_LOG_LEVEL: str = "INFO"

    # Determinism / parallelism
    MSP_SEED: Optional[int] = None  # overrides --seed when set
    MSP_THREADS: Optional[int] = None  # None -> machine parallelism

    # Data
    MSP_CALIB_SIZE: int = 128
    MSP_FITNESS_BYTES: int = 16384
    MSP_EVAL_CHUNK: int = 4096

    # Search
    MSP_ORACLE_CAP: int = 1_000_000

    class Config:
        env_file = ".env"
        case_sensitive = True


settings = Settings()
