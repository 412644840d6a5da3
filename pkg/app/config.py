"""
Configuration module for loading environment variables from .env file
"""
from typing import Optional

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Application settings loaded from environment variables"""

    # Application Settings
    APP_NAME: str = "hybrid-fchc"
    APP_VERSION: str = "0.1.0"
    DEBUG: bool = False
    ENVIRONMENT: str = "development"
    LOG_LEVEL: str = "INFO"
    SCHEMA_VERSION: str = "1.0"

    # Server Configuration
    HOST: str = "0.0.0.0"
    PORT: int = 8000
    API_V1_PREFIX: str = "/api/v1"

    # Solver limits
    HYBRID_FCHC_ORACLE_LIMIT: int = 20  # largest n the brute-force oracle accepts
    EXHAUSTIVE_SEARCH_LIMIT: int = 20  # largest r enumerated exhaustively
    GATE_LEVEL_MAX_CELLS: int = 64  # larger encodings run as opaque programs
    RANDOM_CUBIC_MAX_RETRIES: int = 1000
    DEFAULT_THREADS: int = 1
    DEFAULT_SAMPLE_TRIALS: int = 4096

    # Model constants
    GAMMA_CLASSICAL: float = 1.0 / 3.0
    GAMMA_QUANTUM: float = 0.25
    CALIBRATION_COVERAGE: float = 0.99

    # Qubit cost model; SPACE_MODEL_FILE (written by analyze --save-model) wins over the constants
    SPACE_MODEL_FILE: Optional[str] = None
    SPACE_MODEL_A: float = 12.0
    SPACE_MODEL_B: float = 48.0
    SPACE_MODEL_LOG: float = 0.0

    # Ancilla bound constants: peak <= ALPHA * (asymptotic term) + BETA
    UNION_ANCILLA_ALPHA: float = 16.0
    UNION_ANCILLA_BETA: float = 32.0
    EFF_CONTAINS_ANCILLA_ALPHA: float = 8.0
    EFF_CONTAINS_ANCILLA_BETA: float = 16.0
    SETGEN_ANCILLA_ALPHA: float = 16.0
    SETGEN_ANCILLA_BETA: float = 64.0

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = True
        extra = "ignore"  # Ignore extra fields in .env file


# Global settings instance
settings = Settings()
