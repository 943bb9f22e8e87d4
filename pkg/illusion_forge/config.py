import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()


class Settings:
    # Worker pool size for generation and sweeps (the CLI --jobs default)
    THREADS: int = max(1, int(os.getenv("ILLUSION_FORGE_THREADS", "1")))

    # Root directory for command outputs when no --out is given
    OUT_DIR: str = os.getenv("ILLUSION_FORGE_OUT", "runs")

    # Logging
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO").upper()
    LOG_DIR: str = os.getenv("LOG_DIR", "logs")
    LOG_USE_UTC: bool = os.getenv("LOG_USE_UTC", "false").lower() == "true"
    DEBUG: bool = os.getenv("DEBUG", "False").lower() == "true"

    # Canvas geometry shared by every generator
    CANVAS_SIZE: int = 224
    CANVAS_MARGIN: float = 8.0
    SUPERSAMPLE: int = 4

    # Permutation test resolution (p-values are floored at 1/N)
    PERMUTATIONS: int = int(os.getenv("ILLUSION_FORGE_PERMUTATIONS", "100000"))

    @property
    def out_path(self) -> Path:
        return Path(self.OUT_DIR)


settings = Settings()
