from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="KELLYLAB_", env_file=".env", extra="ignore")

    log_level: str = "INFO"
    feasibility_tol: float = Field(1e-12, gt=0)
    property_tol: float = Field(1e-9, gt=0)
    grid_resolution: int = Field(20, ge=1)
    enumeration_limit: int = Field(10**8, ge=1)
    bayes_enumeration_limit: int = Field(10**7, ge=1)
    hedge_action_limit: int = Field(10**5, ge=1)
    output_dir: str = "reports"
    workers: int = Field(4, ge=1)


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()
