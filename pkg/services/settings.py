import os

from pydantic import BaseModel, Field


class Settings(BaseModel):
    """
    Runtime budgets and output locations.
    Values come from the environment (after load_dotenv in main.py); CLI flags override them.
    """

    budget_states: int = Field(100_000, gt=0, description="State budget for machine constructions")
    budget_elements: int = Field(2_000_000, gt=0, description="Cayley ball element budget")
    budget_output: int = Field(2_000_000, gt=0, description="Bounded enumeration output budget")
    budget_search: int = Field(1_000_000, gt=0, description="Configuration budget for relate/image searches")
    report_dir: str = Field("reports", description="Directory for reports and golden files")
    seed: int = Field(0, description="Seed for every sampling step")
    log_level: str = Field("INFO")

    @classmethod
    def from_env(cls) -> "Settings":
        return cls(
            budget_states=int(os.getenv("HYPTABLE_BUDGET_STATES", "100000")),
            budget_elements=int(os.getenv("HYPTABLE_BUDGET_ELEMENTS", "2000000")),
            budget_output=int(os.getenv("HYPTABLE_BUDGET_OUTPUT", "2000000")),
            budget_search=int(os.getenv("HYPTABLE_BUDGET_SEARCH", "1000000")),
            report_dir=os.getenv("HYPTABLE_REPORT_DIR", "reports"),
            seed=int(os.getenv("HYPTABLE_SEED", "0")),
            log_level=os.getenv("LOG_LEVEL", "INFO"),
        )


# Global settings instance
settings = Settings.from_env()
