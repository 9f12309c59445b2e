"""Single configuration surface: every tunable the deployment reviews lives here."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

from .backends import BackendConfig, BackendMode


def packaged_data_path(name: str) -> Path:
    """Path of a data file shipped inside the package."""
    return Path(str(resources.files("plantquery").joinpath("data", name)))


@dataclass
class AppConfig:
    plant_db_path: str = "data/plant.db"
    audit_db_path: str = "data/audit.db"
    seed: int = 42
    backend_mode: str = "RULES"
    model_name: str = "gpt-4o"
    endpoint_url: str | None = None
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 30.0
    temperature: float = 0.0
    script_path: str | None = None
    r_route: int = 2
    r_func: int = 3
    similarity_threshold: float = 0.8
    registry_path: str | None = None
    examples_path: str | None = None
    cases_path: str | None = None
    main_prompt: str | None = None
    domain_prompts: dict[str, str] = field(default_factory=dict)
    cors_origin: str = "*"
    port: int = 8080

    @classmethod
    def from_file(cls, path: str | Path) -> "AppConfig":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**payload)

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def backend_config(self, mode: str | None = None) -> BackendConfig:
        return BackendConfig(
            mode=BackendMode((mode or self.backend_mode).upper()),
            model_name=self.model_name,
            endpoint_url=self.endpoint_url,
            api_key_env=self.api_key_env,
            timeout=self.timeout,
            temperature=self.temperature,
            script_path=self.script_path,
        )

    def examples_file(self) -> Path:
        return Path(self.examples_path) if self.examples_path else packaged_data_path(
            "examples_index.json"
        )

    def cases_file(self) -> Path:
        return Path(self.cases_path) if self.cases_path else packaged_data_path(
            "golden_cases.jsonl"
        )
