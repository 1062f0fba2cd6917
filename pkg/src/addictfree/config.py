"""Service configuration, loaded from the JSON file named by the
ADDICTFREE_CONFIG environment variable (or a --config flag).

Schema (all keys optional, defaults below):

    {
      "listen_address": "127.0.0.1:8080",
      "store_path": "addictfree.db",
      "prediction_threshold": 0.5,
      "predictor": {"learning_rate": 0.05, "epochs": 200, "seed": 0,
                    "gradient_clip": 5.0, "window_hours": 720,
                    "hidden_size": 16},
      "poi_csv_path": null,
      "log_level": "INFO",
      "operator_token": "change-me"
    }
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .lstm import TrainConfig

CONFIG_ENV_VAR = "ADDICTFREE_CONFIG"


@dataclass
class ServiceConfig:
    listen_address: str = "127.0.0.1:8080"
    store_path: str = "addictfree.db"
    prediction_threshold: float = 0.5
    predictor: TrainConfig = field(default_factory=TrainConfig)
    poi_csv_path: Optional[str] = None
    log_level: str = "INFO"
    operator_token: str = "change-me"

    def __post_init__(self):
        if not (0.0 < self.prediction_threshold < 1.0):
            raise ValueError("prediction_threshold must be in (0, 1)")

    @property
    def host(self) -> str:
        return self.listen_address.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen_address.rsplit(":", 1)[1])

    def to_dict(self) -> dict:
        return {
            "listen_address": self.listen_address,
            "store_path": self.store_path,
            "prediction_threshold": self.prediction_threshold,
            "predictor": self.predictor.to_dict(),
            "poi_csv_path": self.poi_csv_path,
            "log_level": self.log_level,
            "operator_token": self.operator_token,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ServiceConfig":
        d = dict(d)
        if "predictor" in d and d["predictor"] is not None:
            d["predictor"] = TrainConfig.from_dict(d["predictor"])
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


def load_config(path: Union[str, Path, None] = None) -> ServiceConfig:
    """Read the config file from `path`, falling back to ADDICTFREE_CONFIG;
    with neither set, defaults apply."""
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
    if path is None:
        return ServiceConfig()
    return ServiceConfig.from_dict(json.loads(Path(path).read_text()))
