from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .exceptions import UsageError
from .pipeline import SCENARIO_PARAMS


@dataclass
class RunConfig:
    """Everything one pipeline run needs. ``None`` hyperparameters fall back
    to the scenario's published TM settings."""

    scenario: str = "S1"
    data_root: str | None = None
    train_files: list = field(default_factory=list)
    test_files: list = field(default_factory=list)
    clauses: int | None = None
    T: int | None = None
    s: float | None = None
    epochs: int | None = None
    n_bins: int = 5
    states_per_action: int = 128
    clause_budget: str = "per_class"
    smote: bool = True
    smote_k: int = 5
    seed: int = 42
    subsample: float | None = None
    average: str = "macro"
    folds: int = 5
    output_dir: str = "runs/out"
    threads: int = 1

    @classmethod
    def from_yaml(cls, path):
        data = yaml.safe_load(Path(path).read_text()) or {}
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {unknown}")
        return cls(**data)

    def to_yaml(self):
        return yaml.safe_dump(asdict(self), sort_keys=False)

    def with_overrides(self, **kw):
        data = asdict(self)
        data.update({k: v for k, v in kw.items() if v is not None})
        return RunConfig.from_dict(data)

    def resolved(self):
        """Copy with scenario defaults filled in, after range checks."""
        defaults = SCENARIO_PARAMS.get(self.scenario, SCENARIO_PARAMS["S1"])
        cfg = self.with_overrides()
        cfg.clauses = cfg.clauses if cfg.clauses is not None else defaults["n_clauses"]
        cfg.T = cfg.T if cfg.T is not None else defaults["T"]
        cfg.s = cfg.s if cfg.s is not None else defaults["s"]
        cfg.epochs = cfg.epochs if cfg.epochs is not None else defaults["epochs"]
        cfg.validate()
        return cfg

    def validate(self):
        checks = [
            (self.clauses is None or (self.clauses >= 2 and self.clauses % 2 == 0), "clauses must be an even integer >= 2"),
            (self.T is None or self.T >= 1, "T must be >= 1"),
            (self.s is None or self.s > 1, "s must be > 1"),
            (self.epochs is None or self.epochs >= 0, "epochs must be >= 0"),
            (self.n_bins >= 2, "n_bins must be >= 2"),
            (1 <= self.states_per_action <= 128, "states_per_action must be in [1, 128]"),
            (self.clause_budget in ("per_class", "total"), "clause_budget must be per_class or total"),
            (self.smote_k >= 1, "smote_k must be >= 1"),
            (self.subsample is None or 0 < self.subsample <= 1, "subsample must be in (0, 1]"),
            (self.average in ("macro", "weighted"), "average must be macro or weighted"),
            (self.folds >= 2, "folds must be >= 2"),
            (self.threads >= 1, "threads must be >= 1"),
            (0 <= self.seed < 2**64, "seed must be a 64-bit unsigned integer"),
        ]
        for ok, msg in checks:
            if not ok:
                raise UsageError(msg)
        return self

    def tm_params(self):
        return {
            "n_clauses": self.clauses,
            "T": self.T,
            "s": float(self.s),
            "epochs": self.epochs,
            "states_per_action": self.states_per_action,
            "clause_budget": self.clause_budget,
            "random_state": self.seed,
        }
