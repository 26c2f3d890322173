"""Agent hyperparameters.  Defaults follow the maze settings reported for the method."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

GAMMA_DEFAULTS = {"td3_std": 0.99, "td3_max": 0.995, "ppo_std": 0.99, "ppo_max": 0.999}
DSP_BETA_DEFAULTS = {"td3": 0.9, "ppo": 0.95}


@dataclass
class _Config:
    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict | None):
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown {cls.__name__} keys: {', '.join(unknown)}")
        return cls(**d)

    def validate(self) -> list[str]:
        errors = []
        if not 0.0 < self.gamma < 1.0:
            errors.append(f"gamma must lie in (0, 1), got {self.gamma}")
        for name in ("lr", "n_envs", "minibatch_size"):
            if getattr(self, name) <= 0:
                errors.append(f"{name} must be positive")
        return errors


@dataclass
class Td3Config(_Config):
    gamma: float = 0.995
    lr: float = 3e-4
    n_envs: int = 16
    policy_update_freq: int = 2
    tau: float = 0.005
    noise_kind: str = "pink_ar1"
    noise_std: float = 0.7
    noise_clip: float = 0.5
    target_noise: float = 0.2
    target_noise_clip: float = 0.5
    initial_steps: int = 25_000
    minibatch_size: int = 256
    buffer_size: int = 1_000_000
    updates_per_step: float = 1.0  # learner updates per vector-environment step
    hidden: tuple = (64, 64)
    grad_clip: float = 10.0

    def validate(self) -> list[str]:
        errors = super().validate()
        if self.noise_kind not in ("gaussian", "pink_ar1"):
            errors.append(f"noise_kind must be gaussian or pink_ar1, got {self.noise_kind!r}")
        if self.noise_std < 0:
            errors.append("noise_std must be non-negative")
        if not 0.0 < self.tau <= 1.0:
            errors.append("tau must lie in (0, 1]")
        return errors


@dataclass
class PpoConfig(_Config):
    gamma: float = 0.999
    lr: float = 3e-4
    n_envs: int = 16
    entropy_weight: float = 5e-2
    value_weight: float = 0.5
    clip: float = 0.2
    gae_lambda: float = 1.0
    rollout_length: int = 2048
    minibatch_size: int = 32
    epochs: int = 10
    hidden: tuple = (64, 64)
    grad_clip: float = 10.0
    normalize_advantages: bool = True
    init_log_std: float = -0.5

    def validate(self) -> list[str]:
        errors = super().validate()
        if self.clip <= 0:
            errors.append("clip must be positive")
        if not 0.0 <= self.gae_lambda <= 1.0:
            errors.append("gae_lambda must lie in [0, 1]")
        if self.epochs <= 0 or self.rollout_length <= 0:
            errors.append("epochs and rollout_length must be positive")
        return errors


@dataclass
class QLearningConfig(_Config):
    gamma: float = 0.99
    lr: float = 0.1
    n_envs: int = 1
    minibatch_size: int = 1
    epsilon: float = 0.1
    target: str = "max_det"  # max_det | cumulative

    def validate(self) -> list[str]:
        errors = super().validate()
        if self.target not in ("max_det", "cumulative"):
            errors.append(f"target must be max_det or cumulative, got {self.target!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            errors.append("epsilon must lie in [0, 1]")
        return errors


def default_config(kind: str):
    """Defaults for an agent kind, with the per-variant discount factor."""
    if kind.startswith("td3"):
        return Td3Config(gamma=GAMMA_DEFAULTS[kind])
    if kind.startswith("ppo"):
        if kind == "ppo_std":
            return PpoConfig(gamma=GAMMA_DEFAULTS[kind], gae_lambda=0.95, rollout_length=1024)
        return PpoConfig(gamma=GAMMA_DEFAULTS[kind])
    if kind == "qlearn_det":
        return QLearningConfig()
    raise ValueError(f"unknown agent kind {kind!r}")
