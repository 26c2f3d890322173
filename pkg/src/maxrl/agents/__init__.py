from .buffer import Batch, ReplayBuffer
from .config import (
    DSP_BETA_DEFAULTS,
    GAMMA_DEFAULTS,
    PpoConfig,
    QLearningConfig,
    Td3Config,
    default_config,
)
from .noise import ExplorationNoise, exploration_noise
from .ppo import PpoAgent, ppo_max_update
from .qlearning import TabularQLearner
from .td3 import Td3Agent, td3_max_update
from .train import AGENT_KINDS, METRIC_COLUMNS, ConfigError, evaluate, train
