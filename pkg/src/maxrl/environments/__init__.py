from .core import Box, Discrete, Env, MdpEnv, SlipWrapper
from .grid import GridMazeEnv, PointMazeEnv, ReachEnv
from .maze import (
    UNREACHABLE,
    CellRewards,
    MazeLayout,
    RewardKind,
    bfs_distance,
    dsp_reward,
    load_layout,
)
from .tabular import (
    ChainConfig,
    build_bandit,
    build_chain,
    build_three_state,
    chain_optimal_actions,
    chain_optimal_policy,
)


def grid_maze_env(layout, reward_kind, rng, t_max=300):
    return GridMazeEnv(layout, reward_kind, rng, t_max=t_max)


def point_maze_env(layout, reward_kind, rng, dt=0.5, a_max=1.0, v_max=1.0, t_max=300):
    return PointMazeEnv(layout, reward_kind, rng, dt=dt, a_max=a_max, v_max=v_max, t_max=t_max)


def slip_wrapper(env, p_slip, rng):
    return SlipWrapper(env, p_slip, rng)
