"""User scheduling: MDP features, PPO agent and baselines."""
from .baselines import (KINDS, ascend_count, ascend_schedule, fedavg_schedule, greedy_schedule,
                        max_gradient_schedule)
from .mdp import MdpState, build_state, decode_action, queue_length, reward, state_dim
from .ppo import PpoAgent, PpoBuffer, PpoHyper, Transition, gae

__all__ = [
    "KINDS", "MdpState", "PpoAgent", "PpoBuffer", "PpoHyper", "Transition", "ascend_count",
    "ascend_schedule", "build_state", "decode_action", "fedavg_schedule", "gae",
    "greedy_schedule", "max_gradient_schedule", "queue_length", "reward", "state_dim",
]
