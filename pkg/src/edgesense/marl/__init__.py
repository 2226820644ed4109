"""Learning core: networks, objectives and per-server agents.

The trainer and environment live in :mod:`edgesense.marl.train` and
:mod:`edgesense.marl.env`; they import the simulator, so they are not
loaded here.
"""

from ..config import Hyperparams
from .agents import AgentLayout, policy_distribution, weak_agent_gate
from .approx import Approximator
from .objectives import actor_loss, critic_loss, gae, returns, reward, softmax3

__all__ = [
    "AgentLayout", "Approximator", "Hyperparams", "actor_loss", "critic_loss", "gae",
    "policy_distribution", "returns", "reward", "softmax3", "weak_agent_gate",
]
