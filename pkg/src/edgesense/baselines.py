"""Per-slot policies: the learned one and the three comparison methods.

All policies share one interface (``reset`` then ``decide`` each slot) and
only differ in the decision they hand to the simulator, so topology and
energy code paths are identical across them.

* ``senses``: learned radius control plus staged transmission of fixed sensors.
* ``senses-re``: same learned control, but fixed sensors send everything.
* ``comp``: radii at r_max, duplicates removed by hashing at the edge tier.
* ``load``: radii at r_max, formatting offloaded to the server for devices
  whose SoC drops below a threshold.
"""

from __future__ import annotations

import numpy as np

from .errors import MissingParams
from .marl.env import MarlEnv
from .marl.objectives import softmax3
from .marl.train import PolicyParams
from .sim import Decision, EdgeSim, SimState

KINDS = ("senses", "senses-re", "comp", "load")


class Policy:
    kind = "base"

    def reset(self, sim: EdgeSim, seed: int = 0) -> None:
        self.sim = sim

    def decide(self, sim: EdgeSim, state: SimState) -> Decision:
        raise NotImplementedError


def comp_step(sim: EdgeSim, state: SimState) -> Decision:
    return Decision(actions=np.zeros(sim.n_sensors, dtype=np.int64), selection=sim.selection,
                    dedup="hash")


def load_step(sim: EdgeSim, state: SimState) -> Decision:
    offload = offload_mask(state.soc, sim.config.baselines.offload_soc) & state.alive
    return Decision(actions=np.zeros(sim.n_sensors, dtype=np.int64), selection=sim.selection,
                    dedup="none", offload=offload)


def offload_mask(soc, threshold: float) -> np.ndarray:
    return np.asarray(soc, dtype=float) < threshold


class CompPolicy(Policy):
    kind = "comp"

    def decide(self, sim, state):
        return comp_step(sim, state)


class LoadPolicy(Policy):
    kind = "load"

    def decide(self, sim, state):
        return load_step(sim, state)


class SensesPolicy(Policy):
    """Deploys trained actors: each agent picks its most likely action per sensor.

    ``staged=False`` gives the senses-re variant.
    """

    kind = "senses"

    def __init__(self, params: PolicyParams | None, staged: bool = True, greedy: bool = True):
        if params is None:
            raise MissingParams("the learned policy needs trained parameters")
        self.params = params
        self.staged = staged
        self.greedy = greedy
        self.kind = "senses" if staged else "senses-re"
        self.env: MarlEnv | None = None

    def reset(self, sim, seed: int = 0):
        super().reset(sim, seed)
        self.env = MarlEnv(sim, horizon=sim.config.episode_len, staged=self.staged)
        n_ctrl = [v.n_actions for v in self.env.layout.views]
        n_out = [0 if a is None else a.n_out // 3 for a in self.params.actors]
        if n_ctrl != n_out:
            raise MissingParams(f"parameters control {n_out} sensors per agent, topology needs {n_ctrl}")
        self.rng = np.random.default_rng(seed)

    def decide(self, sim, state):
        env = self.env
        obs = env.observations(state)
        gates = env.gates(state)
        idx_list = []
        for actor, o, gate in zip(self.params.actors, obs, gates):
            if actor is None:
                idx_list.append(np.zeros(0, dtype=np.int64))
                continue
            probs = softmax3(actor.forward(o))
            if self.greedy:
                idx = probs.argmax(axis=1)
            else:
                cdf = np.cumsum(probs, axis=1)
                idx = np.minimum((self.rng.random(len(probs))[:, None] > cdf).sum(axis=1), 2)
            idx[~gate] = 1
            idx_list.append(idx)
        return env.decision(idx_list)


def senses_re_step(sim: EdgeSim, state: SimState, trained_params: PolicyParams) -> Decision:
    policy = SensesPolicy(trained_params, staged=False)
    policy.reset(sim)
    return policy.decide(sim, state)


def make_policy(kind: str, params: PolicyParams | None = None) -> Policy:
    if kind == "senses":
        return SensesPolicy(params, staged=True)
    if kind == "senses-re":
        return SensesPolicy(params, staged=False)
    if kind == "comp":
        return CompPolicy()
    if kind == "load":
        return LoadPolicy()
    raise ValueError(f"unknown policy kind {kind!r}; expected one of {KINDS}")
