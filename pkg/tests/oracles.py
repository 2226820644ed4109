"""Independent reference computations shared by unit and acceptance tests."""

from __future__ import annotations

import numpy as np

from edgesense.energy import (LinkSelection, SlotTraffic, comp_energy, hub_paths, sensing_energy,
                              tran1_energy, tran2_energy, tran3_energy)
from edgesense.marl.approx import Approximator
from edgesense.marl.objectives import softmax3
from edgesense.marl.train import _log_probs, actor_gradient, critic_gradient
from edgesense.netmodel import AreaGrid, Topology, covered_cells

from conftest import make_device, make_sensor, mesh_servers


def random_micro(rng: np.random.Generator) -> Topology:
    """A few sensors, devices and servers on a small grid with random links."""
    n_srv = int(rng.integers(1, 4))
    n_dev = int(rng.integers(1, 4))
    n_sen = int(rng.integers(1, 6))
    w = float(rng.integers(8, 25))
    grid = AreaGrid(w, w)
    servers = mesh_servers(n_srv, rate=float(rng.uniform(1e3, 1e6)), power=float(rng.uniform(0.1, 5)))
    devices = []
    for n in range(n_dev):
        k = int(rng.integers(1, n_srv + 1))
        chosen = rng.permutation(n_srv)[:k]
        links = tuple((int(j), float(rng.uniform(1e3, 1e5)), float(rng.uniform(0.1, 2))) for j in chosen)
        devices.append(make_device(n, pos=tuple(rng.uniform(0, w, 2)), links=links,
                                   k=float(rng.uniform(1e-22, 1e-20)), f=float(rng.uniform(1e7, 1e9))))
    sensors = []
    for i in range(n_sen):
        adj = bool(rng.random() < 0.7)
        r_max = float(rng.uniform(1, w / 2))
        sensors.append(make_sensor(i, pos=tuple(rng.uniform(0, w, 2)), r_max=r_max, adjustable=adj,
                                   owner=int(rng.integers(n_dev)), a=float(rng.uniform(0, 0.05)),
                                   b=float(rng.uniform(0, 0.002)), U=float(rng.uniform(1, 6)),
                                   bpc=float(rng.integers(1, 200)), B1=float(rng.uniform(1e3, 1e5)),
                                   P1=float(rng.uniform(0.05, 1)),
                                   l1=float(rng.uniform(0.1, 0.9)) * r_max))
    return Topology(tuple(sensors), tuple(devices), servers, grid, coverage_target=0.0,
                    hub=int(rng.integers(n_srv)))


def random_slot(top: Topology, rng: np.random.Generator):
    """Random alive flags, radii, per-datum link choice and leg byte counts."""
    alive = rng.random(len(top.devices)) < 0.8
    radii = rng.uniform(0, 1, len(top.sensors)) * top.r_max
    dest = np.array([
        -1 if rng.random() < 0.15 else
        int(top.devices[s.owner_device].server_links[rng.integers(len(top.devices[s.owner_device].server_links))].server)
        for s in top.sensors], dtype=np.int64)
    selection = LinkSelection(dest, hub_paths(top))
    sensed = np.array([s.bytes_per_cell * len(covered_cells(s, r, top.grid))
                       for s, r in zip(top.sensors, radii)], dtype=float)
    formatted = sensed * rng.uniform(0.5, 1.0, len(sensed))
    sent = np.where(dest >= 0, formatted * rng.uniform(0.5, 1.2, len(sensed)), 0.0)
    forwarded = rng.uniform(0, 5e4, len(top.servers)) * (rng.random(len(top.servers)) < 0.7)
    offloaded = rng.random(len(sensed)) < 0.2
    traffic = SlotTraffic(sensed, formatted, sent, forwarded, offloaded)
    return alive, radii, selection, traffic


def naive_ledger(top: Topology, alive, radii, selection: LinkSelection, slot_s: float,
                 traffic: SlotTraffic) -> tuple[float, float, float, float, float]:
    """Sum each term sensor by sensor with the scalar operations."""
    sensing = tran1 = comp = tran2 = tran3 = 0.0
    for s, r in zip(top.sensors, radii):
        if not alive[s.owner_device]:
            continue
        d = top.devices[s.owner_device]
        sensing += sensing_energy(s, float(r), slot_s)
        tran1 += tran1_energy(s, float(traffic.sensed[s.id]))
        comp += comp_energy(float(traffic.formatted[s.id]), d.compute_freq_f, d.energy_factor_k)
        j = selection.server_of(s.id)
        tran2 += tran2_energy(d, j, float(traffic.sent[s.id]), slot_s)
    for j, nbytes in enumerate(traffic.forwarded):
        tran3 += tran3_energy(selection.server_to_hub[j], float(nbytes), top.servers)
    return sensing, tran1, comp, tran2, tran3


def brute_counts(topology, radii, alive):
    """Per-cell cover counts by a plain scan over cells and sensors."""
    g = topology.grid
    counts = []
    for iy in range(g.ny):
        for ix in range(g.nx):
            cx, cy = (ix + 0.5) / g.resolution, (iy + 0.5) / g.resolution
            c = 0
            for s, r in zip(topology.sensors, radii):
                if not alive[s.owner_device] or r <= 0:
                    continue
                dx, dy = cx - s.position[0], cy - s.position[1]
                if dx * dx + dy * dy <= r * r:
                    c += 1
            counts.append(c)
    return counts


def brute_fraction_and_dup(topology, radii, alive):
    counts = brute_counts(topology, radii, alive)
    total = sum(counts)
    union = sum(1 for c in counts if c)
    return union / len(counts), (0.0 if total == 0 else (total - union) / total)


# -- gradient checks --------------------------------------------------------------

def _fd(loss_of, theta: np.ndarray, h: float = 1e-5) -> np.ndarray:
    g = np.zeros_like(theta)
    for i in range(theta.size):
        up, dn = theta.copy(), theta.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (loss_of(up) - loss_of(dn)) / (2 * h)
    return g


def grad_mismatch(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """Largest per-entry error relative to the entry's magnitude (absolute below ``floor``)."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor / 1e-4)
    return float(np.max(np.abs(analytic - numeric) / scale)) if analytic.size else 0.0


def _random_net(rng, n_in, n_out):
    depth = int(rng.integers(1, 4))
    sizes = [n_in] + [int(rng.integers(2, 7)) for _ in range(depth - 1)] + [n_out]
    net = Approximator.init(sizes, rng)
    net.set_flat(net.flat() + rng.normal(0, 0.1, net.n_params))
    return net


def gradient_instance(rng, kind: str) -> float:
    """Build one random approximator/loss pairing and return its gradient mismatch."""
    n_in = int(rng.integers(1, 6))
    batch = int(rng.integers(1, 6))
    x = rng.normal(size=(batch, n_in))
    if kind == "upstream":
        net = _random_net(rng, n_in, int(rng.integers(1, 5)))
        up = rng.normal(size=(batch, net.n_out))
        _, cache = net.forward_cache(x)
        analytic = Approximator.flat_grads(*net.backward(cache, up))

        def loss_of(theta):
            tmp = net.copy()
            tmp.set_flat(theta)
            return float((tmp.forward(x) * up).sum())
    elif kind == "critic":
        net = _random_net(rng, n_in, int(rng.integers(1, 4)))
        targets = rng.normal(size=(batch, net.n_out)) * 2
        _, analytic = critic_gradient(net, x, targets)

        def loss_of(theta):
            tmp = net.copy()
            tmp.set_flat(theta)
            return critic_gradient(tmp, x, targets)[0]
    elif kind == "actor":
        n_sensors = int(rng.integers(1, 4))
        net = _random_net(rng, n_in, 3 * n_sensors)
        idx = rng.integers(0, 3, size=(batch, n_sensors))
        mask = rng.random((batch, n_sensors)) < 0.8
        eps = float(rng.uniform(0.1, 0.3))
        adv = rng.normal(size=batch)
        # keep every ratio well away from the clip kinks so differences stay on one branch
        band = rng.integers(0, 3, size=batch)
        lo = np.array([0.3, 1 - eps + 0.03, 1 + eps + 0.03])[band]
        hi = np.array([1 - eps - 0.03, 1 + eps - 0.03, 2.0])[band]
        ratio = rng.uniform(lo, hi)
        logp = _log_probs(softmax3(net.forward(x)), idx, mask)
        logp_old = logp - np.log(ratio)
        ent = float(rng.choice([0.0, 0.01]))
        _, analytic = actor_gradient(net, x, idx, mask, logp_old, adv, eps, ent)

        def loss_of(theta):
            tmp = net.copy()
            tmp.set_flat(theta)
            return actor_gradient(tmp, x, idx, mask, logp_old, adv, eps, ent)[0]
    else:
        raise ValueError(kind)
    return grad_mismatch(analytic, _fd(loss_of, net.flat()))


def naive_gae(rewards, values, gamma, lam) -> np.ndarray:
    """Direct double sum of discounted TD errors."""
    T = len(rewards)
    delta = [rewards[t] + gamma * values[t + 1] - values[t] for t in range(T)]
    return np.array([sum((gamma * lam) ** (l - t) * delta[l] for l in range(t, T)) for t in range(T)])
