"""Small graph builders shared by the unit tests."""
import numpy as np

from meshsched.net import NetworkGraph


def make_graph(n, links, gain2, **kw):
    """Graph from an explicit power-gain matrix; ``links`` are added in both directions."""
    both = set()
    for i, j in links:
        both.add((i, j))
        both.add((j, i))
    g2 = np.asarray(gain2, dtype=float)
    return NetworkGraph(n_nodes=n, links=frozenset(both), gain=np.sqrt(g2), **kw)


def line(n, g2=0.012, **kw):
    gain2 = np.zeros((n, n))
    for i in range(n - 1):
        gain2[i, i + 1] = gain2[i + 1, i] = g2
    return make_graph(n, [(i, i + 1) for i in range(n - 1)], gain2, **kw)
