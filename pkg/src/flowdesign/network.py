"""Topology handling and the linear measurement model.

A network is a set of routers (nodes) and directed edges. Every directed
edge is an observation point (OP): the incoming interface of its head
router, where packets can be sampled. Flows are origin/destination pairs
routed on shortest paths; a flow crossing an OP contributes one raw
measurement per period, and stacking all (OP, flow) incidences gives the
linear model

    z = L x + noise,   Cov = D(xi)^-1 on the diagonal,

with L a 0/1 matrix having one 1 per row. Because distinct flows never
share a measurement row, L'D^-1 L is diagonal and the per-flow
information is simply m = J xi with J[i, k] = 1/mu_i when flow i crosses
OP k. Budget rows R xi <= b cap the total sampling rate per router.

Observation points are numbered 1..n_o in files and op_id columns;
arrays here are 0-indexed.
"""

from __future__ import annotations

import csv
import os
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .model import DesignProblem, FlowDesignError, FlowModel, ValidationError


class RoutingError(FlowDesignError):
    """A flow cannot be routed on the given topology."""


@dataclass(frozen=True)
class Flow:
    origin: str
    destination: str
    sigma2: float
    mu: float
    path: tuple | None = None  # explicit node sequence, overrides routing


@dataclass(frozen=True)
class TopologySpec:
    """Declarative network description.

    nodes: router ids (unique, no commas so the CSV bundle stays trivial)
    edges: directed (u, v) pairs; edge index = observation point index
    flows: Flow records
    budgets: router id -> per-router sampling budget b_j >= 0
    """

    nodes: tuple
    edges: tuple
    flows: tuple
    budgets: dict

    def __post_init__(self):
        nodes = tuple(str(n) for n in self.nodes)
        if not nodes:
            raise ValidationError("topology needs at least one node")
        if len(set(nodes)) != len(nodes):
            raise ValidationError("duplicate node ids")
        for n in nodes:
            if not n or any(ch in n for ch in ",\n\r") or n != n.strip():
                raise ValidationError(f"bad node id {n!r}")
        known = set(nodes)
        edges = tuple((str(u), str(v)) for u, v in self.edges)
        seen = set()
        for u, v in edges:
            if u not in known or v not in known:
                raise ValidationError(f"edge ({u}, {v}) references unknown node")
            if u == v:
                raise ValidationError(f"self-loop edge at {u}")
            if (u, v) in seen:
                raise ValidationError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
        flows = []
        for idx, f in enumerate(self.flows):
            if f.origin not in known or f.destination not in known:
                raise ValidationError(
                    f"flow {idx} ({f.origin}->{f.destination}) references unknown node")
            if not (np.isfinite(f.sigma2) and f.sigma2 > 0):
                raise ValidationError(f"flow {idx}: sigma2 must be finite and > 0")
            if not (np.isfinite(f.mu) and f.mu > 0):
                raise ValidationError(f"flow {idx}: mu must be finite and > 0")
            path = None if f.path is None else tuple(str(n) for n in f.path)
            flows.append(replace(f, origin=str(f.origin),
                                 destination=str(f.destination), path=path))
        budgets = {str(k): float(v) for k, v in self.budgets.items()}
        missing = known - set(budgets)
        if missing:
            raise ValidationError(f"budgets missing for nodes {sorted(missing)}")
        extra = set(budgets) - known
        if extra:
            raise ValidationError(f"budgets for unknown nodes {sorted(extra)}")
        for k, v in budgets.items():
            if not (np.isfinite(v) and v >= 0):
                raise ValidationError(f"budget for {k} must be finite and >= 0")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "flows", tuple(flows))
        object.__setattr__(self, "budgets", budgets)

    @property
    def n_v(self) -> int:
        return len(self.nodes)

    @property
    def n_o(self) -> int:
        return len(self.edges)

    @property
    def n_r(self) -> int:
        return len(self.flows)


def _adjacency(edges):
    fwd: dict = {}
    rev: dict = {}
    for u, v in edges:
        fwd.setdefault(u, set()).add(v)
        rev.setdefault(v, set()).add(u)
    return fwd, rev


def _shortest_path(fwd, rev, origin: str, dest: str):
    """Hop-count shortest path, lexicographically smallest node sequence.

    BFS from the destination over reversed edges gives remaining
    distances; walking forward and always taking the smallest next node
    that still lies on some shortest path yields the lexicographic
    minimum among all shortest paths.
    """
    if origin == dest:
        return (origin,)
    dist = {dest: 0}
    queue = deque([dest])
    while queue:
        cur = queue.popleft()
        for prev in rev.get(cur, ()):
            if prev not in dist:
                dist[prev] = dist[cur] + 1
                queue.append(prev)
    if origin not in dist:
        return None
    path = [origin]
    cur = origin
    while cur != dest:
        step = dist[cur] - 1
        cur = min(nb for nb in fwd.get(cur, ()) if dist.get(nb, -1) == step)
        path.append(cur)
    return tuple(path)


def route_flows(t: TopologySpec):
    """Paths (node tuples) per flow, honoring explicit Flow.path overrides."""
    fwd, rev = _adjacency(t.edges)
    edge_set = set(t.edges)
    paths = []
    for idx, f in enumerate(t.flows):
        if f.path is not None:
            p = f.path
            if len(p) < 1 or p[0] != f.origin or p[-1] != f.destination:
                raise RoutingError(
                    f"flow {idx} ({f.origin}->{f.destination}): explicit path "
                    "endpoints do not match")
            if len(set(p)) != len(p):
                raise RoutingError(f"flow {idx}: explicit path revisits a node")
            for a, b in zip(p, p[1:]):
                if (a, b) not in edge_set:
                    raise RoutingError(
                        f"flow {idx}: explicit path uses missing edge ({a}, {b})")
            paths.append(p)
            continue
        p = _shortest_path(fwd, rev, f.origin, f.destination)
        if p is None:
            raise RoutingError(
                f"flow {idx} ({f.origin}->{f.destination}) is unreachable")
        paths.append(p)
    return tuple(paths)


@dataclass(frozen=True)
class MeasurementModel:
    """Assembled linear model for one topology and routing.

    Measurements are ordered flow-major: all OPs along flow 0's path,
    then flow 1's, and so on. ``psi_diag[k]`` holds the diagonal of
    Psi_k, so the sampling covariance inverse is
    D(xi)^-1 = diag(psi_diag.T @ xi).
    """

    spec: TopologySpec
    paths: tuple           # node tuples per flow
    flow_ops: tuple        # OP index tuples per flow
    L: np.ndarray          # (n_g, n_r) one-hot rows
    l_of: np.ndarray       # (n_g,) measurement -> flow index
    k_of: np.ndarray       # (n_g,) measurement -> OP index
    psi_diag: np.ndarray   # (n_o, n_g)
    J: np.ndarray          # (n_r, n_o)
    R: np.ndarray          # (n_v, n_o) budget rows, R[j,k]=1 iff router j owns OP k
    b: np.ndarray          # (n_v,)
    owner: np.ndarray      # (n_o,) OP -> router index
    traversal: np.ndarray  # (n_v, n_o) bool, owned and carrying >= 1 flow
    mu: np.ndarray
    sigma2: np.ndarray

    @property
    def n_r(self) -> int:
        return self.J.shape[0]

    @property
    def n_o(self) -> int:
        return self.J.shape[1]

    @property
    def n_v(self) -> int:
        return self.R.shape[0]

    @property
    def n_g(self) -> int:
        return self.L.shape[0]


def build_measurement_model(t: TopologySpec, paths=None) -> MeasurementModel:
    """Assemble L, Psi_k, J, R, b from a topology and its routing."""
    if paths is None:
        paths = route_flows(t)
    paths = tuple(tuple(p) for p in paths)
    if len(paths) != t.n_r:
        raise ValidationError("one path per flow required")
    edge_index = {e: k for k, e in enumerate(t.edges)}
    node_index = {n: j for j, n in enumerate(t.nodes)}
    mu = np.array([f.mu for f in t.flows])
    sigma2 = np.array([f.sigma2 for f in t.flows])

    flow_ops = []
    l_of = []
    k_of = []
    for i, p in enumerate(paths):
        ops = tuple(edge_index[(a, b)] for a, b in zip(p, p[1:]))
        flow_ops.append(ops)
        l_of.extend([i] * len(ops))
        k_of.extend(ops)
    l_of = np.array(l_of, dtype=int)
    k_of = np.array(k_of, dtype=int)
    n_g = l_of.size

    L = np.zeros((n_g, t.n_r))
    L[np.arange(n_g), l_of] = 1.0
    psi_diag = np.zeros((t.n_o, n_g))
    psi_diag[k_of, np.arange(n_g)] = 1.0 / mu[l_of]
    J = np.zeros((t.n_r, t.n_o))
    for i, ops in enumerate(flow_ops):
        J[i, list(ops)] = 1.0 / mu[i]

    owner = np.array([node_index[v] for _u, v in t.edges], dtype=int)
    R = np.zeros((t.n_v, t.n_o))
    R[owner, np.arange(t.n_o)] = 1.0
    b = np.array([t.budgets[n] for n in t.nodes])
    crossed = np.zeros(t.n_o, dtype=bool)
    crossed[k_of] = True
    traversal = (R > 0) & crossed[None, :]

    return MeasurementModel(
        spec=t, paths=paths, flow_ops=tuple(flow_ops), L=L, l_of=l_of,
        k_of=k_of, psi_diag=psi_diag, J=J, R=R, b=b, owner=owner,
        traversal=traversal, mu=mu, sigma2=sigma2)


def effective_information(mm: MeasurementModel, xi) -> np.ndarray:
    """Per-flow information m = J xi; equals diag(L' D(xi)^-1 L)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (mm.n_o,):
        raise ValidationError("xi must have one entry per observation point")
    return mm.J @ xi


def flow_model(mm: MeasurementModel) -> FlowModel:
    return FlowModel(sigma2=mm.sigma2, mu=mm.mu)


def design_problem(mm: MeasurementModel, cap=1.0, equality: bool = False,
                   zero_untraversed: bool = False) -> DesignProblem:
    """DesignProblem view of the model.

    ``cap`` bounds each rate from above (sampling probabilities: 1).
    ``equality`` turns budget rows into Rxi = b, but only for routers
    with at least one traversed interface; a router nothing crosses
    would make 0 = b_j infeasible, so its row stays an inequality.
    ``zero_untraversed`` pins rates of uncrossed observation points to 0.
    """
    upper = np.broadcast_to(np.asarray(cap, dtype=float), (mm.n_o,)).copy()
    if zero_untraversed:
        upper[~np.any(mm.traversal, axis=0)] = 0.0
    row_is_equality = None
    if equality:
        row_is_equality = np.any(mm.traversal, axis=1)
    return DesignProblem(J=mm.J, R=mm.R, b=mm.b,
                         row_is_equality=row_is_equality, upper=upper)


def remap_mu(mm: MeasurementModel, mu_new) -> MeasurementModel:
    """Same topology and routing, new mean volumes (plug-in estimates)."""
    mu_new = np.atleast_1d(np.asarray(mu_new, dtype=float))
    if mu_new.shape != (mm.n_r,):
        raise ValidationError("mu must have one entry per flow")
    if np.any(mu_new <= 0) or not np.all(np.isfinite(mu_new)):
        raise ValidationError("mu must be finite and > 0")
    psi_diag = np.zeros_like(mm.psi_diag)
    psi_diag[mm.k_of, np.arange(mm.n_g)] = 1.0 / mu_new[mm.l_of]
    J = np.zeros_like(mm.J)
    for i, ops in enumerate(mm.flow_ops):
        J[i, list(ops)] = 1.0 / mu_new[i]
    return replace(mm, psi_diag=psi_diag, J=J, mu=mu_new)


# ---------------------------------------------------------------------------
# synthetic topologies


def _node_names(n: int):
    width = len(str(n - 1))
    return tuple(f"n{i:0{width}d}" for i in range(n))


def _line_links(n: int):
    return [(i, i + 1) for i in range(n - 1)]


def _star_links(n: int):
    return [(0, i) for i in range(1, n)]


def _grid_links(rows: int, cols: int):
    links = []
    for r in range(rows):
        for c in range(cols):
            idx = r * cols + c
            if c + 1 < cols:
                links.append((idx, idx + 1))
            if r + 1 < rows:
                links.append((idx, idx + cols))
    return links


def _random_links(n: int, n_links: int, rng):
    max_links = n * (n - 1) // 2
    if not (n - 1 <= n_links <= max_links):
        raise ValidationError(
            f"random topology needs n_links in [{n - 1}, {max_links}]")
    order = rng.permutation(n)
    links = set()
    # random spanning tree first so every pair is connected
    for i in range(1, n):
        j = int(rng.integers(0, i))
        a, b = int(order[i]), int(order[j])
        links.add((min(a, b), max(a, b)))
    while len(links) < n_links:
        a, b = (int(x) for x in rng.integers(0, n, size=2))
        if a == b:
            continue
        links.add((min(a, b), max(a, b)))
    return sorted(links)


def synth_topology(kind: str, *, n_nodes=None, rows=None, cols=None,
                   n_links=None, n_flows=None, flow_fraction: float = 0.25,
                   mu_scale: float = 1000.0, sigma_rel: float = 0.05,
                   budget: float = 0.01, seed: int = 0) -> TopologySpec:
    """Reproducible synthetic topology with flows and budgets.

    Kinds: line (n_nodes), star (n_nodes), grid (rows x cols),
    random (n_nodes, n_links; a random spanning tree plus extra links).
    Every link becomes two directed edges. Candidate flows are all
    ordered node pairs with lognormal mean volumes; the heaviest
    fraction (or the top ``n_flows``) is kept, mirroring how only the
    largest flows are worth tracking. Innovation std is
    sigma_rel * mu * Uniform(0.5, 1.5) per flow.
    """
    rng = np.random.default_rng(seed)
    if kind == "line":
        if n_nodes is None or n_nodes < 2:
            raise ValidationError("line topology needs n_nodes >= 2")
        n, links = n_nodes, _line_links(n_nodes)
    elif kind == "star":
        if n_nodes is None or n_nodes < 2:
            raise ValidationError("star topology needs n_nodes >= 2")
        n, links = n_nodes, _star_links(n_nodes)
    elif kind == "grid":
        if rows is None or cols is None or rows < 1 or cols < 1 or rows * cols < 2:
            raise ValidationError("grid topology needs rows x cols >= 2 nodes")
        n, links = rows * cols, _grid_links(rows, cols)
    elif kind == "random":
        if n_nodes is None or n_nodes < 2:
            raise ValidationError("random topology needs n_nodes >= 2")
        if n_links is None:
            n_links = min(2 * n_nodes, n_nodes * (n_nodes - 1) // 2)
        n, links = n_nodes, _random_links(n_nodes, n_links, rng)
    else:
        raise ValidationError(f"unknown topology kind {kind!r}")

    names = _node_names(n)
    edges = []
    for a, b in links:
        edges.append((names[a], names[b]))
        edges.append((names[b], names[a]))

    pairs = [(u, v) for u in names for v in names if u != v]
    mu = mu_scale * rng.lognormal(mean=0.0, sigma=1.0, size=len(pairs))
    spread = rng.uniform(0.5, 1.5, size=len(pairs))
    keep = n_flows if n_flows is not None else max(1, round(flow_fraction * len(pairs)))
    if not 1 <= keep <= len(pairs):
        raise ValidationError(f"flow count {keep} out of range (1..{len(pairs)})")
    chosen = np.sort(np.argsort(-mu, kind="stable")[:keep])
    flows = tuple(
        Flow(origin=pairs[i][0], destination=pairs[i][1],
             sigma2=float((sigma_rel * mu[i] * spread[i]) ** 2),
             mu=float(mu[i]))
        for i in chosen)
    budgets = {name: budget for name in names}
    return TopologySpec(nodes=names, edges=tuple(edges), flows=flows,
                        budgets=budgets)


# ---------------------------------------------------------------------------
# CSV bundle I/O
#
# nodes.csv:   id
# links.csv:   u,v            (each row expands to directed edges u->v, v->u)
# flows.csv:   origin,destination,sigma2,mu
# budgets.csv: router,b


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _read_csv(path, header):
    if not os.path.exists(path):
        raise ValidationError(f"missing bundle file {os.path.basename(path)}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            got = next(reader)
        except StopIteration:
            raise ValidationError(f"{os.path.basename(path)}: empty file") from None
        if [c.strip() for c in got] != list(header):
            raise ValidationError(
                f"{os.path.basename(path)}: expected header {','.join(header)}")
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValidationError(
                    f"{os.path.basename(path)}: row {reader.line_num} has "
                    f"{len(row)} fields, expected {len(header)}")
            rows.append([c.strip() for c in row])
    return rows


def _paired_links(edges):
    """Collapse (u,v),(v,u) edge pairs back to links; raises if impossible."""
    if len(edges) % 2:
        raise ValidationError("edge list is not arranged as bidirectional links")
    links = []
    for m in range(0, len(edges), 2):
        u, v = edges[m]
        if edges[m + 1] != (v, u):
            raise ValidationError(
                "edge list is not arranged as bidirectional links")
        links.append((u, v))
    return links


def save_topology(t: TopologySpec, dirpath: str) -> None:
    """Write the four-file CSV bundle. Requires the bundle edge layout
    (consecutive (u,v),(v,u) pairs), which synth_topology and
    load_topology both produce."""
    links = _paired_links(t.edges)
    os.makedirs(dirpath, exist_ok=True)
    _write_csv(os.path.join(dirpath, "nodes.csv"), ["id"],
               [[n] for n in t.nodes])
    _write_csv(os.path.join(dirpath, "links.csv"), ["u", "v"], links)
    _write_csv(os.path.join(dirpath, "flows.csv"),
               ["origin", "destination", "sigma2", "mu"],
               [[f.origin, f.destination, format(f.sigma2, ".17g"),
                 format(f.mu, ".17g")] for f in t.flows])
    _write_csv(os.path.join(dirpath, "budgets.csv"), ["router", "b"],
               [[n, format(t.budgets[n], ".17g")] for n in t.nodes])


def load_topology(dirpath: str) -> TopologySpec:
    """Read a bundle written by save_topology (or by hand)."""
    if not os.path.isdir(dirpath):
        raise ValidationError(f"topology bundle {dirpath!r} is not a directory")
    nodes = tuple(r[0] for r in _read_csv(os.path.join(dirpath, "nodes.csv"), ["id"]))
    links = _read_csv(os.path.join(dirpath, "links.csv"), ["u", "v"])
    edges = []
    for u, v in links:
        edges.append((u, v))
        edges.append((v, u))

    def num(token, where):
        try:
            return float(token)
        except ValueError:
            raise ValidationError(f"{where}: bad number {token!r}") from None

    flows = tuple(
        Flow(origin=o, destination=d,
             sigma2=num(s2, "flows.csv"), mu=num(m, "flows.csv"))
        for o, d, s2, m in _read_csv(os.path.join(dirpath, "flows.csv"),
                                     ["origin", "destination", "sigma2", "mu"]))
    budgets = {r: num(bv, "budgets.csv")
               for r, bv in _read_csv(os.path.join(dirpath, "budgets.csv"),
                                      ["router", "b"])}
    return TopologySpec(nodes=nodes, edges=tuple(edges), flows=flows,
                        budgets=budgets)
