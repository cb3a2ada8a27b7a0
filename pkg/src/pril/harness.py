"""Sweeps over maps x policy classes x privacy budgets x repeats.

Each cell trains (or plans) a policy, runs the reward-reconstruction attack
on it and measures how close the reconstruction is to the true reward.
Results are written as CSV, heatmaps as binary PGM.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pril.dqn import train_dqn
from pril.errors import (BudgetTooSmall, ConfigError, EmptyGroup, IoError, PrilError, TooFewRuns,
                         UnknownBudget, ZeroVector)
from pril.gridworld import GridMap, RewardTable, build_mdp, bundled_map, load_map
from pril.irl import IrlConfig, policy_agreement, reconstruct_reward
from pril.metrics import DistanceReport, distance_report, sign_change_count
from pril.planning import Policy, evaluate_return, value_iteration
from pril.ppo import train_ppo
from pril.privacy import (CLASS_SENSITIVITY, PUBLISHED_EPSILONS, DpSgdConfig, NoiseSpec, PrivacyBudget,
                          rdp_calibrate, sigma_from_table)
from pril.training import TrainConfig

RESULTS_HEADER = ("map_id", "grid_size", "policy_class", "epsilon", "repeat", "seed", "sigma",
                  "l1", "l2", "linf", "sign_changes", "test_return", "policy_agreement", "steps",
                  "status", "wall_time_s")

# (optimizer, activation) of each private training strategy
STRATEGIES = {"SGD": ("sgd", "relu"), "Shoe": ("sgd", "tanh"), "Adam": ("adam", "relu")}

PRIVATE_CLASSES = ("VI-DP-Bellman", "DQN-DP-SGD", "DQN-DP-Shoe", "DQN-DP-Adam",
                   "PPO-DP-SGD", "PPO-DP-Shoe", "PPO-DP-Adam")
BASELINE_CLASSES = ("VI", "DQN", "PPO")
POLICY_CLASSES = PRIVATE_CLASSES + BASELINE_CLASSES

METRICS = ("l1", "l2", "linf", "sign_changes", "test_return", "policy_agreement")
# Group-key aliases accepted by aggregate_by and the CLI.
GROUP_KEYS = {"class": "policy_class", "policy_class": "policy_class", "epsilon": "epsilon",
              "grid_size": "grid_size", "map": "map_id", "map_id": "map_id"}


def _parse_epsilon(value) -> float:
    if isinstance(value, str):
        value = value.strip().lower()
        if value in ("inf", "infinity", "+inf"):
            return math.inf
    eps = float(value)
    if not eps > 0:
        raise ConfigError(f"epsilon must be positive, got {value!r}")
    return eps


def format_epsilon(eps: float) -> str:
    return "inf" if math.isinf(eps) else repr(float(eps))


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep. ``maps`` entries are file paths or bundled map ids such as ``"5x5_03"``.

    The infinite budget is always part of the sweep; it is appended when
    missing. ``sigma_mode`` picks noise scales from the published table or
    calibrates them with the RDP accountant for the configured step counts.
    """

    maps: tuple[str, ...] = ("5x5_01",)
    policy_classes: tuple[str, ...] = PRIVATE_CLASSES
    epsilons: tuple[float, ...] = PUBLISHED_EPSILONS
    repeats: int = 10
    base_seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    irl: IrlConfig = field(default_factory=IrlConfig)
    rewards: RewardTable = field(default_factory=RewardTable)
    wind: float = 0.0001
    gamma: float = 0.99
    vi_conv_threshold: float = 1e-10
    vi_max_iters: int = 10000
    clip_norm: float = 1.0
    delta: float = 1e-5
    sigma_mode: str = "table"
    out_dir: str = "results"
    workers: int = 1
    # wall time varies run to run; off by default so result files stay byte-identical
    record_wall_time: bool = False
    # heatmaps of the reconstruction are written for these repeat indices
    heatmap_repeats: tuple[int, ...] = (0,)

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("maps", tuple(str(m) for m in self.maps))
        set_("policy_classes", tuple(self.policy_classes))
        eps = [_parse_epsilon(e) for e in self.epsilons]
        if not eps:
            raise ConfigError("epsilon list must not be empty")
        if not any(math.isinf(e) for e in eps):
            eps.append(math.inf)
        set_("epsilons", tuple(eps))
        set_("heatmap_repeats", tuple(int(r) for r in self.heatmap_repeats))
        if not self.maps:
            raise ConfigError("at least one map is required")
        if len(set(map_id(m) for m in self.maps)) != len(self.maps):
            raise ConfigError("map ids must be unique")
        for cls in self.policy_classes:
            if cls not in POLICY_CLASSES:
                raise ConfigError(f"unknown policy class {cls!r}; choose from {', '.join(POLICY_CLASSES)}")
        if int(self.repeats) < 1:
            raise ConfigError("repeats must be at least 1")
        if int(self.workers) < 1:
            raise ConfigError("workers must be at least 1")
        if self.sigma_mode not in ("table", "calibrate"):
            raise ConfigError("sigma_mode must be 'table' or 'calibrate'")
        if not 0.0 <= self.wind < 1.0:
            raise ConfigError("wind must lie in [0, 1)")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("gamma must lie in [0, 1)")
        if self.sigma_mode == "table":
            for cls in self.policy_classes:
                if cls in PRIVATE_CLASSES:
                    for e in eps:
                        try:
                            sigma_from_table(cls, e)
                        except UnknownBudget as exc:
                            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        """Build from a JSON-style dict; unknown keys at any level raise :class:`ConfigError`."""
        data = dict(data)
        nested = {"train": TrainConfig, "irl": IrlConfig, "rewards": RewardTable}
        _reject_unknown(data, cls, "config")
        for key, kind in nested.items():
            if key in data:
                sub = data[key]
                if not isinstance(sub, dict):
                    raise ConfigError(f"{key} must be an object")
                _reject_unknown(sub, kind, key)
                try:
                    data[key] = kind(**sub)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{key}: {exc}") from exc
        for key in ("maps", "policy_classes", "epsilons", "heatmap_repeats"):
            if key in data:
                if isinstance(data[key], (str, bytes)) or not isinstance(data[key], (list, tuple)):
                    raise ConfigError(f"{key} must be a list")
                data[key] = tuple(data[key])
        try:
            return cls(**data)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if dataclasses.is_dataclass(value):
                value = dataclasses.asdict(value)
                value = {k: list(v) if isinstance(v, tuple) else v for k, v in value.items()}
            elif f.name == "epsilons":
                value = [format_epsilon(e) if math.isinf(e) else e for e in value]
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out


def _reject_unknown(data: dict, kind, where: str) -> None:
    known = {f.name for f in dataclasses.fields(kind)}
    extra = sorted(set(data) - known)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return ExperimentConfig.from_dict(data)


def map_id(entry: str) -> str:
    """Bundled ids stay as they are; file paths contribute their stem."""
    p = Path(entry)
    return p.stem if p.suffix or os.sep in entry else entry


def resolve_map(entry: str) -> GridMap:
    if os.path.exists(entry):
        return load_map(entry)
    try:
        return bundled_map(entry)
    except FileNotFoundError as exc:
        raise ConfigError(f"map {entry!r} is neither a file nor a bundled map id") from exc


def derive_seed(base_seed: int, map_name: str, policy_class: str, eps_index: int, repeat: int) -> int:
    """Stable 64-bit seed for one cell."""
    key = f"{int(base_seed)}|{map_name}|{policy_class}|{int(eps_index)}|{int(repeat)}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big")


@dataclass
class ExperimentRecord:
    map_id: str
    grid_size: str
    policy_class: str
    epsilon: float
    repeat: int
    seed: int
    sigma: float
    distances: DistanceReport | None
    sign_changes: int | None
    test_return: float
    policy_agreement: float
    steps: int
    status: str = "ok"
    wall_time_s: float = 0.0
    r_max: float = math.nan
    l1_penalty: float = math.nan
    reconstructed: np.ndarray | None = field(default=None, repr=False)

    def as_row(self) -> dict:
        d = self.distances
        return {
            "map_id": self.map_id,
            "grid_size": self.grid_size,
            "policy_class": self.policy_class,
            "epsilon": self.epsilon,
            "repeat": self.repeat,
            "seed": self.seed,
            "sigma": self.sigma,
            "l1": d.l1 if d else math.nan,
            "l2": d.l2 if d else math.nan,
            "linf": d.linf if d else math.nan,
            "sign_changes": math.nan if self.sign_changes is None else self.sign_changes,
            "test_return": self.test_return,
            "policy_agreement": self.policy_agreement,
            "steps": self.steps,
            "status": self.status,
            "wall_time_s": self.wall_time_s,
        }


def _family(policy_class: str) -> str:
    return policy_class.split("-")[0]


def cell_sigma(config: ExperimentConfig, policy_class: str, epsilon: float) -> float:
    """Noise scale of one cell: 0 for baselines and the infinite budget."""
    if policy_class not in PRIVATE_CLASSES or math.isinf(epsilon):
        return 0.0
    if config.sigma_mode == "table":
        return sigma_from_table(policy_class, epsilon)
    family = _family(policy_class)
    steps = config.vi_max_iters if family == "VI" else config.train.total_iterations
    return rdp_calibrate(PrivacyBudget(epsilon, config.delta), CLASS_SENSITIVITY[family], steps)


def train_cell_policy(mdp, config: ExperimentConfig, policy_class: str, sigma: float,
                      rng: np.random.Generator):
    """Plan or train the policy of one cell; returns ``(released policy, steps used)``."""
    family = _family(policy_class)
    if family == "VI":
        noise = NoiseSpec(sigma, CLASS_SENSITIVITY["VI"]) if sigma > 0 else None
        res = value_iteration(mdp, config.vi_conv_threshold, config.vi_max_iters, noise=noise, rng=rng)
        return res.policy, res.sweeps

    strategy = policy_class.split("-")[-1] if policy_class in PRIVATE_CLASSES else None
    optimizer, activation = STRATEGIES.get(strategy, (config.train.optimizer, "relu"))
    train = dataclasses.replace(config.train, optimizer=optimizer)
    dp = DpSgdConfig(config.clip_norm, sigma, optimizer, activation) if sigma > 0 else None
    if family == "DQN":
        res = train_dqn(mdp, train, dp=dp, rng=rng, activation=activation)
        return res.policy, res.updates
    res = train_ppo(mdp, train, dp_actor=dp, rng=rng, activation=activation)
    return res.policy, res.updates


def run_cell(config: ExperimentConfig, entry: str, policy_class: str, eps_index: int,
             repeat: int) -> ExperimentRecord:
    """Run one (map, class, epsilon, repeat) cell. Failures land in ``status``."""
    start = time.perf_counter()
    grid = resolve_map(entry)
    name = map_id(entry)
    epsilon = config.epsilons[eps_index]
    seed = derive_seed(config.base_seed, name, policy_class, eps_index, repeat)
    rec = ExperimentRecord(name, grid.grid_size, policy_class, epsilon, repeat, seed, math.nan,
                           None, None, math.nan, math.nan, 0,
                           r_max=config.irl.r_max, l1_penalty=config.irl.l1_penalty)
    try:
        mdp = build_mdp(grid, wind=config.wind, rewards=config.rewards, gamma=config.gamma)
        rec.sigma = cell_sigma(config, policy_class, epsilon)
        rng = np.random.default_rng(seed)
        policy, rec.steps = train_cell_policy(mdp, config, policy_class, rec.sigma, rng)
        rec.test_return = evaluate_return(mdp, policy, episodes=config.train.test_episodes,
                                          rng=np.random.default_rng([seed, 1]))
        released = policy.determinized()
        attack = reconstruct_reward(mdp.P, released, config.irl, terminal=mdp.terminal)
        if not attack.ok:
            rec.status = f"lp_{attack.solver_status}"
        else:
            rec.reconstructed = attack.rewards
            rec.status = _score(rec, mdp, released, attack.rewards, config)
    except BudgetTooSmall:
        rec.status = "budget_too_small"
    except PrilError as exc:
        rec.status = type(exc).__name__
    except FloatingPointError as exc:
        rec.status = type(exc).__name__
    if config.record_wall_time:
        rec.wall_time_s = time.perf_counter() - start
    return rec


def _score(rec: ExperimentRecord, mdp, released: Policy, rewards, config: ExperimentConfig) -> str:
    """Fill distances and round-trip agreement; returns the cell status."""
    rec.sign_changes = sign_change_count(mdp.R, rewards)
    replanned = value_iteration(mdp.with_rewards(rewards), config.vi_conv_threshold,
                                config.vi_max_iters).policy
    rec.policy_agreement = policy_agreement(released, replanned, mask=~mdp.terminal)
    try:
        rec.distances = distance_report(mdp.R, rewards)
    except ZeroVector:
        return "zero_reconstruction"
    return "ok"


def sweep_cells(config: ExperimentConfig) -> list[tuple[str, str, int, int]]:
    """Cell coordinates in canonical (map, class, epsilon, repeat) order."""
    return [(m, c, i, r)
            for m in config.maps
            for c in config.policy_classes
            for i in range(len(config.epsilons))
            for r in range(config.repeats)]


def _run_cell_args(args):
    return run_cell(*args)


def run_sweep(config: ExperimentConfig) -> list[ExperimentRecord]:
    """Every cell of the sweep, in canonical order; cells run in up to ``workers`` processes."""
    for entry in config.maps:
        resolve_map(entry)
    jobs = [(config, *cell) for cell in sweep_cells(config)]
    if config.workers == 1:
        return [_run_cell_args(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(_run_cell_args, jobs, chunksize=max(1, len(jobs) // (8 * config.workers))))


# ---------------------------------------------------------------- output

def format_cell(value) -> str:
    """CSV text of one value: shortest round-trip floats, blank for NaN."""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return ""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(value)


def _write_csv(path, header, rows) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([format_cell(row[k]) for k in header])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def emit_results(records, path) -> None:
    """Write one CSV row per record under the fixed results header."""
    _write_csv(path, RESULTS_HEADER, (r.as_row() for r in records))


def _parse_cell(key: str, text: str):
    if key in ("map_id", "grid_size", "policy_class", "status"):
        return text
    if text == "":
        return math.nan
    if key in ("repeat", "seed", "steps", "sign_changes"):
        return int(text)
    return float(text)


def read_results(path) -> list[dict]:
    """Rows of a results CSV with numeric fields parsed; blanks become NaN."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != RESULTS_HEADER:
                raise ConfigError(f"{path} does not carry the results header")
            return [{k: _parse_cell(k, v) for k, v in row.items()} for row in reader]
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def emit_rewards(records, path) -> None:
    """Long-format reconstructed rewards: one row per (cell, state)."""
    header = ("map_id", "policy_class", "epsilon", "repeat", "state", "reward")
    rows = []
    for r in records:
        if r.reconstructed is None:
            continue
        for s, value in enumerate(r.reconstructed):
            rows.append({"map_id": r.map_id, "policy_class": r.policy_class, "epsilon": r.epsilon,
                         "repeat": r.repeat, "state": s, "reward": float(value)})
    _write_csv(path, header, rows)


def emit_true_rewards(config: ExperimentConfig, path) -> None:
    header = ("map_id", "state", "reward")
    rows = []
    for entry in config.maps:
        mdp = build_mdp(resolve_map(entry), wind=config.wind, rewards=config.rewards, gamma=config.gamma)
        rows += [{"map_id": map_id(entry), "state": s, "reward": float(v)} for s, v in enumerate(mdp.R)]
    _write_csv(path, header, rows)


def load_reward_vector(path, where: dict | None = None) -> np.ndarray:
    """Reward vector from a CSV.

    A file with ``state`` and ``reward`` columns (long format) is filtered by
    ``where`` (column -> value, compared as text after numeric normalization)
    and ordered by state. Any other file is read as a flat list of numbers.
    """
    where = where or {}
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if any(c.strip() for c in r)]
    if rows and "state" in rows[0] and "reward" in rows[0]:
        header = rows[0]
        col = {k: i for i, k in enumerate(header)}
        for k in where:
            if k not in col:
                raise ConfigError(f"column {k!r} not in {path}")
        picked = {}
        for r in rows[1:]:
            if all(_same(r[col[k]], v) for k, v in where.items()):
                s = int(r[col["state"]])
                if s in picked:
                    raise ConfigError("filter matches more than one reward per state; add --where terms")
                picked[s] = float(r[col["reward"]])
        if not picked:
            raise ConfigError("no rows match the filter")
        if sorted(picked) != list(range(len(picked))):
            raise ConfigError("selected states are not contiguous from 0")
        return np.array([picked[s] for s in range(len(picked))])
    if where:
        raise ConfigError("filters need a long-format file with state and reward columns")
    values = [float(c) for r in rows for c in r if c.strip()]
    if not values:
        raise ConfigError(f"{path} holds no rewards")
    return np.array(values)


def _same(cell: str, want: str) -> bool:
    if cell == want:
        return True
    try:
        return float(cell) == float(want)
    except ValueError:
        return False


def emit_heatmap(R, grid: GridMap, path) -> None:
    """Binary PGM of the reward grid, linearly scaled to 0..255 (constant vectors give 128)."""
    R = np.asarray(R, dtype=np.float64).ravel()
    if R.size != grid.width * grid.height:
        raise ValueError(f"reward vector has {R.size} entries, map has {grid.width * grid.height} cells")
    lo, hi = float(R.min()), float(R.max())
    if hi > lo:
        pixels = np.rint(255.0 * (R - lo) / (hi - lo))
    else:
        pixels = np.full(R.size, 128.0)
    data = f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii") + pixels.astype(np.uint8).tobytes()
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_bytes(data)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_pgm(path) -> tuple[int, int, np.ndarray]:
    """``(width, height, pixels)`` of a binary PGM written by :func:`emit_heatmap`."""
    data = Path(path).read_bytes()
    magic, dims, maxval, rest = data.split(b"\n", 3)
    if magic != b"P5" or maxval != b"255":
        raise ValueError("not an 8-bit binary PGM")
    w, h = (int(x) for x in dims.split())
    return w, h, np.frombuffer(rest, dtype=np.uint8).reshape(h, w)


# ---------------------------------------------------------------- aggregation

def _rows(records) -> list[dict]:
    return [r.as_row() if isinstance(r, ExperimentRecord) else dict(r) for r in records]


def _group_columns(keys) -> list[str]:
    cols = []
    for k in keys:
        if k not in GROUP_KEYS:
            raise ConfigError(f"unknown group key {k!r}; choose from {', '.join(sorted(GROUP_KEYS))}")
        if GROUP_KEYS[k] not in cols:
            cols.append(GROUP_KEYS[k])
    return cols


def _sort_key(value):
    return (0, value, "") if isinstance(value, (int, float)) else (1, 0.0, str(value))


def aggregate_by(records, keys=()) -> list[dict]:
    """Mean and sample standard deviation of every metric per group.

    NaN (undefined) values are left out and counted in ``<metric>_excluded``.
    A singleton sample has std 0. Groups come out sorted by their key values.
    """
    rows = _rows(records)
    if not rows:
        raise EmptyGroup("no records to aggregate")
    cols = _group_columns(keys)
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault(tuple(row[c] for c in cols), []).append(row)
    out = []
    for key in sorted(groups, key=lambda k: tuple(_sort_key(v) for v in k)):
        members = groups[key]
        entry = dict(zip(cols, key))
        entry["count"] = len(members)
        for m in METRICS:
            values = np.array([float(r[m]) for r in members], dtype=np.float64)
            ok = values[~np.isnan(values)]
            entry[f"{m}_mean"] = float(ok.mean()) if ok.size else math.nan
            entry[f"{m}_std"] = float(ok.std(ddof=1)) if ok.size > 1 else (0.0 if ok.size else math.nan)
            entry[f"{m}_excluded"] = int(values.size - ok.size)
        out.append(entry)
    return out


def aggregate_header(keys=()) -> tuple[str, ...]:
    cols = _group_columns(keys)
    stats = [f"{m}_{s}" for m in METRICS for s in ("mean", "std", "excluded")]
    return (*cols, "count", *stats)


def emit_aggregate(table, keys, path) -> None:
    _write_csv(path, aggregate_header(keys), table)


def per_state_variance(records) -> np.ndarray:
    """Sample variance of the reconstructed reward at each state across repeats of one cell family."""
    records = [r for r in records if r.reconstructed is not None]
    if len(records) < 2:
        raise TooFewRuns(f"need at least 2 reconstructions, got {len(records)}")
    families = {(r.map_id, r.policy_class, r.epsilon) for r in records}
    if len(families) != 1:
        raise ValueError("records span more than one (map, class, epsilon) family")
    return np.var(np.stack([r.reconstructed for r in records]), axis=0, ddof=1)


def spearman_trend(table, metric: str = "l2_mean") -> tuple[float, float]:
    """Spearman rank correlation between epsilon and ``metric`` over aggregate rows.

    Rows whose metric is undefined are skipped. Returns ``(rho, p_value)``;
    both are NaN when fewer than 3 points remain or either side is constant.
    """
    from scipy.stats import spearmanr

    pts = [(float(r["epsilon"]), float(r[metric])) for r in table if not math.isnan(float(r[metric]))]
    if len(pts) < 3:
        return math.nan, math.nan
    eps, vals = np.array(pts).T
    if np.ptp(vals) == 0 or np.unique(eps).size < 2:
        return math.nan, math.nan
    res = spearmanr(eps, vals)
    return float(res.statistic), float(res.pvalue)


# ---------------------------------------------------------------- policy files

def save_policy(policy: Policy, path) -> None:
    doc = {"n_states": policy.n_states, "n_actions": policy.n_actions,
           "probs": [float(x) for x in policy.probs.ravel()]}
    try:
        Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_policy(path) -> Policy:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    extra = set(doc) - {"n_states", "n_actions", "probs"}
    if extra:
        raise ConfigError(f"unknown key(s) in policy file: {', '.join(sorted(extra))}")
    try:
        S, A = int(doc["n_states"]), int(doc["n_actions"])
        probs = np.asarray(doc["probs"], dtype=np.float64)
    except KeyError as exc:
        raise ConfigError(f"policy file lacks {exc.args[0]!r}") from exc
    if probs.size != S * A:
        raise ConfigError(f"probs has {probs.size} entries, expected {S * A}")
    return Policy(probs.reshape(S, A))


# ---------------------------------------------------------------- whole run

def write_outputs(config: ExperimentConfig, records, out_dir=None) -> dict:
    """Write results, rewards, aggregates and heatmaps; returns the written paths."""
    out = Path(out_dir or config.out_dir)
    paths = {"results": out / "results.csv", "rewards": out / "rewards.csv",
             "true_rewards": out / "true_rewards.csv", "aggregate": out / "aggregate.csv",
             "trend": out / "trend.csv"}
    emit_results(records, paths["results"])
    emit_rewards(records, paths["rewards"])
    emit_true_rewards(config, paths["true_rewards"])
    keys = ("class", "epsilon", "grid_size")
    table = aggregate_by(records, keys) if records else []
    emit_aggregate(table, keys, paths["aggregate"])

    trend_rows = []
    for cls in config.policy_classes:
        for size in sorted({r.grid_size for r in records}):
            sub = [t for t in table if t["policy_class"] == cls and t["grid_size"] == size]
            rho, p = spearman_trend(sub)
            trend_rows.append({"policy_class": cls, "grid_size": size, "metric": "l2",
                               "spearman_rho": rho, "p_value": p, "n_points": len(sub)})
    _write_csv(paths["trend"], ("policy_class", "grid_size", "metric", "spearman_rho", "p_value", "n_points"),
               trend_rows)

    heat = out / "heatmaps"
    grids = {map_id(e): resolve_map(e) for e in config.maps}
    for entry in config.maps:
        name = map_id(entry)
        mdp = build_mdp(grids[name], wind=config.wind, rewards=config.rewards, gamma=config.gamma)
        emit_heatmap(mdp.R, grids[name], heat / f"{name}_true.pgm")
    for r in records:
        if r.reconstructed is not None and r.repeat in config.heatmap_repeats:
            fname = f"{r.map_id}_{r.policy_class}_eps{format_epsilon(r.epsilon)}_r{r.repeat}.pgm"
            emit_heatmap(r.reconstructed, grids[r.map_id], heat / fname)
    return paths
