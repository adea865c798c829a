"""Synthetic designs and responses with a known causal structure.

Responses follow y = X_c beta + s + W tau + Z omega + e, where s is one
feature's additive effect restricted to half of the samples, W holds pairwise
products of causal columns and Z the top principal components of the design.
Each component is rescaled so its realized sample variance hits its share of
the unit response variance exactly.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from goalskit.dataset import Dataset, principal_components, standardize_columns
from goalskit.utils import DataError, check_schema, read_json, write_json


log = logging.getLogger(__name__)

SIM_FORMAT = 'goalskit.sim.v1'
DESIGNS = ('gaussian', 'genotype')
N_PCS = 10
MAF_RANGE = (0.01, 0.5)
MAX_RESAMPLES = 100
SUBGROUP_SPLITS = ('upper', 'random')


def feature_name(j: int) -> str:
    return f'x{j + 1}'


# Features are numbered from 1 in scenario descriptions and indexed from 0 here.
def _idx(*numbers: int) -> tuple[int, ...]:
    return tuple(number - 1 for number in numbers)


SCENARIOS = {
    'I': {'additive': _idx(23, 24, 25), 'pairs': (_idx(23, 25), _idx(24, 25))},
    'II': {'additive': _idx(23, 24, 25), 'pairs': (_idx(8, 10), _idx(9, 10))},
    'III': {'additive': _idx(23, 24, 25), 'pairs': (_idx(8, 10), _idx(9, 25))},
    'IV': {'additive': (), 'pairs': (_idx(8, 10), _idx(9, 10), _idx(23, 25), _idx(24, 25))},
    'V': {'additive': (), 'pairs': ()},
    'VI': {'additive': _idx(23, 24, 25), 'pairs': (_idx(23, 25), _idx(24, 25)), 'subgroup': _idx(22)[0]},
}
HIGH_DIMENSIONAL = {
    'hd1': {'rho': 1.0, 'pop_var': 0.0},
    'hd2': {'rho': 1.0, 'pop_var': 0.1},
    'hd3': {'rho': 0.5, 'pop_var': 0.0},
    'hd4': {'rho': 0.5, 'pop_var': 0.1},
}
SCENARIO_NAMES = (*SCENARIOS, *HIGH_DIMENSIONAL)


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines one simulated dataset."""

    n: int
    j: int
    v2: float = 0.6
    rho: float = 0.5
    pop_var: float = 0.0
    scenario: str = 'custom'
    additive: tuple[int, ...] = ()
    interaction_pairs: tuple[tuple[int, int], ...] = ()
    subgroup_feature: int | None = None
    seed: int = 0
    design: str = 'gaussian'
    subgroup_split: str = 'upper'

    def __post_init__(self):
        if self.n < 2 or self.j < 1:
            raise ValueError(f'Need at least 2 samples and 1 feature, got n={self.n}, j={self.j}')
        if not 0 < self.v2 < 1:
            raise ValueError(f'Signal fraction v2 must be in (0, 1), got {self.v2}')
        if not 0 < self.rho <= 1:
            raise ValueError(f'Additive fraction rho must be in (0, 1], got {self.rho}')
        if not 0 <= self.pop_var <= 1 - self.v2:
            raise ValueError(f'Population variance must be in [0, 1 - v2] = [0, {1 - self.v2:.3g}], got {self.pop_var}')
        if self.design not in DESIGNS:
            raise ValueError(f'Unknown design {self.design!r}; choose from {DESIGNS}')
        if self.subgroup_split not in SUBGROUP_SPLITS:
            raise ValueError(f'Unknown subgroup split {self.subgroup_split!r}; choose from {SUBGROUP_SPLITS}')

        for index in self.causal:
            if not 0 <= index < self.j:
                raise ValueError(f'Causal feature {feature_name(index)} does not exist with j={self.j}')
        if self.rho == 1 and self.interaction_pairs and self.has_additive:
            raise ValueError('rho=1 puts all signal in additive effects, but the scenario has interaction pairs')
        if self.rho < 1 and self.has_additive and not self.interaction_pairs:
            raise ValueError(f'rho={self.rho} leaves signal for interactions, but there are no interaction pairs')
        if self.pop_var > 0 and min(self.n - 1, self.j) < N_PCS:
            raise ValueError(f'Population structure needs {N_PCS} principal components: n > {N_PCS} and j >= {N_PCS}')

    @property
    def has_additive(self) -> bool:
        return bool(self.additive) or self.subgroup_feature is not None

    @property
    def causal(self) -> tuple[int, ...]:
        members = set(self.additive) | {index for pair in self.interaction_pairs for index in pair}
        if self.subgroup_feature is not None:
            members.add(self.subgroup_feature)
        return tuple(sorted(members))

    def targets(self) -> dict[str, float]:
        """Variance share of each response component.

        A subgroup feature takes the share of one additive feature out of rho * v2.
        """
        has_signal = bool(self.causal)
        additive = self.rho * self.v2 if self.has_additive else 0.0
        subgroup = 0.0
        if self.subgroup_feature is not None:
            subgroup = additive / (len(self.additive) + 1)
            additive -= subgroup
        if not self.interaction_pairs:
            interaction = 0.0
        elif self.has_additive:
            interaction = (1 - self.rho) * self.v2
        else:
            interaction = self.v2
        signal = self.v2 if has_signal else 0.0
        return {
            'additive': additive,
            'subgroup': subgroup,
            'interaction': interaction,
            'population': self.pop_var,
            'noise': 1.0 - signal - self.pop_var,
        }


@dataclass(eq=False)
class SimTruth:
    scenario: str
    seed: int
    causal: tuple[int, ...]
    additive: tuple[int, ...]
    interaction_pairs: tuple[tuple[int, int], ...]
    beta: dict[int, float] = field(default_factory=dict)
    tau: list[float] = field(default_factory=list)
    omega: list[float] = field(default_factory=list)
    subgroup_feature: int | None = None
    subgroup_split: str | None = None
    affected_mask: np.ndarray | None = None
    variances: dict[str, float] = field(default_factory=dict)

    @property
    def causal_names(self) -> tuple[str, ...]:
        return tuple(feature_name(index) for index in self.causal)


def scenario_preset(name: str, j: int | None = None, n_causal: int = 30, seed: int = 0) -> dict:
    """Causal structure and default parameters of a named scenario.

    The high-dimensional presets draw `n_causal` causal features at random; with
    rho < 1 each causal feature also interacts with one random causal partner.

    Args:
        name: One of I..VI or hd1..hd4
        j: Number of features (required for the high-dimensional presets)
        n_causal: Causal set size of the high-dimensional presets
        seed: Seed for the random causal set

    Returns:
        Keyword arguments for SimConfig
    """
    if name in SCENARIOS:
        preset = SCENARIOS[name]
        return {
            'scenario': name,
            'v2': 0.6,
            'rho': 0.5,
            'pop_var': 0.0,
            'design': 'gaussian',
            'additive': preset['additive'],
            'interaction_pairs': preset['pairs'],
            'subgroup_feature': preset.get('subgroup'),
        }
    if name not in HIGH_DIMENSIONAL:
        raise ValueError(f'Unknown scenario {name!r}; choose from {SCENARIO_NAMES}')
    if j is None:
        raise ValueError(f'Scenario {name} needs the number of features')
    if not 2 <= n_causal <= j:
        raise ValueError(f'Number of causal features must be in [2, {j}], got {n_causal}')

    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    causal = tuple(int(c) for c in np.sort(rng.choice(j, size=n_causal, replace=False)))
    preset = HIGH_DIMENSIONAL[name]
    pairs = ()
    if preset['rho'] < 1:
        chosen = set()
        for position, index in enumerate(causal):
            partner = causal[(position + rng.integers(1, n_causal)) % n_causal]
            chosen.add((min(index, partner), max(index, partner)))
        pairs = tuple(sorted(chosen))
    return {
        'scenario': name,
        'v2': 0.3,
        'design': 'genotype',
        'additive': causal,
        'interaction_pairs': pairs,
        'subgroup_feature': None,
        **preset,
    }


def make_config(
    scenario: str,
    n: int,
    j: int,
    seed: int = 0,
    n_causal: int = 30,
    **overrides,
) -> SimConfig:
    """SimConfig for a named scenario; keyword overrides that are not None replace preset values."""
    preset = scenario_preset(scenario, j=j, n_causal=n_causal, seed=seed)
    preset.update({key: value for key, value in overrides.items() if value is not None})
    return SimConfig(n=n, j=j, seed=seed, **preset)


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    design_seed, response_seed = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(design_seed), np.random.default_rng(response_seed)


def _genotypes(rng: np.random.Generator, n: int, j: int) -> np.ndarray:
    maf = rng.uniform(*MAF_RANGE, size=j)
    x = rng.binomial(2, maf, size=(n, j)).astype(np.float64)
    for column in range(j):
        for _ in range(MAX_RESAMPLES):
            if np.ptp(x[:, column]) > 0:
                break
            x[:, column] = rng.binomial(2, maf[column], size=n)
        else:
            raise DataError(f'Column {feature_name(column)} stayed monomorphic after {MAX_RESAMPLES} resamples')
    return x


def generate_design(cfg: SimConfig) -> Dataset:
    """Design matrix of iid N(0, 1) entries or standardized {0, 1, 2} genotypes; y is all zeros."""
    rng, _ = _streams(cfg.seed)
    if cfg.design == 'gaussian':
        x = rng.standard_normal((cfg.n, cfg.j))
    else:
        x = standardize_columns(_genotypes(rng, cfg.n, cfg.j))
    return Dataset(x=x, y=np.zeros(cfg.n), feature_names=tuple(feature_name(j) for j in range(cfg.j)))


def _rescale(component: np.ndarray, previous: list[np.ndarray], target: float, name: str) -> np.ndarray:
    """Center, make orthogonal to earlier components, and scale to sample variance `target`."""
    if target == 0:
        return np.zeros_like(component)

    residual = component - component.mean()
    if previous:
        basis = np.column_stack(previous)
        coefficients, *_ = linalg.lstsq(basis, residual)
        residual = residual - basis @ coefficients
    spread = residual.std(ddof=1)
    if spread == 0:
        raise DataError(f'The {name} component has no variance left to rescale')
    return residual * np.sqrt(target) / spread


def subgroup_mask(column: np.ndarray, split: str, rng: np.random.Generator) -> np.ndarray:
    """Exactly N // 2 affected samples: the largest values of `column` ('upper') or a seeded random half."""
    n = column.shape[0]
    if split == 'upper':
        chosen = np.argsort(-column, kind='stable')[: n // 2]
    elif split == 'random':
        chosen = rng.permutation(n)[: n // 2]
    else:
        raise ValueError(f'Unknown subgroup split {split!r}; choose from {SUBGROUP_SPLITS}')
    mask = np.zeros(n, dtype=bool)
    mask[chosen] = True
    return mask


def generate_response(d: Dataset, cfg: SimConfig) -> tuple[np.ndarray, SimTruth]:
    """Response and ground truth for a design from generate_design.

    Args:
        d: The simulated design
        cfg: Simulation configuration

    Returns:
        The response vector (sample mean 0, sample variance 1) and its SimTruth
    """
    if d.n != cfg.n or d.j != cfg.j:
        raise DataError(f'Design is {d.n} x {d.j} but the configuration asks for {cfg.n} x {cfg.j}')
    _, rng = _streams(cfg.seed)
    targets = cfg.targets()
    x = d.x

    beta = {index: float(rng.standard_normal()) for index in cfg.additive}
    additive = x[:, list(cfg.additive)] @ np.array([beta[index] for index in cfg.additive]) if beta else np.zeros(cfg.n)

    mask = None
    subgroup = np.zeros(cfg.n)
    if cfg.subgroup_feature is not None:
        column = x[:, cfg.subgroup_feature]
        mask = subgroup_mask(column, cfg.subgroup_split, rng)
        beta[cfg.subgroup_feature] = float(rng.standard_normal())
        subgroup = mask * column * beta[cfg.subgroup_feature]

    tau = rng.standard_normal(len(cfg.interaction_pairs))
    interaction = np.zeros(cfg.n)
    if cfg.interaction_pairs:
        w = np.column_stack([x[:, a] * x[:, b] for a, b in cfg.interaction_pairs])
        interaction = w @ tau

    omega = np.zeros(0)
    population = np.zeros(cfg.n)
    if cfg.pop_var > 0:
        z = principal_components(standardize_columns(x), N_PCS)
        omega = rng.standard_normal(N_PCS)
        population = z @ omega

    noise = rng.standard_normal(cfg.n)

    components = {}
    previous = []
    unscaled = {
        'additive': additive,
        'subgroup': subgroup,
        'interaction': interaction,
        'population': population,
        'noise': noise,
    }
    for name, raw in unscaled.items():
        components[name] = _rescale(raw, previous, targets[name], name)
        if targets[name] > 0:
            previous.append(components[name])

    y = sum(components.values())
    truth = SimTruth(
        scenario=cfg.scenario,
        seed=cfg.seed,
        causal=cfg.causal,
        additive=cfg.additive,
        interaction_pairs=cfg.interaction_pairs,
        beta=beta,
        tau=[float(t) for t in tau],
        omega=[float(o) for o in omega],
        subgroup_feature=cfg.subgroup_feature,
        subgroup_split=None if cfg.subgroup_feature is None else cfg.subgroup_split,
        affected_mask=mask,
        variances={name: float(component.var(ddof=1)) for name, component in components.items()},
    )
    return y, truth


def simulate(cfg: SimConfig) -> tuple[Dataset, SimTruth]:
    """Design plus response in one call."""
    design = generate_design(cfg)
    y, truth = generate_response(design, cfg)
    return design.with_response(y), truth


def write_truth(truth: SimTruth, path: Path) -> Path:
    payload = {
        'format': SIM_FORMAT,
        'scenario': truth.scenario,
        'seed': truth.seed,
        'causal': list(truth.causal),
        'causal_features': list(truth.causal_names),
        'additive': list(truth.additive),
        'interaction_pairs': [list(pair) for pair in truth.interaction_pairs],
        'beta': {str(index): value for index, value in truth.beta.items()},
        'tau': truth.tau,
        'omega': truth.omega,
        'subgroup_feature': truth.subgroup_feature,
        'subgroup_split': truth.subgroup_split,
        'affected_mask': None if truth.affected_mask is None else truth.affected_mask.astype(int).tolist(),
        'variances': truth.variances,
    }
    return write_json(payload, path)


def read_truth(path: Path) -> SimTruth:
    payload = read_json(path)
    check_schema(payload, SIM_FORMAT, Path(path))
    mask = payload['affected_mask']
    return SimTruth(
        scenario=payload['scenario'],
        seed=payload['seed'],
        causal=tuple(payload['causal']),
        additive=tuple(payload['additive']),
        interaction_pairs=tuple(tuple(pair) for pair in payload['interaction_pairs']),
        beta={int(index): value for index, value in payload['beta'].items()},
        tau=payload['tau'],
        omega=payload['omega'],
        subgroup_feature=payload['subgroup_feature'],
        subgroup_split=payload.get('subgroup_split'),
        affected_mask=None if mask is None else np.array(mask, dtype=bool),
        variances=payload['variances'],
    )
