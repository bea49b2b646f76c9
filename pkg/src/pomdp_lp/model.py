"""Problem data for finite-horizon POMDPs and decomposable POMDPs.

Arrays are indexed with 0-based integers:

* ``initial[s]``
* ``transition[s, a, s_next]``
* ``emission[s, o]``
* ``reward[s, a, s_next]``

Instances are immutable after validation (their arrays are flagged
read-only), so they can be shared freely between threads.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    ImpossibleObservation,
    InvalidInstance,
    NegativeProbability,
    NonFiniteReward,
    NonStochasticRow,
    ProductTooLarge,
)

STOCHASTIC_TOL = 1e-9
INTEGER_TOL = 1e-6
MAX_PRODUCT_CELLS = 10**7
FORMAT_VERSION = 1


def _frozen(arr, dtype=float):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class PomdpInstance:
    num_states: int
    num_observations: int
    num_actions: int
    horizon: int
    initial: np.ndarray
    transition: np.ndarray
    emission: np.ndarray
    reward: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, PomdpInstance):
            return NotImplemented
        return self.dims == other.dims and all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("initial", "transition", "emission", "reward")
        )

    __hash__ = None

    @property
    def dims(self):
        return (self.num_states, self.num_observations, self.num_actions, self.horizon)

    def expected_reward(self):
        """Expected immediate reward ``R[s, a] = sum_s' p(s'|s,a) r(s,a,s')``."""
        return np.einsum("sap,sap->sa", self.transition, self.reward)

    def with_initial(self, initial) -> "PomdpInstance":
        return validate_instance(_replace_dict(self, initial=initial))

    def with_horizon(self, horizon: int) -> "PomdpInstance":
        return validate_instance(_replace_dict(self, horizon=horizon))

    def to_dict(self, include_shared=True):
        out = {
            "num_states": self.num_states,
            "num_observations": self.num_observations,
            "initial": self.initial.tolist(),
            "transition": self.transition.tolist(),
            "emission": self.emission.tolist(),
            "reward": self.reward.tolist(),
        }
        if include_shared:
            out = {"num_actions": self.num_actions, "horizon": self.horizon, **out}
        return out


@dataclass(frozen=True, eq=False)
class DecomposablePomdp:
    num_actions: int
    horizon: int
    components: tuple

    def __post_init__(self):
        if len(self.components) < 1:
            raise InvalidInstance("a decomposable POMDP needs at least one component")
        for m, comp in enumerate(self.components):
            if comp.num_actions != self.num_actions or comp.horizon != self.horizon:
                raise DimensionMismatch(
                    f"component {m} has (|A|, T) = ({comp.num_actions}, {comp.horizon}),"
                    f" expected ({self.num_actions}, {self.horizon})"
                )

    def __eq__(self, other):
        if not isinstance(other, DecomposablePomdp):
            return NotImplemented
        return (
            self.num_actions == other.num_actions
            and self.horizon == other.horizon
            and len(self.components) == len(other.components)
            and all(a == b for a, b in zip(self.components, other.components))
        )

    __hash__ = None

    @property
    def num_components(self):
        return len(self.components)

    @property
    def state_shape(self):
        return tuple(c.num_states for c in self.components)

    @property
    def observation_shape(self):
        return tuple(c.num_observations for c in self.components)

    def with_initials(self, initials) -> "DecomposablePomdp":
        comps = tuple(c.with_initial(b) for c, b in zip(self.components, initials))
        return DecomposablePomdp(self.num_actions, self.horizon, comps)

    def with_horizon(self, horizon) -> "DecomposablePomdp":
        comps = tuple(c.with_horizon(horizon) for c in self.components)
        return DecomposablePomdp(self.num_actions, horizon, comps)


@dataclass(frozen=True, eq=False)
class Policy:
    """Time-indexed memoryless decision rule ``rules[t, o, a] = delta^t_{a|o}``."""

    rules: np.ndarray
    deterministic: bool = False

    def __post_init__(self):
        rules = np.asarray(self.rules, dtype=float)
        if rules.ndim != 3:
            raise DimensionMismatch("policy rules must be indexed (t, o, a)")
        if np.any(rules < -STOCHASTIC_TOL):
            idx = np.argwhere(rules < -STOCHASTIC_TOL)[0]
            raise NegativeProbability("policy", idx, rules[tuple(idx)])
        sums = rules.sum(axis=2)
        bad = np.abs(sums - 1.0) > STOCHASTIC_TOL
        if bad.any():
            idx = np.argwhere(bad)[0]
            raise NonStochasticRow("policy", idx, sums[tuple(idx)])
        if self.deterministic and np.any(np.abs(rules - np.round(rules)) > INTEGER_TOL):
            raise InvalidInstance("deterministic policy has fractional entries")
        object.__setattr__(self, "rules", _frozen(rules))

    @property
    def horizon(self):
        return self.rules.shape[0]

    @property
    def num_observations(self):
        return self.rules.shape[1]

    @property
    def num_actions(self):
        return self.rules.shape[2]

    @classmethod
    def from_actions(cls, actions, num_actions) -> "Policy":
        """Deterministic policy from an integer table ``actions[t, o]``."""
        actions = np.asarray(actions, dtype=np.intp)
        rules = np.zeros(actions.shape + (num_actions,))
        np.put_along_axis(rules, actions[..., None], 1.0, axis=2)
        return cls(rules, deterministic=True)

    def actions(self):
        """Action table ``[t, o]`` (argmax of each rule, lowest index on ties)."""
        return np.argmax(self.rules, axis=2)

    def __eq__(self, other):
        if not isinstance(other, Policy):
            return NotImplemented
        return np.array_equal(self.rules, other.rules)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Belief:
    """Per-component probability vectors over each component's states."""

    vectors: tuple = field(default_factory=tuple)

    def __post_init__(self):
        vecs = []
        for m, v in enumerate(self.vectors):
            v = np.asarray(v, dtype=float)
            if np.any(v < -STOCHASTIC_TOL):
                raise NegativeProbability("belief", (m, int(np.argmin(v))), v.min())
            if abs(v.sum() - 1.0) > STOCHASTIC_TOL:
                raise NonStochasticRow("belief", (m,), v.sum())
            vecs.append(_frozen(v))
        object.__setattr__(self, "vectors", tuple(vecs))

    def __len__(self):
        return len(self.vectors)

    def __getitem__(self, m):
        return self.vectors[m]


def _check_rows(name, arr, tol):
    if np.any(~np.isfinite(arr)):
        idx = np.argwhere(~np.isfinite(arr))[0]
        raise NonStochasticRow(name, idx[:-1], float("nan"))
    neg = arr < 0
    if neg.any():
        idx = np.argwhere(neg)[0]
        raise NegativeProbability(name, idx, arr[tuple(idx)])
    sums = arr.sum(axis=-1)
    bad = np.abs(sums - 1.0) > tol
    if bad.any():
        idx = np.argwhere(np.atleast_1d(bad))[0]
        raise NonStochasticRow(name, idx if arr.ndim > 1 else (), np.atleast_1d(sums)[tuple(idx)])


def _replace_dict(inst, **changes):
    raw = {
        "num_states": inst.num_states,
        "num_observations": inst.num_observations,
        "num_actions": inst.num_actions,
        "horizon": inst.horizon,
        "initial": inst.initial,
        "transition": inst.transition,
        "emission": inst.emission,
        "reward": inst.reward,
    }
    raw.update(changes)
    return raw


def _positive_int(raw, key):
    try:
        value = raw[key]
    except KeyError:
        raise DimensionMismatch(f"missing dimension {key!r}") from None
    if isinstance(value, bool) or int(value) != value or int(value) < 1:
        raise DimensionMismatch(f"{key} must be a positive integer, got {value!r}")
    return int(value)


def validate_instance(raw, tol=STOCHASTIC_TOL) -> PomdpInstance:
    """Check a POMDP-shaped mapping (or instance) and freeze it.

    Raises one of :class:`NonStochasticRow`, :class:`NegativeProbability`,
    :class:`DimensionMismatch` or :class:`NonFiniteReward`.
    """
    if isinstance(raw, PomdpInstance):
        raw = _replace_dict(raw)
    nS = _positive_int(raw, "num_states")
    nO = _positive_int(raw, "num_observations")
    nA = _positive_int(raw, "num_actions")
    T = _positive_int(raw, "horizon")

    expected = {
        "initial": (nS,),
        "transition": (nS, nA, nS),
        "emission": (nS, nO),
        "reward": (nS, nA, nS),
    }
    arrays = {}
    for key, shape in expected.items():
        if key not in raw:
            raise DimensionMismatch(f"missing field {key!r}")
        try:
            arr = np.asarray(raw[key], dtype=float)
        except (TypeError, ValueError) as exc:
            raise DimensionMismatch(f"{key} is not a rectangular numeric array") from exc
        if arr.shape != shape:
            raise DimensionMismatch(f"{key} has shape {arr.shape}, expected {shape}")
        arrays[key] = arr

    _check_rows("initial", arrays["initial"], tol)
    _check_rows("transition", arrays["transition"], tol)
    _check_rows("emission", arrays["emission"], tol)
    if not np.all(np.isfinite(arrays["reward"])):
        idx = np.argwhere(~np.isfinite(arrays["reward"]))[0]
        raise NonFiniteReward(f"reward{list(idx)} is not finite")

    return PomdpInstance(
        nS, nO, nA, T, *(_frozen(arrays[k]) for k in expected)
    )


def validate_decomposable(raw) -> DecomposablePomdp:
    if isinstance(raw, DecomposablePomdp):
        return raw
    nA = _positive_int(raw, "num_actions")
    T = _positive_int(raw, "horizon")
    comps = raw.get("components")
    if not comps:
        raise InvalidInstance("decomposable instance needs a nonempty 'components' list")
    parsed = []
    for comp in comps:
        if isinstance(comp, PomdpInstance):
            parsed.append(comp)
        else:
            parsed.append(validate_instance({**comp, "num_actions": nA, "horizon": T}))
    return DecomposablePomdp(nA, T, tuple(parsed))


def compose(dec: DecomposablePomdp, max_cells=MAX_PRODUCT_CELLS) -> PomdpInstance:
    """Product-space POMDP of a decomposable instance.

    Joint indices are row-major with component 0 as the most significant
    digit, i.e. ``np.ravel_multi_index(states, dec.state_shape)``.
    """
    nS = math.prod(dec.state_shape)
    nO = math.prod(dec.observation_shape)
    nA = dec.num_actions
    cells = max(nS * nA * nS, nS * nO)
    if cells > max_cells:
        raise ProductTooLarge(
            f"composed instance needs {cells} cells (limit {max_cells})"
        )
    comps = dec.components
    initial = np.ones(1)
    emission = np.ones((1, 1))
    transition = np.ones((1, nA, 1))
    reward = np.zeros((1, nA, 1))
    for c in comps:
        initial = np.kron(initial, c.initial)
        emission = np.kron(emission, c.emission)
        transition = np.stack(
            [np.kron(transition[:, a, :], c.transition[:, a, :]) for a in range(nA)], axis=1
        )
        reward = _add_reward(reward, c.reward)
    return validate_instance(
        {
            "num_states": nS,
            "num_observations": nO,
            "num_actions": nA,
            "horizon": dec.horizon,
            "initial": initial,
            "transition": transition,
            "emission": emission,
            "reward": reward,
        }
    )


def _add_reward(prev, comp):
    # (k, A, k) + (n, A, n) -> (k*n, A, k*n), joint index i*n + j
    k, nA, _ = prev.shape
    n = comp.shape[0]
    out = prev[:, None, :, :, None] + comp[None, :, :, None, :]
    return out.reshape(k * n, nA, k * n)


def joint_index(parts: Sequence[int], shape: Sequence[int]) -> int:
    return int(np.ravel_multi_index(tuple(int(p) for p in parts), tuple(shape)))


def split_index(index: int, shape: Sequence[int]) -> tuple:
    return tuple(int(i) for i in np.unravel_index(int(index), tuple(shape)))


# --- seeded generation -----------------------------------------------------


def _rng(seed):
    """Counter-based Philox stream keyed by a SeedSequence of ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def sub_seed(seed: int, index: int) -> int:
    """Deterministic child seed for component ``index`` of ``seed``."""
    state = np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)
    return int(state[0])


def _random_rows(rng, shape):
    raw = rng.random(shape)
    return raw / raw.sum(axis=-1, keepdims=True)


def generate_random_instance(
    seed: int, num_states: int, num_observations: int, num_actions: int, horizon: int
) -> PomdpInstance:
    """Random instance: uniform(0, 1) entries normalized per row, uniform(0, 1) rewards.

    Draw order is initial, transition, emission, reward, so the result is a
    pure function of ``(seed, dims)``.
    """
    for name, v in (
        ("num_states", num_states),
        ("num_observations", num_observations),
        ("num_actions", num_actions),
        ("horizon", horizon),
    ):
        if int(v) < 1:
            raise DimensionMismatch(f"{name} must be >= 1, got {v}")
    rng = _rng(seed)
    nS, nO, nA = num_states, num_observations, num_actions
    initial = _random_rows(rng, (nS,))
    transition = _random_rows(rng, (nS, nA, nS))
    emission = _random_rows(rng, (nS, nO))
    reward = rng.random((nS, nA, nS))
    return validate_instance(
        {
            "num_states": nS,
            "num_observations": nO,
            "num_actions": nA,
            "horizon": horizon,
            "initial": initial,
            "transition": transition,
            "emission": emission,
            "reward": reward,
        }
    )


def generate_random_decomposable(
    seed: int,
    num_components: int,
    num_states,
    num_observations,
    num_actions: int,
    horizon: int,
) -> DecomposablePomdp:
    """``num_states``/``num_observations`` may be ints or per-component sequences."""
    if int(num_components) < 1:
        raise DimensionMismatch("num_components must be >= 1")
    M = int(num_components)
    states = [num_states] * M if np.isscalar(num_states) else list(num_states)
    obs = [num_observations] * M if np.isscalar(num_observations) else list(num_observations)
    if len(states) != M or len(obs) != M:
        raise DimensionMismatch("per-component sizes must have one entry per component")
    comps = tuple(
        generate_random_instance(sub_seed(seed, m), states[m], obs[m], num_actions, horizon)
        for m in range(M)
    )
    return DecomposablePomdp(int(num_actions), int(horizon), comps)


def count_deterministic_policies(num_obs: int, num_actions: int, horizon: int):
    """Return ``(|A|^(|O| T), floor(log10))`` computed exactly."""
    if min(num_obs, num_actions, horizon) < 1:
        raise ValueError("all arguments must be >= 1")
    count = int(num_actions) ** (int(num_obs) * int(horizon))
    return count, len(str(count)) - 1


def conditional_state_given_obs(instance: PomdpInstance, prev_state, prev_action, obs):
    """Posterior ``p(s | s', a', o)`` over the current state.

    Returns the all-zero vector when ``o`` cannot be emitted after
    ``(s', a')``.
    """
    joint = instance.emission[:, obs] * instance.transition[prev_state, prev_action, :]
    total = joint.sum()
    if total <= 0.0:
        return np.zeros(instance.num_states)
    return joint / total


def conditional_state_table(instance: PomdpInstance):
    """All posteriors at once, indexed ``[s', a', o, s]``."""
    joint = instance.transition[:, :, None, :] * instance.emission.T[None, None, :, :]
    total = joint.sum(axis=3, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(total > 0.0, joint / np.where(total > 0, total, 1.0), 0.0)
    return out


def posterior_given_observation(prior, emission, obs):
    """Bayes filter ``b(s) ∝ p(o|s) prior(s)``; raises if ``o`` is impossible."""
    post = emission[:, obs] * prior
    total = post.sum()
    if total <= 0.0:
        raise ImpossibleObservation(f"observation {obs} has probability 0 under the prior")
    return post / total


# --- JSON instance files -----------------------------------------------------


def instance_to_json(obj) -> dict:
    if isinstance(obj, PomdpInstance):
        return {"format_version": FORMAT_VERSION, "kind": "pomdp", **obj.to_dict()}
    if isinstance(obj, DecomposablePomdp):
        return {
            "format_version": FORMAT_VERSION,
            "kind": "decomposable",
            "num_actions": obj.num_actions,
            "horizon": obj.horizon,
            "components": [c.to_dict(include_shared=False) for c in obj.components],
        }
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def instance_from_json(doc: Mapping[str, Any]):
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise InvalidInstance(f"unsupported format_version {version!r}")
    kind = doc.get("kind")
    if kind == "pomdp":
        return validate_instance(doc)
    if kind == "decomposable":
        return validate_decomposable(doc)
    raise InvalidInstance(f"unknown instance kind {kind!r}")


def atomic_write_text(path, text: str):
    """Write-then-rename so failures never leave partial files."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_instance(obj, path):
    atomic_write_text(path, json.dumps(instance_to_json(obj), indent=1) + "\n")


def load_instance(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return instance_from_json(doc)
