"""Static structure of an interaction space: entities, interactions, states.

An interaction ``i = (a_1, ..., a_n, r, alpha, p)`` lets agents ``a_j`` act
on a patient ``p`` through a propagator ``r``. Every entity carries a
:class:`StateVector` made of activations (one per interaction), goods (one
per interaction it propagates) and a proper state value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Mapping

from .clocks import DEFAULT_EPS, TimeEventSet
from .errors import (ActivationOutOfRange, BadTimeInterval, EmptyParts, EmptyZeroSet,
                     GoodsMismatch, MissingInitialState, NotSimultaneous,
                     StartArrivalViolation, UnknownEntity, UnknownInteraction, UnknownType,
                     ValidationError, ZeroResourceViolation)

EntityId = str

# -- spaces -----------------------------------------------------------------

_SPACE_KINDS = ("any", "scalar", "real", "labels", "record", "product")


@dataclass(frozen=True)
class Space:
    """Descriptor for a proper state space or a resource space.

    ``real`` holds fixed-length tuples of floats, ``scalar`` a bare float,
    ``labels`` one of a finite set of strings/ints, ``record`` a dict of named
    sub-values and ``product`` a tuple with one value per part.
    """

    kind: str = "any"
    dim: int | None = None
    labels: tuple = ()
    fields: tuple[tuple[str, "Space"], ...] = ()
    parts: tuple["Space", ...] = ()

    def __post_init__(self):
        if self.kind not in _SPACE_KINDS:
            raise ValidationError(f"unknown space kind {self.kind!r}")
        if self.kind == "real" and (self.dim is None or self.dim < 1):
            raise ValidationError("real space needs dim >= 1")

    @classmethod
    def real(cls, dim: int) -> "Space":
        return cls("real", dim=dim)

    @classmethod
    def scalar(cls) -> "Space":
        return cls("scalar")

    @classmethod
    def of_labels(cls, *labels) -> "Space":
        return cls("labels", labels=tuple(labels))

    @classmethod
    def record(cls, **fields: "Space") -> "Space":
        return cls("record", fields=tuple(sorted(fields.items())))

    @classmethod
    def product(cls, *parts: "Space") -> "Space":
        return cls("product", parts=tuple(parts))

    def coerce(self, value: Any) -> Any:
        """Normalize ``value`` into this space's canonical representation.

        Raises ``ValueError`` when the value does not belong to the space.
        """
        k = self.kind
        if k == "any":
            return _freeze(value)
        if k == "scalar":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValueError(f"expected a real number, got {value!r}")
            return float(value)
        if k == "real":
            try:
                vals = tuple(float(v) for v in value)
            except TypeError:
                raise ValueError(f"expected a real vector, got {value!r}") from None
            if len(vals) != self.dim:
                raise ValueError(f"expected dimension {self.dim}, got {len(vals)}")
            return vals
        if k == "labels":
            if value not in self.labels:
                raise ValueError(f"{value!r} is not one of {list(self.labels)}")
            return value
        if k == "record":
            if not isinstance(value, Mapping) or set(value) != {n for n, _ in self.fields}:
                raise ValueError(f"record fields must be {[n for n, _ in self.fields]}")
            return {n: s.coerce(value[n]) for n, s in self.fields}
        # product
        vals = tuple(value)
        if len(vals) != len(self.parts):
            raise ValueError(f"expected {len(self.parts)} components")
        return tuple(s.coerce(v) for s, v in zip(self.parts, vals))

    def contains(self, value: Any) -> bool:
        try:
            self.coerce(value)
        except (ValueError, TypeError):
            return False
        return True

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind}
        if self.kind == "real":
            d["dim"] = self.dim
        elif self.kind == "labels":
            d["labels"] = list(self.labels)
        elif self.kind == "record":
            d["fields"] = {n: s.to_dict() for n, s in self.fields}
        elif self.kind == "product":
            d["parts"] = [s.to_dict() for s in self.parts]
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Space":
        kind = d.get("kind", "any")
        if kind == "real":
            return cls.real(int(d["dim"]))
        if kind == "labels":
            return cls.of_labels(*d["labels"])
        if kind == "record":
            return cls.record(**{n: cls.from_dict(s) for n, s in d["fields"].items()})
        if kind == "product":
            return cls.product(*(cls.from_dict(s) for s in d["parts"]))
        return cls(kind)


def _freeze(value):
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


# -- zero resources ---------------------------------------------------------

@dataclass(frozen=True)
class ZeroSet:
    """Membership test for the zero resources of an interaction.

    ``equals``: goods equal to ``value``; ``in``: goods among ``value``;
    ``le``: scalar goods ``<= value``.
    """

    kind: str
    value: Any

    def __post_init__(self):
        if self.kind not in ("equals", "in", "le"):
            raise ValidationError(f"unknown zero-set kind {self.kind!r}")
        if self.kind == "in":
            object.__setattr__(self, "value", tuple(_freeze(v) for v in self.value))
        else:
            object.__setattr__(self, "value", _freeze(self.value))

    def __call__(self, goods) -> bool:
        if self.kind == "equals":
            return goods == self.value
        if self.kind == "in":
            return goods in self.value
        try:
            return float(goods) <= self.value
        except (TypeError, ValueError):
            return False

    def is_nonempty(self, space: Space) -> bool:
        if self.kind == "equals":
            return space.contains(self.value)
        if self.kind == "in":
            return any(space.contains(v) for v in self.value)
        return space.kind in ("scalar", "any") or (space.kind == "real" and space.dim == 1)

    def to_dict(self) -> dict:
        v = list(self.value) if isinstance(self.value, tuple) else self.value
        return {"kind": self.kind, "value": v}


# -- interactions -----------------------------------------------------------

@dataclass(frozen=True)
class Interaction:
    id: str
    agents: tuple = ()
    propagator: Any = None
    itype: Any = None
    patient: Any = None
    resource_space: Space = Space()
    zero_set: Callable[[Any], bool] | None = None

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))

    @property
    def entities(self) -> frozenset:
        """All entities playing a role in the interaction."""
        ents = set(self.agents)
        for x in (self.propagator, self.patient):
            ents.update(x if isinstance(x, tuple) else (x,))
        return frozenset(ents)

    def activation(self, state: "StateVector") -> float:
        return state.activation.get(self.id, 0.0)


@dataclass(frozen=True)
class VectorInteraction(Interaction):
    """Simultaneous composition of interactions; activations multiply."""

    parts: tuple[str, ...] = ()

    def activation(self, state: "StateVector") -> float:
        out = 1.0
        for part in self.parts:
            out *= state.activation.get(part, 0.0)
        return out


# -- states -----------------------------------------------------------------

@dataclass(frozen=True)
class StateVector:
    activation: Mapping[str, float] = field(default_factory=dict)
    goods: Mapping[str, Any] = field(default_factory=dict)
    proper: Any = None

    def with_proper(self, proper) -> "StateVector":
        return replace(self, proper=proper)

    def with_activation(self, **updates: float) -> "StateVector":
        return replace(self, activation={**self.activation, **updates})

    def with_goods(self, **updates) -> "StateVector":
        return replace(self, goods={**self.goods, **updates})

    def to_dict(self) -> dict:
        return {"activation": dict(sorted(self.activation.items())),
                "goods": {k: _thaw(v) for k, v in sorted(self.goods.items())},
                "proper": _thaw(self.proper)}


def _thaw(value):
    if isinstance(value, tuple):
        return [_thaw(v) for v in value]
    if isinstance(value, dict):
        return {k: _thaw(v) for k, v in value.items()}
    return value


# -- model ------------------------------------------------------------------

@dataclass(frozen=True)
class Model:
    """Validated, immutable declaration of an interaction space.

    Build instances with :func:`build_model`.
    """

    entities: Mapping[EntityId, Space]
    t_start: float
    t_end: float
    types: frozenset
    interactions: Mapping[str, Interaction]
    run_data: Mapping[str, Any]
    delta: float
    transitions: Mapping[EntityId, Any]
    initial_states: Mapping[EntityId, StateVector]
    propagated_by: Mapping[EntityId, tuple[str, ...]] = field(default=None, compare=False, repr=False)
    acting_on: Mapping[EntityId, tuple[str, ...]] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        prop: dict[str, list[str]] = {e: [] for e in self.entities}
        acting: dict[str, list[str]] = {e: [] for e in self.entities}
        for iid, it in self.interactions.items():
            prop[it.propagator].append(iid)
            acting[it.patient].append(iid)
        object.__setattr__(self, "propagated_by", {e: tuple(v) for e, v in prop.items()})
        object.__setattr__(self, "acting_on", {e: tuple(v) for e, v in acting.items()})

    def interaction(self, iid: str) -> Interaction:
        try:
            return self.interactions[iid]
        except KeyError:
            raise UnknownInteraction(f"no interaction {iid!r}", path=f"interactions.{iid}") from None


def roles_of(model: Model, iid: str) -> tuple[tuple, Any, Any, Any]:
    """``(agents, propagator, type, patient)`` of interaction ``iid``."""
    it = model.interaction(iid)
    return it.agents, it.propagator, it.itype, it.patient


def _as_state(raw, path: str) -> StateVector:
    if isinstance(raw, StateVector):
        return raw
    if not isinstance(raw, Mapping):
        raise ValidationError(f"state must be a mapping, got {type(raw).__name__}", path=path)
    extra = set(raw) - {"activation", "goods", "proper"}
    if extra:
        raise ValidationError(f"unknown state fields {sorted(extra)}", path=path)
    return StateVector(dict(raw.get("activation", {})), dict(raw.get("goods", {})), raw.get("proper"))


def _as_interaction(iid: str, raw) -> Interaction:
    if isinstance(raw, Interaction):
        if raw.id != iid:
            raise ValidationError(f"interaction id {raw.id!r} filed under {iid!r}", path=f"interactions.{iid}")
        return raw
    if isinstance(raw, (tuple, list)):
        # (a_1, ..., a_n, r, alpha, p)
        if len(raw) < 3:
            raise ValidationError("an interaction tuple needs at least (r, alpha, p)", path=f"interactions.{iid}")
        *agents, r, alpha, p = raw
        return Interaction(iid, tuple(agents), r, alpha, p)
    d = dict(raw)
    return Interaction(iid, tuple(d.get("agents", ())), d.get("propagator"), d.get("type", d.get("itype")),
                       d.get("patient"), d.get("resource_space", Space()), d.get("zero_set"))


def build_model(declaration: Mapping[str, Any]) -> Model:
    """Validate a declaration and freeze it into a :class:`Model`.

    Recognized keys: ``entities`` (mapping id -> :class:`Space`, or an
    iterable of ids), ``t_start``, ``t_end``, ``types``, ``interactions``
    (mapping id -> :class:`Interaction` / tuple ``(a.., r, alpha, p)`` /
    dict), ``run_data``, ``delta``, ``transitions``, ``initial_states``.
    Raises the first violated invariant as a :class:`ValidationError`
    subclass carrying the offending path.
    """
    from .runtime import RunData, check_run_data
    from .transitions import Constant

    decl = dict(declaration)
    unknown = set(decl) - {"entities", "t_start", "t_end", "types", "interactions", "run_data",
                           "delta", "transitions", "initial_states"}
    if unknown:
        raise ValidationError(f"unknown declaration fields {sorted(unknown)}")

    t_start = float(decl.get("t_start", 0.0))
    t_end = float(decl.get("t_end", math.inf))
    if math.isnan(t_start) or math.isnan(t_end) or not t_start < t_end or t_start == math.inf:
        raise BadTimeInterval(f"need t_start < t_end, got [{t_start}, {t_end}]", path="t_end")

    raw_entities = decl.get("entities", {})
    if isinstance(raw_entities, Mapping):
        entities = {}
        for e, sp in raw_entities.items():
            if not isinstance(e, str):
                raise ValidationError(f"entity ids must be strings, got {e!r}", path="entities")
            entities[e] = sp if isinstance(sp, Space) else Space.from_dict(sp or {})
    else:
        entities = {}
        for e in raw_entities:
            if not isinstance(e, str):
                raise ValidationError(f"entity ids must be strings, got {e!r}", path="entities")
            entities[e] = Space()

    raw_inter = decl.get("interactions", {})
    if not isinstance(raw_inter, Mapping):
        raw_inter = {it.id: it for it in raw_inter}
    interactions = {iid: _as_interaction(iid, raw) for iid, raw in raw_inter.items()}

    types = decl.get("types")
    types = frozenset(types) if types is not None else frozenset(it.itype for it in interactions.values())

    for iid, it in interactions.items():
        base = f"interactions.{iid}"
        for k, a in enumerate(it.agents):
            if a not in entities:
                raise UnknownEntity(f"agent {a!r} is not a declared entity", path=f"{base}.agents[{k}]")
        for role in ("propagator", "patient"):
            e = getattr(it, role)
            if e not in entities:
                raise UnknownEntity(f"{role} {e!r} is not a declared entity", path=f"{base}.{role}")
        if it.itype not in types:
            raise UnknownType(f"type {it.itype!r} is not in the type set", path=f"{base}.type")
        if not isinstance(it.resource_space, Space):
            raise ValidationError("resource_space must be a Space", path=f"{base}.resource_space")
        if it.zero_set is not None:
            if not callable(it.zero_set):
                raise ValidationError("zero_set must be a predicate", path=f"{base}.zero_set")
            if isinstance(it.zero_set, ZeroSet) and not it.zero_set.is_nonempty(it.resource_space):
                raise EmptyZeroSet("zero set has no element in the resource space", path=f"{base}.zero_set")

    raw_rd = dict(decl.get("run_data", {}))
    for iid in raw_rd:
        if iid not in interactions:
            raise UnknownInteraction(f"run data for undeclared interaction {iid!r}", path=f"run_data.{iid}")
    run_data = {iid: raw_rd.get(iid, RunData()) for iid in interactions}
    for iid, rd in run_data.items():
        check_run_data(rd, t_start, t_end, path=f"run_data.{iid}")

    delta = decl.get("delta", 0.0)
    delta = float(delta)
    if math.isnan(delta) or delta < 0:
        raise ValidationError(f"delta must be >= 0, got {delta}", path="delta")

    raw_tr = dict(decl.get("transitions", {}))
    for e, f in raw_tr.items():
        if e not in entities:
            raise UnknownEntity(f"transition for undeclared entity {e!r}", path=f"transitions.{e}")
        if not callable(f):
            raise ValidationError("transition must be callable", path=f"transitions.{e}")
    transitions = {e: raw_tr.get(e, Constant()) for e in entities}

    raw_init = dict(decl.get("initial_states", {}))
    for e in raw_init:
        if e not in entities:
            raise UnknownEntity(f"initial state for undeclared entity {e!r}", path=f"initial_states.{e}")
    initial: dict[str, StateVector] = {}
    for e, space in entities.items():
        base = f"initial_states.{e}"
        if e not in raw_init:
            raise MissingInitialState(f"no initial state for entity {e!r}", path=base)
        sv = _as_state(raw_init[e], base)
        activation = {}
        for iid, v in sv.activation.items():
            if iid not in interactions:
                raise UnknownInteraction(f"activation for undeclared interaction {iid!r}",
                                         path=f"{base}.activation.{iid}")
            try:
                v = float(v)
            except (TypeError, ValueError):
                raise ActivationOutOfRange(f"activation {v!r} is not a number",
                                           path=f"{base}.activation.{iid}") from None
            if not 0.0 <= v <= 1.0:
                raise ActivationOutOfRange(f"activation {v} outside [0, 1]", path=f"{base}.activation.{iid}")
            activation[iid] = v
        propagated = {iid for iid, it in interactions.items() if it.propagator == e}
        if set(sv.goods) != propagated:
            raise GoodsMismatch(f"goods keys {sorted(sv.goods)} must be exactly the propagated "
                                f"interactions {sorted(propagated)}", path=f"{base}.goods")
        goods = {}
        for iid in sorted(propagated):
            try:
                goods[iid] = interactions[iid].resource_space.coerce(sv.goods[iid])
            except (ValueError, TypeError) as exc:
                raise ValidationError(f"goods not in resource space: {exc}", path=f"{base}.goods.{iid}") from None
        try:
            proper = space.coerce(sv.proper)
        except (ValueError, TypeError) as exc:
            raise ValidationError(f"proper state not in state space: {exc}", path=f"{base}.proper") from None
        initial[e] = StateVector(dict(sorted(activation.items())), goods, proper)

    for iid, it in interactions.items():
        if it.zero_set is not None and it.zero_set(initial[it.propagator].goods[iid]):
            if initial[it.patient].activation.get(iid, 0.0) != 0.0:
                raise ZeroResourceViolation(
                    f"goods of {iid!r} are zero resources but patient {it.patient!r} is active for it",
                    path=f"initial_states.{it.patient}.activation.{iid}")

    return Model(entities, t_start, t_end, types, interactions, run_data, delta, transitions, initial)


def make_vector_interaction(model: Model, parts: Iterable[str]) -> VectorInteraction:
    """Compose simultaneous interactions into one vector interaction.

    Agents concatenate, propagators and types become tuples, the patient
    collapses to a single entity when every part acts on it. The resource
    space is the product of the parts' resource spaces.
    """
    parts = tuple(parts)
    if not parts:
        raise EmptyParts("a vector interaction needs at least one part")
    its = [model.interaction(iid) for iid in parts]
    first = model.run_data[parts[0]]
    for iid in parts[1:]:
        rd = model.run_data[iid]
        if rd.start != first.start or rd.ongoing != first.ongoing:
            raise NotSimultaneous(f"{iid!r} does not share the clocks of {parts[0]!r}", path=f"run_data.{iid}")
    patients = tuple(it.patient for it in its)
    patient = patients[0] if len(set(patients)) == 1 else patients
    return VectorInteraction(
        id="(" + ",".join(parts) + ")",
        agents=tuple(a for it in its for a in it.agents),
        propagator=tuple(it.propagator for it in its),
        itype=tuple(it.itype for it in its),
        patient=patient,
        resource_space=Space.product(*(it.resource_space for it in its)),
        zero_set=None,
        parts=parts,
    )


def start_arrival_conflicts(start: TimeEventSet, ongoing: TimeEventSet, eps: float = DEFAULT_EPS) -> list[float]:
    """Start instants whose derived arrival would precede them.

    A start at ``t`` strictly after the left end of an ongoing interval that
    still contains ``t`` gets that left end as arrival, which breaks the
    start-arrival ordering.
    """
    bad = []
    for c, d in ongoing.intervals:
        for e in start.elements:
            lo, hi = max(e.lo, c), min(e.hi, d)
            # overlap of the start element with the half-open (c, d]
            if hi > c + eps and lo <= hi:
                bad.append(max(lo, c + eps) if not e.is_point else e.lo)
    return bad


def _check_start_arrival(start: TimeEventSet, ongoing: TimeEventSet, path: str) -> None:
    bad = start_arrival_conflicts(start, ongoing)
    if bad:
        raise StartArrivalViolation(f"start at {bad[0]} would arrive before it starts", path=path)
