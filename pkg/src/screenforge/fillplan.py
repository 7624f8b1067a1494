"""Progressive form-fill states and mid-typing prefix synthesis.

A layout with N ordered fields yields N+1 states: one pristine form, one
stage per k in 1..N-1 (fields before k complete, field k mid-typing,
fields after k untouched) and one completed form. Static pages (N=0) get
a single completed render. Stage sampling (1/3/5 partials) draws distinct
k values; prefixes are recomputed per config so every variant types
different text.
"""

from __future__ import annotations

import logging
import unicodedata
from dataclasses import dataclass, field
from random import Random

logger = logging.getLogger(__name__)


class BadDensity(Exception):
    pass


class EmptyValue(Exception):
    pass


@dataclass(frozen=True)
class Stage:
    tag: str  # "empty" | "partial" | "full"
    k: int = 0  # stage index, only for partial

    @property
    def name(self) -> str:
        return f"partial_{self.k}" if self.tag == "partial" else self.tag


@dataclass
class FillPlan:
    states: list[Stage]
    density: str  # "all" or "sample(n)"

    @property
    def tags(self) -> list[str]:
        return [s.name for s in self.states]


def plan_states(n_fields: int, density, rng: Random) -> FillPlan:
    """Stage list for a layout with `n_fields` ordered form fields.

    density is "all" or an int n (sample n distinct partial stages).
    """
    if n_fields < 0:
        raise ValueError("n_fields must be >= 0")
    if n_fields == 0:
        return FillPlan([Stage("full")], density="all")
    if density == "all":
        ks = list(range(1, n_fields))
        label = "all"
    else:
        n = int(density)
        if n < 1:
            raise BadDensity(f"partial stage count must be >= 1, got {n}")
        ks = sorted(rng.sample(range(1, n_fields), min(n, n_fields - 1)))
        label = f"sample({n})"
    states = [Stage("empty")] + [Stage("partial", k) for k in ks] + [Stage("full")]
    return FillPlan(states, density=label)


def partial_cut(full_value: str, rng: Random) -> int:
    """Cut length for a strict non-empty prefix; never splits a combined
    character. Length-1 values are degenerate: the whole character is kept."""
    if not full_value:
        raise EmptyValue("cannot take a prefix of an empty value")
    if len(full_value) == 1:
        logger.warning("degenerate mid-typing prefix: value of length 1")
        return 1
    cut = rng.randint(1, len(full_value) - 1)
    while cut < len(full_value) and unicodedata.combining(full_value[cut]):
        cut += 1  # never leave a combining mark stranded at the boundary
    if cut == len(full_value):
        logger.warning("degenerate mid-typing prefix: combining marks reach the end")
    return cut


def partial_value(full_value: str, rng: Random) -> str:
    """Strict non-empty prefix, cut point uniform over 1..len-1."""
    return full_value[:partial_cut(full_value, rng)]


@dataclass
class FillState:
    """Concrete per-field targets for one render."""

    tag: str  # "empty" | "full" | "partial_<k>"
    k: int | None = None
    per_field: dict = field(default_factory=dict)
    # field_id -> "empty" | "full" | ("prefix", cut_length)


def concretize(stage: Stage, fields, config, rng: Random) -> FillState:
    """Bind a stage to actual fields and prefix cuts.

    `fields` are field descriptors ordered by fill_order; `config` supplies
    the typed values whose display strings the prefixes cut into. Dropdowns
    and checkboxes are atomic: at their own mid-typing stage they stay
    untouched.
    """
    from .configgen import display  # local import keeps this module standalone

    ordered = sorted(fields, key=lambda f: f.fill_order)
    state = FillState(tag=stage.name, k=stage.k if stage.tag == "partial" else None)
    for f in ordered:
        if stage.tag == "empty":
            state.per_field[f.field_id] = "empty"
        elif stage.tag == "full":
            state.per_field[f.field_id] = "full"
        elif f.fill_order < stage.k:
            state.per_field[f.field_id] = "full"
        elif f.fill_order > stage.k:
            state.per_field[f.field_id] = "empty"
        elif f.input_kind != "text":
            state.per_field[f.field_id] = "empty"
        else:
            value = display(config.values[f.bound_key])
            state.per_field[f.field_id] = ("prefix", partial_cut(value, rng))
    return state
