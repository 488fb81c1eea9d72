"""Slot budgeting and batch packing.

One ciphertext carries ``num_slots`` slots, but a single sample only ever
touches a prefix of them.  The footprint planner walks the model and takes
the widest prefix any layer needs: the input image (plus padding space),
the head-room each pooling stage smears values into, the flattened vector,
and the working window of each fully connected layer.  Rounding that width
up to an alignment boundary gives the per-sample stride; whatever multiple
of it fits into the slot count is the batch capacity.  Packing then just
lays samples out at those offsets, and every layer construction tiles its
masks at the same offsets so all samples ride through one schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityExceeded, FootprintOverflow, OversizedInput, ShapeMismatch
from .he_backend import PlainVector
from .model import FC, AvgPool2d, Conv2d, Flatten, ModelSpec, trace_layout

__all__ = ["PackPlan", "flatten_input", "footprint", "batch_pack", "batch_unpack"]


@dataclass(frozen=True)
class PackPlan:
    """Result of footprint planning for one model under one parameter set."""

    footprint: int
    alignment: int
    capacity: int
    offsets: tuple
    per_layer_sizes: tuple
    num_slots: int

    def to_dict(self) -> dict:
        return {
            "footprint": self.footprint,
            "capacity": self.capacity,
            "offsets": list(self.offsets),
            "per_layer_sizes": [dict(entry) for entry in self.per_layer_sizes],
        }


def flatten_input(sample) -> list:
    """Split one ``channels x height x width`` sample into row-major channel vectors."""
    arr = np.asarray(sample, dtype=np.float64)
    if arr.ndim != 3:
        raise ShapeMismatch(f"expected a 3-D sample (channels, height, width), got shape {arr.shape}")
    return [arr[c].reshape(-1) for c in range(arr.shape[0])]


def footprint(m: ModelSpec, params, alignment: int = 1) -> PackPlan:
    """Compute the per-sample slot footprint and batch capacity.

    The footprint is the maximum over all per-layer slot requirements,
    rounded up to ``alignment``.  Raises :class:`FootprintOverflow` when
    even a single sample does not fit into the ciphertext.
    """
    if alignment < 1:
        raise ValueError(f"alignment must be at least 1, got {alignment}")
    rows = trace_layout(m)
    padding_total = sum(l.padding for l in m.layers if isinstance(l, Conv2d))
    sizes = [{"layer": "input", "slots": m.width * m.height + padding_total}]
    for row in rows:
        if isinstance(row.layer, AvgPool2d):
            c = row.layer.kernel
            sizes.append({"layer": row.name, "slots": m.width * m.height + (m.width + 1) * (c - 1)})
        elif isinstance(row.layer, Flatten):
            sizes.append({"layer": row.name, "slots": row.w_in * row.h_in * row.ch_in})
        elif isinstance(row.layer, FC):
            reps = math.ceil(row.layer.dat_in / row.layer.dat_out)
            sizes.append({"layer": row.name, "slots": row.layer.dat_out * reps})
    raw = max(entry["slots"] for entry in sizes)
    aligned = math.ceil(raw / alignment) * alignment
    n = params.num_slots
    if aligned > n:
        raise FootprintOverflow(f"a single sample needs {aligned} slots, ciphertext has {n}")
    capacity = n // aligned
    offsets = tuple(i * aligned for i in range(capacity))
    return PackPlan(
        footprint=aligned,
        alignment=alignment,
        capacity=capacity,
        offsets=offsets,
        per_layer_sizes=tuple(sizes),
        num_slots=n,
    )


def batch_pack(samples, plan: PackPlan) -> list:
    """Combine up to ``plan.capacity`` samples into per-channel plain vectors.

    Each sample is a list of per-channel row-major vectors (the output of
    :func:`flatten_input`).  Sample ``i`` is zero-padded to the slot count,
    rotated right by ``plan.offsets[i]``, and added into the shared vector.
    The returned plaintexts are layout-only; encode them through a backend
    to apply quantization before encryption.
    """
    if len(samples) > plan.capacity:
        raise CapacityExceeded(f"{len(samples)} samples exceed the batch capacity {plan.capacity}")
    if not samples:
        return []
    n_channels = len(samples[0])
    combined = [np.zeros(plan.num_slots) for _ in range(n_channels)]
    for i, sample in enumerate(samples):
        if len(sample) != n_channels:
            raise ShapeMismatch(f"sample {i} has {len(sample)} channels, expected {n_channels}")
        for ch, vec in enumerate(sample):
            vec = np.asarray(vec, dtype=np.float64).reshape(-1)
            if vec.size > plan.footprint:
                raise OversizedInput(f"sample vector of length {vec.size} exceeds the footprint {plan.footprint}")
            padded = np.zeros(plan.num_slots)
            padded[: vec.size] = vec
            combined[ch] = combined[ch] + np.roll(padded, plan.offsets[i])
    return [PlainVector(vec) for vec in combined]


def batch_unpack(values, plan: PackPlan, out_dim: int, count=None) -> list:
    """Slice one decrypted slot vector back into per-sample output vectors."""
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    offsets = plan.offsets if count is None else plan.offsets[:count]
    return [arr[off : off + out_dim].copy() for off in offsets]
