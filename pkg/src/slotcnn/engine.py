"""Inference driver, operation metrics, and the cost model.

:func:`infer` encrypts packed inputs, aligns the level budget, applies every
layer's slot construction, and decrypts the batch, collecting one metrics
row per layer from the backend's operation counter.  Costs are priced from
per-level operation histograms, so :func:`estimate_cost` can re-price a
finished run under a different level budget without re-running it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import packing
from .errors import SlotCnnError
from .he_backend import Backend, diff_snapshots
from .layers import (
    CipherState,
    LayoutState,
    apply_layer,
    drop_level,
    fc_operation_counts,
    valid_positions,
)
from .model import FC, ModelSpec, reference_infer, trace_layout, validate

__all__ = [
    "CostModel",
    "LayerMetrics",
    "OpMetrics",
    "infer",
    "run_inference",
    "estimate_cost",
    "verify_against_oracle",
]


@dataclass
class CostModel:
    """Abstract per-operation prices as a function of ring size and level.

    Rotations dominate (quasi-linear in the ring size and quadratic in the
    level), ciphertext products cost ``kappa`` plaintext products, and
    additions are level-independent.
    """

    kappa: float = 3.0

    def price(self, kind: str, poly_degree: int, level: int) -> float:
        n = float(poly_degree)
        if kind == "rotation":
            return n * math.log2(n) * level * level
        if kind == "pt_mult":
            return n * level
        if kind == "ct_mult":
            return self.kappa * n * level
        if kind == "add":
            return n
        raise ValueError(f"unknown operation kind {kind!r}")


@dataclass
class LayerMetrics:
    """Operation counts one layer added to the schedule."""

    name: str
    rotations: int
    pt_mults: int
    ct_mults: int
    adds: int
    level_after: int
    est_cost: float
    hist: dict = field(default_factory=dict, repr=False)
    detail: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "layer": self.name,
            "rotations": self.rotations,
            "pt_mults": self.pt_mults,
            "ct_mults": self.ct_mults,
            "adds": self.adds,
            "level_after": self.level_after,
            "est_cost": self.est_cost,
        }


@dataclass
class OpMetrics:
    """Per-layer metrics plus the run-wide facts cost re-pricing needs."""

    per_layer: list
    poly_degree: int
    depth: int
    total_mults: int
    input_channels: int

    def totals(self) -> dict:
        return {
            "rotations": sum(r.rotations for r in self.per_layer),
            "pt_mults": sum(r.pt_mults for r in self.per_layer),
            "ct_mults": sum(r.ct_mults for r in self.per_layer),
            "adds": sum(r.adds for r in self.per_layer),
            "est_cost": sum(r.est_cost for r in self.per_layer),
        }

    def to_dict(self) -> dict:
        return {"per_layer": [r.to_dict() for r in self.per_layer], "totals": self.totals()}


def _metrics_row(name, before, backend, level_after, cost_model, poly_degree) -> LayerMetrics:
    totals, hist = diff_snapshots(before, backend.counter.snapshot())
    est = sum(count * cost_model.price(kind, poly_degree, lvl) for (kind, lvl), count in hist.items())
    return LayerMetrics(
        name=name,
        rotations=totals["rotations"],
        pt_mults=totals["pt_mults"],
        ct_mults=totals["ct_mults"],
        adds=totals["adds"],
        level_after=level_after,
        est_cost=est,
        hist=hist,
    )


def infer(m: ModelSpec, packed_inputs, params, plan, n_samples=None, cost_model=None, backend=None):
    """Run one encrypted inference over a packed batch.

    ``packed_inputs`` is the per-channel plain vector list produced by
    :func:`slotcnn.packing.batch_pack`.  Returns ``(outputs, metrics)``
    where ``outputs`` has one flat vector per sample slot (``n_samples``
    of them, or one per batch offset when not given).
    """
    report = validate(m, params)
    if not report.ok:
        lines = "; ".join(v["message"] for v in report.violations)
        raise SlotCnnError(f"model failed validation: {lines}")
    backend = backend or Backend(params)
    cost_model = cost_model or CostModel()
    n = params.poly_degree

    cts = [backend.encrypt(backend.encode(pv.values)) for pv in packed_inputs]
    layout = LayoutState(
        interval=1,
        w_img=m.width,
        h_img=m.height,
        w_in=m.width,
        h_in=m.height,
        channels=m.channels,
        pending_const=1.0,
        gaps_zero=True,
        batch_offsets=plan.offsets,
        footprint=plan.footprint,
    )
    state = CipherState(cts, layout)

    static_rows = trace_layout(m)
    total_mults = sum(r.mults for r in static_rows)
    per_layer = []
    if m.layers:
        before = backend.counter.snapshot()
        state = drop_level(backend, state, total_mults)
        per_layer.append(_metrics_row("Drop Level", before, backend, state.level, cost_model, n))
    for layer, static in zip(m.layers, static_rows):
        before = backend.counter.snapshot()
        state = apply_layer(backend, state, layer)
        row = _metrics_row(static.name, before, backend, state.level, cost_model, n)
        if isinstance(layer, FC):
            row.detail = fc_operation_counts(layer.dat_in, layer.dat_out)
        per_layer.append(row)

    decrypted = [backend.decrypt(ct) for ct in state.cts]
    final = state.layout
    positions = valid_positions(final)
    count = plan.capacity if n_samples is None else n_samples
    outputs = []
    for off in plan.offsets[:count]:
        vec = np.concatenate([decrypted[ch][off + positions] for ch in range(final.channels)])
        if final.pending_const != 1.0:
            vec = vec * final.pending_const
        outputs.append(vec)

    metrics = OpMetrics(
        per_layer=per_layer,
        poly_degree=n,
        depth=params.depth,
        total_mults=total_mults,
        input_channels=m.channels,
    )
    return outputs, metrics


def run_inference(m: ModelSpec, samples, params, alignment: int = 1, plan=None, cost_model=None, backend=None):
    """Plan, pack, and infer a batch of raw samples.

    Returns ``(outputs, metrics, plan)``.
    """
    if plan is None:
        plan = packing.footprint(m, params, alignment)
    flat = [packing.flatten_input(s) for s in samples]
    plains = packing.batch_pack(flat, plan)
    outputs, metrics = infer(
        m, plains, params, plan, n_samples=len(samples), cost_model=cost_model, backend=backend
    )
    return outputs, metrics, plan


def estimate_cost(metrics: OpMetrics, params, depth_override=None, cost_model=None) -> float:
    """Re-price a finished run, optionally under a different level budget.

    Only the level-alignment row depends on the budget: a deeper budget
    means more alignment products, each at a higher level.  Every other
    layer's per-level histogram is priced as recorded.
    """
    cost_model = cost_model or CostModel()
    n = params.poly_degree
    depth = metrics.depth if depth_override is None else depth_override
    if depth < metrics.total_mults:
        raise ValueError(f"budget {depth} cannot run a model needing {metrics.total_mults} levels")
    total = 0.0
    for row in metrics.per_layer:
        if row.name == "Drop Level":
            for lvl in range(metrics.total_mults + 1, depth + 1):
                total += metrics.input_channels * cost_model.price("pt_mult", n, lvl)
        else:
            total += sum(count * cost_model.price(kind, n, lvl) for (kind, lvl), count in row.hist.items())
    return total


def verify_against_oracle(m: ModelSpec, params, n_trials: int = 20, seed: int = 0, tol: float = 1e-9, alignment: int = 1) -> dict:
    """Compare batched encrypted inference against the plaintext oracle.

    Draws ``n_trials`` uniform random samples, runs them through the slot
    schedule in capacity-sized batches, and reports the worst and mean
    absolute output error plus the argmax agreement rate.
    """
    rng = np.random.default_rng(seed)
    plan = packing.footprint(m, params, alignment)
    max_err = 0.0
    err_sum = 0.0
    agree = 0
    done = 0
    while done < n_trials:
        k = min(n_trials - done, plan.capacity)
        samples = rng.uniform(0.0, 1.0, size=(k, m.channels, m.height, m.width))
        outputs, _, _ = run_inference(m, samples, params, plan=plan)
        for i in range(k):
            ref = reference_infer(m, samples[i])
            err = float(np.max(np.abs(outputs[i] - ref))) if ref.size else 0.0
            max_err = max(max_err, err)
            err_sum += err
            if np.argmax(outputs[i]) == np.argmax(ref):
                agree += 1
        done += k
    return {
        "trials": n_trials,
        "max_abs_err": max_err,
        "mean_abs_err": err_sum / n_trials if n_trials else 0.0,
        "argmax_agreement": agree / n_trials if n_trials else 1.0,
        "tol": tol,
        "ok": max_err <= tol,
    }
