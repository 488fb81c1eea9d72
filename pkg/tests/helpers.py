"""Shared utilities for building and reading synthetic layer states in tests."""

import numpy as np

from slotcnn import Backend, CipherState, HEParams, LayoutState, valid_positions

SMALL_PARAMS = HEParams(poly_degree=2048, depth=11)


def single_layout(channels, h, w, footprint=None, *, interval=1, w_img=None, h_img=None,
                  pending=1.0, gaps_zero=True, offsets=(0,)):
    """Layout for hand-built states: one sample region unless offsets say otherwise.

    ``w_img``/``h_img`` default to the grid dims; pass image dims scaled by the
    interval when emulating a post-stride state.  The footprint defaults to the
    image area, the same convention the planner uses.
    """
    w_img = w if w_img is None else w_img
    h_img = h if h_img is None else h_img
    if footprint is None:
        footprint = w_img * h_img
    return LayoutState(
        interval=interval,
        w_img=w_img,
        h_img=h_img,
        w_in=w,
        h_in=h,
        channels=channels,
        pending_const=pending,
        gaps_zero=gaps_zero,
        batch_offsets=tuple(offsets),
        footprint=footprint,
    )


def build_state(backend, layout, tensor, gap_rng=None):
    """Encrypt a logical (channels, h_in, w_in) tensor into the given layout.

    Slots at valid positions receive value / pending_const so the logical
    value round-trips exactly; gap slots hold zeros, or junk drawn from
    ``gap_rng`` when the layout admits garbage.
    """
    tensor = np.asarray(tensor, dtype=np.float64)
    pos = valid_positions(layout)
    cts = []
    for ch in range(layout.channels):
        region = np.zeros(layout.footprint)
        if gap_rng is not None:
            region[:] = gap_rng.uniform(-2.0, 2.0, layout.footprint)
        region[pos] = tensor[ch].reshape(-1) / layout.pending_const
        full = np.zeros(backend.params.num_slots)
        for off in layout.batch_offsets:
            full[off : off + layout.footprint] = region
        cts.append(backend.encrypt(backend.encode(full)))
    return CipherState(cts, layout)


def read_state(backend, state, offset=None):
    """Decrypt the logical (channels, h_in, w_in) tensor at one sample offset."""
    lay = state.layout
    off = lay.batch_offsets[0] if offset is None else offset
    pos = valid_positions(lay) + off
    planes = [backend.decrypt(ct)[pos] * lay.pending_const for ct in state.cts]
    return np.stack(planes).reshape(lay.channels, lay.h_in, lay.w_in)


def gap_slots(backend, state, offset=None):
    """Decrypted values of the non-valid slots inside one sample region."""
    lay = state.layout
    off = lay.batch_offsets[0] if offset is None else offset
    mask = np.ones(lay.footprint, dtype=bool)
    mask[valid_positions(lay)] = False
    return np.stack([backend.decrypt(ct)[off : off + lay.footprint][mask] for ct in state.cts])


def make_backend(params=SMALL_PARAMS):
    return Backend(params)
