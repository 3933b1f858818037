"""
Catalogue of increasing events on a quad's domain, as vectorised indicators.

Each entry maps a bit matrix (rows are configurations) to a boolean vector,
the form exact_probability(..., vectorized=True) and exact_expectation expect.
Used for FKG and boundary-condition comparisons over enumerated measures.
"""
from __future__ import annotations

import logging
from typing import Callable, Dict, Iterable, Optional

import numpy as np

from src.errors import InvalidParams
from src.lattice.domain import Annulus, Quad
from src.model.arms import one_arm_event
from src.model.connectivity import crossing_event

logger = logging.getLogger(__name__)

Event = Callable[[np.ndarray], np.ndarray]


def _edge_open(k: int) -> Event:
    def event(bits: np.ndarray) -> np.ndarray:
        return bits[:, k]

    return event


def increasing_events(quad: Quad, annulus: Optional[Annulus] = None,
                      edges: Optional[Iterable[int]] = None) -> Dict[str, Event]:
    """Single open edges, both crossings of the quad and, with an annulus, the one-arm event."""
    dom = quad.domain
    edges = range(dom.n_edges) if edges is None else list(edges)
    events: Dict[str, Event] = {}
    for k in edges:
        if not 0 <= k < dom.n_edges:
            raise InvalidParams(f"edge index {k} out of range for {dom.n_edges} edges")
        events[f"edge{k}"] = _edge_open(k)
    events["cross-ab-cd"] = crossing_event(quad)
    events["cross-bc-da"] = crossing_event(quad.rotated())
    if annulus is not None:
        events["one-arm"] = one_arm_event(dom, annulus)
    logger.debug(f"[events] catalogue of {len(events)} increasing events on {dom!r}")
    return events


def indicator_matrix(events: Dict[str, Event], bits: np.ndarray) -> np.ndarray:
    """Column j is the indicator of the j-th event over the rows of bits."""
    bits = np.asarray(bits, dtype=bool)
    return np.stack([np.asarray(e(bits), dtype=bool) for e in events.values()], axis=1)
