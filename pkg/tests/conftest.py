import sys
from pathlib import Path

import numpy as np
import pytest

# make tests/gf2_oracle.py importable regardless of invocation directory
sys.path.insert(0, str(Path(__file__).parent))

from regime_tagger.ph import PersistenceDiagram


def make_diagram(bars, t_max, r=2.0, n_points=None, max_dim=None) -> PersistenceDiagram:
    """Build a diagram from (dim, birth, death, capped) tuples for tests."""
    bars = [b if isinstance(b, tuple) else (b.dim, b.birth, b.death, b.capped) for b in bars]
    dims = np.array([b[0] for b in bars], dtype=np.int8)
    births = np.array([b[1] for b in bars], dtype=float)
    deaths = np.array([b[2] for b in bars], dtype=float)
    capped = np.array([b[3] for b in bars], dtype=bool)
    order = np.lexsort((capped, deaths, births, dims))
    return PersistenceDiagram(
        dims=dims[order],
        births=births[order],
        deaths=deaths[order],
        capped_flags=capped[order],
        t_max=float(t_max),
        r=float(r),
        n_points=int((dims == 0).sum()) if n_points is None else n_points,
        max_dim=int(dims.max()) if max_dim is None and len(bars) else (max_dim or 0),
    )


def bar_tuples(diagram: PersistenceDiagram, drop_zero=True):
    """Diagram as a sorted multiset of (dim, birth, death, capped)."""
    out = []
    for d, b, dth, c in zip(
        diagram.dims, diagram.births, diagram.deaths, diagram.capped_flags
    ):
        if drop_zero and dth == b and not c:
            continue
        out.append((int(d), float(b), float(dth), bool(c)))
    return sorted(out)


@pytest.fixture
def rng():
    return np.random.default_rng(20240809)
