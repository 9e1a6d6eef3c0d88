"""Hamilton cycles in random geometric graphs at the k-connectivity threshold.

Modules: geom (points, edge process), conn (connectivity, thresholds), kdecomp
(Hamilton decompositions of complete graphs), forestpack (linear forests in
clique-plus-bipartite graphs), cells (tessellation, rings), builder (the
deterministic construction), oracle (exact small-n answers), verify
(certificate checks), harness (experiments, SVG), cli.
"""
from ._accel import backend
from .builder import BuilderConfig, StructuredFailure, build
from .certificate import CycleCertificate
from .geom import EdgeProcess, PointSet, edge_process, generate_points

__version__ = "0.1.0"

__all__ = ["BuilderConfig", "CycleCertificate", "EdgeProcess", "PointSet", "StructuredFailure",
           "backend", "build", "edge_process", "generate_points", "__version__"]
