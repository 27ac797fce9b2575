"""Numerical toolkit for regular projections of definable sets and regular covers.

Core pieces:

* :mod:`regcover.expr` — definable expression trees with forward-mode
  derivatives and 1-D root isolation along lines.
* :mod:`regcover.sets` — set models (sign conditions, patches, graph bands,
  unions) with membership, boundary sampling and distance estimation.
* :mod:`regcover.cones` — cones of near-vertical lines, linear projections
  and the cone-complement distance ratio.
* :mod:`regcover.regularity` — branch extraction over cones, weak/strong
  regularity verdicts, projection atlases and rectifiability search.
* :mod:`regcover.blowup` — the power-law branch family whose gradient ratio
  grows like |ln s|, plus an asymptotic-exponent estimator.
* :mod:`regcover.covers` — regular-cover construction and verification.
* :mod:`regcover.cli` — JSON scenario front end (``regcover run ...``).
"""

__version__ = "0.1.0"
