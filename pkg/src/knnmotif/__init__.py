"""Counting statistics of k-nearest-neighbor digraphs on random point sets.

Submodules:

- ``geometry``: points, regions, exact kNN queries
- ``pointproc``: seeded binomial/Poisson samplers and fixtures
- ``digraph``: the kNN digraph, R, Q, Q_j, components, marked arcs
- ``motifs``: copies of small patterns and linear statistics of them
- ``closedform``: exact and reference limit constants
- ``montecarlo``: seeded replicate experiments
- ``oracle``: brute-force references
- ``cli``: the ``knnmotif`` command
"""
__version__ = "0.1.0"
