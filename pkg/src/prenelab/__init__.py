"""prene-lab: deterministic simulators for the four desk-scale evolution models.

Subpackages:
    lifespan   -- energy-allocation tree species, exact census tables, growth rates
    replicator -- mutating sequence replicators, immune posters, escape experiments
    soup       -- stochastic well-mixed polymer reactor with catalytic chopping
    registry   -- recognizer-based copy-number bookkeeping over an event log
    cli        -- the `prene-lab` command line entry point
"""

__version__ = "0.1.0"
