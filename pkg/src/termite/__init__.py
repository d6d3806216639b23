"""termite: a prover for termination, nontermination, and CTL properties
of integer transition systems.

The package is organized bottom-up:

- ir: program representation (linear terms, atoms, transitions, traces)
- t2parse / t2out: the T2 text format, DOT output
- transform: preprocessing and cutpoint selection
- linsolve: exact rational linear arithmetic (sat, certificates,
  interpolants, quantifier elimination, optimization)
- formula: small DNF algebra over atoms
- safety: interpolation-based unwinding (reachability prover)
- horn: export of reachability queries as constrained Horn clauses
- termination / nonterm: lexicographic rank-function synthesis and
  recurrent-set search
- ctl: CTL verification by bottom-up precondition computation
- oracle: brute-force explicit-state reference semantics for testing
- cli: the command-line front end
"""

__version__ = "0.1.0"
