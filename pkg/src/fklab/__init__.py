"""fklab: finite and p-adic Schrodinger semigroups with path-integral checks.

Modules
-------
lattice      grids and index maps for the finite position space
qops         dense operators, Hamiltonians, semigroups, trace norms
paths        cadlag paths, walk and Brownian bridges, path functionals
feynman_kac  Monte Carlo kernel/trace estimators and convergence tables
padic        Q_p arithmetic, the radial jump density, process and bridges,
             and a finite matrix model used as an oracle
cli          seeded batch runs of every experiment, CSV + manifest output
"""

__version__ = "0.1.0"

from . import lattice, qops, paths, feynman_kac, padic, rng  # noqa: F401
