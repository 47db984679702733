# Experiments built on the solvers
