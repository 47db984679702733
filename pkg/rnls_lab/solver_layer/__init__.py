# Numerical solvers
