# Gradient-bounded DP solver
