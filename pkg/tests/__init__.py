# Tests for the gradient-bounded DP solver
