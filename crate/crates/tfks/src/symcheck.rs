//! Numerical symmetry verification (under construction).
