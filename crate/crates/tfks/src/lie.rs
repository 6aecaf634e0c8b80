//! Symmetry algebra (under construction).
