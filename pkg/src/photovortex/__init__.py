"""Ring-profiled vortex solitons in a photorefractive medium, by constrained
Ritz-Galerkin minimization."""
