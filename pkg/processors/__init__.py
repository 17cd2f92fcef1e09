"""
Numerical processors: special functions, potentials, interior solver,
scattering, spectrum and the Saito construction
"""
