"""
Application layer: correlation sets, tracial models, the three-projection
universal algebra and slice computations.
"""
