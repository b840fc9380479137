"""
Interface package: the command-line surface.
"""
