"""
Infrastructure package: artifact file codecs.
"""
