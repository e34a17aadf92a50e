"""Independent reference implementations used to freeze expected values.

Nothing in this package imports from wolcan; every oracle re-derives its
answer from first principles so tests compare two separate routes.
"""
