class ValidityWarning(UserWarning):
    """A "much less than" condition of an approximation is not satisfied."""
