from utils.exceptions import DimensionError, ParameterError


def same_shape(a, b, what="operands"):
    if tuple(a.shape) != tuple(b.shape):
        raise DimensionError(
            f"Shape mismatch between {what}: {tuple(a.shape)} vs {tuple(b.shape)}"
        )
    return True


def has_rank(t, rank, what="tensor"):
    if len(t.shape) != rank:
        raise DimensionError(f"{what} must have rank {rank}, got shape {tuple(t.shape)}")
    return True


def extent(t, axis, expected, what="tensor"):
    if t.shape[axis] != expected:
        raise DimensionError(
            f"{what} axis {axis} must be {expected}, got shape {tuple(t.shape)}"
        )
    return True


def positive(value, name):
    if not value > 0:
        raise ParameterError(f"{name} must be positive, got {value}")
    return True
